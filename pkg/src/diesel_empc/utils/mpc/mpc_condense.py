"""Condensing a rate-model horizon problem into a dense QP.

Decision vector: w = (du_0, ..., du_{N-1}, eps_0, ..., eps_{S-1}).
"""

import logging
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np

from .mpc_qp import PSD_TOL, QpProblem
from .mpc_rate import Horizon, RateModel

logger = logging.getLogger(__name__)

Source = Literal["state", "move", "slack"]


def predict_matrices(
  A: np.ndarray, B: np.ndarray, N: int, Bd: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
  """Phi[j], Gamma[j], Gamma_d[j] with xi_j = Phi[j] xi_0 + Gamma[j] du + Gamma_d[j] dd.

  Arrays are indexed j = 0..N; du and dd are the stacked move and disturbance
  sequences.
  """
  n, m = B.shape
  p = 0 if Bd is None else Bd.shape[1]
  Phi = np.zeros((N + 1, n, n))
  Gamma = np.zeros((N + 1, n, N * m))
  Gamma_d = np.zeros((N + 1, n, N * p))
  Phi[0] = np.eye(n)
  for j in range(1, N + 1):
    Phi[j] = A @ Phi[j - 1]
    Gamma[j] = A @ Gamma[j - 1]
    Gamma[j][:, (j - 1) * m : j * m] = B
    if p:
      Gamma_d[j] = A @ Gamma_d[j - 1]
      Gamma_d[j][:, (j - 1) * p : j * p] = Bd
  return Phi, Gamma, Gamma_d


@dataclass
class AffineExpr:
  """M w + c."""

  M: np.ndarray
  c: np.ndarray

  def __call__(self, w: np.ndarray) -> np.ndarray:
    return self.M @ w + self.c


@dataclass(eq=False)
class CostTerm:
  """Quadratic (x - r)'W(x - r) or linear q'(x - r) penalty summed over `steps`.

  For `source="state"` the steps index predicted extended states 0..N, for
  `"move"` the moves 0..N-1 and for `"slack"` the slack variables (selector unused).
  """

  kind: Literal["quadratic", "linear"]
  source: Source
  weight: np.ndarray
  steps: Sequence[int]
  selector: Optional[np.ndarray] = None
  reference: Optional[np.ndarray] = None

  def __post_init__(self):
    self.weight = np.atleast_1d(np.asarray(self.weight, dtype=float))
    if self.kind == "quadratic":
      self.weight = np.atleast_2d(self.weight)
      W = self.weight
      if W.shape[0] != W.shape[1] or np.max(np.abs(W - W.T), initial=0.0) > PSD_TOL:
        raise ValueError("Quadratic cost weight must be square and symmetric")
      if np.linalg.eigvalsh(W).min() < -PSD_TOL:
        raise ValueError("Quadratic cost weight must be positive semi-definite")
    elif np.any(self.weight < 0):
      raise ValueError("Linear cost weight must be >= 0")
    self.steps = list(self.steps)


@dataclass(eq=False)
class Constraint:
  """lower <= S x_j <= upper for each step, softened by eps[slack[k]] when given.

  Bounds broadcast to (len(steps), rows); infinite entries are dropped.
  """

  source: Literal["state", "move"]
  selector: np.ndarray
  steps: Sequence[int]
  lower: Optional[np.ndarray] = None
  upper: Optional[np.ndarray] = None
  slack: Optional[Sequence[int]] = None

  def __post_init__(self):
    self.selector = np.atleast_2d(np.asarray(self.selector, dtype=float))
    self.steps = list(self.steps)
    shape = (len(self.steps), self.selector.shape[0])
    self.lower = np.broadcast_to(
      -np.inf if self.lower is None else np.asarray(self.lower, dtype=float), shape
    )
    self.upper = np.broadcast_to(
      np.inf if self.upper is None else np.asarray(self.upper, dtype=float), shape
    )
    if np.any(self.lower > self.upper):
      raise ValueError("Constraint lower bound exceeds upper bound")
    if self.slack is not None:
      self.slack = list(self.slack)
      if len(self.slack) == 1 and len(self.steps) > 1:
        self.slack = self.slack * len(self.steps)
      if len(self.slack) != len(self.steps):
        raise ValueError("Constraint needs one slack index per step")


@dataclass(eq=False)
class CondensedQp:
  problem: QpProblem
  offset: float
  rate: RateModel
  horizon: Horizon
  xi0: np.ndarray
  Phi: np.ndarray
  Gamma: np.ndarray
  Gamma_d: np.ndarray
  disturbance: np.ndarray
  n_slack: int = 0
  terms: List[CostTerm] = field(default_factory=list)

  @property
  def n_moves(self) -> int:
    return self.horizon.N * self.rate.n_u

  def cost(self, w: np.ndarray) -> float:
    """Full horizon cost including the constant part."""
    return self.problem.objective(w) + self.offset

  def moves(self, w: np.ndarray) -> np.ndarray:
    return np.asarray(w[: self.n_moves]).reshape(self.horizon.N, self.rate.n_u)

  def slacks(self, w: np.ndarray) -> np.ndarray:
    return np.asarray(w[self.n_moves :])

  def feasible_start(self, moves: np.ndarray) -> np.ndarray:
    """`moves` padded with the smallest slacks that satisfy every soft row.

    The result is a valid `w0` for `solve_qp` whenever the moves meet the hard
    constraints; otherwise the solver falls back to its own phase one.
    """
    w = np.zeros(self.problem.n)
    w[: self.n_moves] = np.asarray(moves, dtype=float).reshape(-1)
    if self.n_slack:
      G = self.problem.G
      resid = G[:, : self.n_moves] @ w[: self.n_moves] - self.problem.h
      soft = G[:, self.n_moves :] < 0
      for k in range(self.n_slack):
        w[self.n_moves + k] = max(0.0, float(np.max(resid[soft[:, k]], initial=0.0)))
    return w

  def trajectory(self, w: np.ndarray) -> np.ndarray:
    du = np.asarray(w[: self.n_moves])
    return np.stack(
      [
        self.Phi[j] @ self.xi0 + self.Gamma[j] @ du + self.Gamma_d[j] @ self.disturbance
        for j in range(self.horizon.N + 1)
      ]
    )


def _expr(source: Source, step: int, S: Optional[np.ndarray], ctx: dict) -> AffineExpr:
  n_w, n_moves, m = ctx["n_w"], ctx["n_moves"], ctx["m"]
  if source == "state":
    if not 0 <= step <= ctx["N"]:
      raise ValueError(f"State step {step} outside 0..{ctx['N']}")
    M = np.zeros((ctx["n_ext"], n_w))
    M[:, :n_moves] = ctx["Gamma"][step]
    c = ctx["Phi"][step] @ ctx["xi0"] + ctx["Gamma_d"][step] @ ctx["dd"]
    return AffineExpr(S @ M, S @ c)
  if source == "move":
    if not 0 <= step < ctx["N"]:
      raise ValueError(f"Move step {step} outside 0..{ctx['N'] - 1}")
    M = np.zeros((m, n_w))
    M[:, step * m : (step + 1) * m] = np.eye(m)
    return AffineExpr(S @ M, np.zeros(S.shape[0]))
  if not 0 <= step < ctx["n_slack"]:
    raise ValueError(f"Slack index {step} outside 0..{ctx['n_slack'] - 1}")
  M = np.zeros((1, n_w))
  M[0, n_moves + step] = 1.0
  return AffineExpr(M, np.zeros(1))


def condense(
  rate: RateModel,
  horizon: Horizon,
  xi0: np.ndarray,
  cost_terms: Sequence[CostTerm],
  constraints: Sequence[Constraint] = (),
  n_slack: int = 0,
  disturbance: Optional[np.ndarray] = None,
) -> CondensedQp:
  """Dense QP over (moves, slacks); slacks get eps >= 0 rows automatically.

  `disturbance` holds known disturbance increments, shape (N, n_d).
  """
  N, m = horizon.N, rate.n_u
  xi0 = np.asarray(xi0, dtype=float)
  if xi0.shape != (rate.n_ext,):
    raise ValueError(f"Initial extended state has shape {xi0.shape}, expected ({rate.n_ext},)")
  Phi, Gamma, Gamma_d = predict_matrices(rate.A_ext, rate.B_ext, N, rate.Bd_ext)
  dd = np.zeros(N * rate.n_d)
  if disturbance is not None:
    if rate.Bd_ext is None:
      raise ValueError("Disturbance given for a model without disturbance input")
    disturbance = np.asarray(disturbance, dtype=float)
    if disturbance.shape != (N, rate.n_d):
      raise ValueError(f"Disturbance has shape {disturbance.shape}, expected ({N}, {rate.n_d})")
    dd = disturbance.reshape(-1)

  n_moves = N * m
  n_w = n_moves + n_slack
  ctx = {
    "n_w": n_w, "n_moves": n_moves, "m": m, "N": N, "n_ext": rate.n_ext,
    "n_slack": n_slack, "Phi": Phi, "Gamma": Gamma, "Gamma_d": Gamma_d, "xi0": xi0, "dd": dd,
  }

  H = np.zeros((n_w, n_w))
  f = np.zeros(n_w)
  offset = 0.0
  for term in cost_terms:
    for k, step in enumerate(term.steps):
      S = term.selector if term.selector is not None else np.eye(
        rate.n_ext if term.source == "state" else m
      )
      e = _expr(term.source, step, np.atleast_2d(S), ctx)
      r = np.zeros(e.M.shape[0])
      if term.reference is not None:
        ref = np.asarray(term.reference, dtype=float)
        r = ref[k] if ref.ndim == 2 else np.broadcast_to(ref, r.shape)
      c = e.c - r
      if term.kind == "quadratic":
        W = term.weight
        H += 2.0 * e.M.T @ W @ e.M
        f += 2.0 * e.M.T @ W @ c
        offset += float(c @ W @ c)
      else:
        q = np.broadcast_to(term.weight, c.shape)
        f += e.M.T @ q
        offset += float(q @ c)

  G_rows, h_rows = [], []
  for con in constraints:
    for k, step in enumerate(con.steps):
      e = _expr(con.source, step, con.selector, ctx)
      for i in range(e.M.shape[0]):
        soft = np.zeros(n_w)
        if con.slack is not None:
          soft[n_moves + con.slack[k]] = -1.0
        if np.isfinite(con.upper[k, i]):
          G_rows.append(e.M[i] + soft)
          h_rows.append(con.upper[k, i] - e.c[i])
        if np.isfinite(con.lower[k, i]):
          G_rows.append(-e.M[i] + soft)
          h_rows.append(e.c[i] - con.lower[k, i])
  for s in range(n_slack):
    row = np.zeros(n_w)
    row[n_moves + s] = -1.0
    G_rows.append(row)
    h_rows.append(0.0)

  G = np.array(G_rows) if G_rows else np.zeros((0, n_w))
  h = np.array(h_rows) if h_rows else np.zeros(0)
  problem = QpProblem(0.5 * (H + H.T), f, G, h)
  logger.debug(f"Condensed QP: {n_w} variables, {G.shape[0]} inequalities")
  return CondensedQp(
    problem, offset, rate, horizon, xi0, Phi, Gamma, Gamma_d, dd, n_slack, list(cost_terms)
  )
