"""Dense convex QP solver (primal active set).

Solves  min 0.5 w'Hw + f'w  s.t.  G w <= h,  E w = d.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog

from ...converters import to_array, to_dict

logger = logging.getLogger(__name__)

PSD_TOL = 1e-10
RIDGE = 1e-10
MAX_ITERATIONS = 500
FEAS_TOL = 1e-9
DUAL_TOL = 1e-10
# consecutive zero-length steps before switching to Bland's rule
DEGENERATE_STREAK = 5

QP_FORMAT_VERSION = 1


def _as_system(M: Optional[np.ndarray], v: Optional[np.ndarray], n: int, name: str):
  if M is None or np.size(M) == 0:
    return np.zeros((0, n)), np.zeros(0)
  M = np.atleast_2d(np.asarray(M, dtype=float))
  v = np.atleast_1d(np.asarray(v, dtype=float))
  if M.shape[1] != n or M.shape[0] != v.shape[0]:
    raise ValueError(f"{name} has shape {M.shape} / {v.shape}, expected (m, {n}) / (m,)")
  return M, v


@dataclass(eq=False)
class QpProblem:
  H: np.ndarray
  f: np.ndarray
  G: Optional[np.ndarray] = None
  h: Optional[np.ndarray] = None
  E: Optional[np.ndarray] = None
  d: Optional[np.ndarray] = None

  def __post_init__(self):
    self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
    self.f = np.atleast_1d(np.asarray(self.f, dtype=float))
    n = self.f.shape[0]
    if self.H.shape != (n, n):
      raise ValueError(f"H has shape {self.H.shape}, expected ({n}, {n})")
    scale = max(1.0, float(np.max(np.abs(self.H))) if n else 1.0)
    if np.max(np.abs(self.H - self.H.T), initial=0.0) > PSD_TOL * scale:
      raise ValueError("H must be symmetric")
    self.H = 0.5 * (self.H + self.H.T)
    if n and np.linalg.eigvalsh(self.H).min() < -PSD_TOL * scale:
      raise ValueError("H must be positive semi-definite")
    self.G, self.h = _as_system(self.G, self.h, n, "inequality system")
    self.E, self.d = _as_system(self.E, self.d, n, "equality system")
    for name in ("H", "f", "G", "h", "E", "d"):
      if not np.all(np.isfinite(getattr(self, name))):
        raise ValueError(f"{name} contains non-finite values")

  @property
  def n(self) -> int:
    return self.f.shape[0]

  def objective(self, w: np.ndarray) -> float:
    return float(0.5 * w @ self.H @ w + self.f @ w)

  def violation(self, w: np.ndarray) -> float:
    ineq = np.max(self.G @ w - self.h, initial=0.0)
    eq = np.max(np.abs(self.E @ w - self.d), initial=0.0)
    return float(max(ineq, eq, 0.0))


@dataclass
class QpSolution:
  w: Optional[np.ndarray]
  status: str
  lam: np.ndarray = field(default_factory=lambda: np.zeros(0))
  nu: np.ndarray = field(default_factory=lambda: np.zeros(0))
  iterations: int = 0
  certificate: Optional[Dict[str, np.ndarray]] = None

  @property
  def ok(self) -> bool:
    return self.status == "optimal"

  @property
  def duals(self) -> Dict[str, np.ndarray]:
    return {"inequality": self.lam, "equality": self.nu}


def check_kkt(problem: QpProblem, solution: QpSolution) -> Dict[str, float]:
  """Residuals of the optimality conditions at a returned solution."""
  w, lam, nu = solution.w, solution.lam, solution.nu
  grad = problem.H @ w + problem.f + problem.G.T @ lam + problem.E.T @ nu
  slack = problem.G @ w - problem.h
  return {
    "stationarity": float(np.max(np.abs(grad), initial=0.0)),
    "primal": problem.violation(w),
    "dual": float(np.max(-lam, initial=0.0)),
    "complementarity": float(np.max(np.abs(lam * slack), initial=0.0)),
  }


class _Scaled:
  """Row-normalized constraints and max-normalized objective."""

  def __init__(self, p: QpProblem):
    self.obj_scale = max(
      float(np.max(np.abs(p.H), initial=0.0)), float(np.max(np.abs(p.f), initial=0.0))
    )
    if self.obj_scale == 0.0:
      self.obj_scale = 1.0
    self.H = p.H / self.obj_scale
    self.f = p.f / self.obj_scale
    self.g_norm = np.linalg.norm(p.G, axis=1)
    self.e_norm = np.linalg.norm(p.E, axis=1)
    g_safe = np.where(self.g_norm > 0, self.g_norm, 1.0)
    e_safe = np.where(self.e_norm > 0, self.e_norm, 1.0)
    self.G = p.G / g_safe[:, None]
    self.h = p.h / g_safe
    self.E = p.E / e_safe[:, None]
    self.d = p.d / e_safe
    self.g_safe, self.e_safe = g_safe, e_safe

  def unscale_duals(self, lam: np.ndarray, nu: np.ndarray):
    return lam * self.obj_scale / self.g_safe, nu * self.obj_scale / self.e_safe


def _farkas(s: _Scaled) -> Dict[str, np.ndarray]:
  """Ray (y >= 0, z) with G'y + E'z = 0 and h'y + d'z < 0."""
  mi, me = s.G.shape[0], s.E.shape[0]
  c = np.concatenate([s.h, s.d])
  A_eq = np.hstack([s.G.T, s.E.T])
  A_ub = -c[None, :]
  bounds = [(0, None)] * mi + [(None, None)] * me
  res = linprog(
    c, A_ub=A_ub, b_ub=[1.0], A_eq=A_eq, b_eq=np.zeros(A_eq.shape[0]), bounds=bounds,
    method="highs",
  )
  x = res.x if res.x is not None else np.zeros(mi + me)
  return {"inequality": x[:mi] / s.g_safe, "equality": x[mi:] / s.e_safe}


def _phase_one(s: _Scaled, n: int):
  """A feasible point from an LP with zero cost, or the LP status on failure."""
  res = linprog(
    np.zeros(n),
    A_ub=s.G if s.G.shape[0] else None,
    b_ub=s.h if s.G.shape[0] else None,
    A_eq=s.E if s.E.shape[0] else None,
    b_eq=s.d if s.E.shape[0] else None,
    bounds=[(None, None)] * n,
    method="highs",
  )
  return (res.x, res.status) if res.status == 0 else (None, res.status)


def _sign_bounded(s: _Scaled, N: np.ndarray) -> bool:
  """ker(H) spanned by coordinates that carry w_i >= 0 rows and cost f_i >= 0."""
  support = np.flatnonzero(np.max(np.abs(N), axis=1) > 1e-9)
  if support.size != N.shape[1] or np.any(s.f[support] < 0):
    return False
  for i in support:
    rows = s.G[:, i] < 0
    others = np.delete(s.G[rows], i, axis=1)
    if not np.any(np.max(np.abs(others), axis=1, initial=0.0) == 0.0):
      return False
  return True


def _unbounded(s: _Scaled) -> bool:
  """True when a feasible recession direction in ker(H) decreases f'w."""
  N = null_space(s.H)
  if N.shape[1] == 0:
    return False
  if _sign_bounded(s, N):
    return False
  k = N.shape[1]
  res = linprog(
    s.f @ N,
    A_ub=s.G @ N if s.G.shape[0] else None,
    b_ub=np.zeros(s.G.shape[0]) if s.G.shape[0] else None,
    A_eq=s.E @ N if s.E.shape[0] else None,
    b_eq=np.zeros(s.E.shape[0]) if s.E.shape[0] else None,
    bounds=[(-1.0, 1.0)] * k,
    method="highs",
  )
  return res.status == 0 and res.fun < -1e-9


def _kkt_solve(Hr: np.ndarray, A: np.ndarray, rhs_top: np.ndarray, rhs_bottom: np.ndarray):
  n, m = Hr.shape[0], A.shape[0]
  K = np.block([[Hr, A.T], [A, np.zeros((m, m))]])
  rhs = np.concatenate([rhs_top, rhs_bottom])
  try:
    sol = np.linalg.solve(K, rhs)
  except np.linalg.LinAlgError:
    sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
  return sol[:n], sol[n:]


def _polish(s: _Scaled, working: List[int]):
  """Exact (ridge-free) solution on the final working set, if well posed."""
  n = s.H.shape[0]
  A = np.vstack([s.E, s.G[working]]) if working else s.E
  b = np.concatenate([s.d, s.h[working]]) if working else s.d
  m = A.shape[0]
  K = np.block([[s.H, A.T], [A, np.zeros((m, m))]])
  with np.errstate(divide="ignore", invalid="ignore"):
    cond = np.linalg.cond(K) if K.size else 1.0
  if not np.isfinite(cond) or cond > 1e12:
    return None
  try:
    sol = np.linalg.solve(K, np.concatenate([-s.f, b]))
  except np.linalg.LinAlgError:
    return None
  w, mu = sol[:n], sol[n:]
  if not np.all(np.isfinite(sol)):
    return None
  if np.max(s.G @ w - s.h, initial=0.0) > FEAS_TOL:
    return None
  if np.min(mu[s.E.shape[0]:], initial=0.0) < -DUAL_TOL:
    return None
  return w, mu


def solve_qp(problem: QpProblem, w0: Optional[np.ndarray] = None) -> QpSolution:
  """Primal active-set solve.

  A 1e-10 ridge on H makes every subproblem strictly convex, so degenerate optima
  resolve to the minimum-norm point. The result is polished without the ridge when
  the final KKT system is nonsingular.
  """
  n = problem.n
  s = _Scaled(problem)
  mi, me = s.G.shape[0], s.E.shape[0]

  zero_rows = s.g_norm == 0
  if np.any(zero_rows & (problem.h < 0)):
    logger.debug("QP has a trivially infeasible 0 <= h row")
    return QpSolution(None, "infeasible", certificate=_farkas(s))
  active_rows = np.flatnonzero(~zero_rows)

  w = None
  if w0 is not None:
    w0 = np.asarray(w0, dtype=float)
    if w0.shape == (n,) and problem.violation(w0) <= FEAS_TOL:
      w = w0.copy()
  if w is None:
    w, status = _phase_one(s, n)
    if w is None:
      if status == 2:
        logger.debug("QP phase one reports infeasibility")
        return QpSolution(None, "infeasible", certificate=_farkas(s))
      return QpSolution(None, "numerical_error")
  if _unbounded(s):
    return QpSolution(None, "unbounded")

  Hr = s.H + RIDGE * np.eye(n)
  working: List[int] = []
  lam_w = np.zeros(0)
  mu = np.zeros(me)
  streak = 0
  iterations = 0
  status = "max_iter"
  while iterations < MAX_ITERATIONS:
    iterations += 1
    A = np.vstack([s.E, s.G[working]]) if working else s.E
    g = Hr @ w + s.f
    p, mu = _kkt_solve(Hr, A, -g, np.zeros(A.shape[0]))
    lam_w = mu[me:]

    if np.linalg.norm(p) <= 1e-10 * (1.0 + np.linalg.norm(w)):
      w = w + p
      negative = [(lam_w[k], working[k]) for k in range(len(working)) if lam_w[k] < -DUAL_TOL]
      if not negative:
        status = "optimal"
        break
      if streak >= DEGENERATE_STREAK:
        drop = min(i for _, i in negative)
      else:
        drop = min(negative)[1]
      working.remove(drop)
      continue

    Gp = s.G @ p
    blockable = np.zeros(mi, dtype=bool)
    blockable[active_rows] = Gp[active_rows] > 1e-12 * np.linalg.norm(p)
    blockable[working] = False
    alpha, blocking = 1.0, None
    if np.any(blockable):
      rows = np.flatnonzero(blockable)
      steps = np.maximum((s.h[rows] - s.G[rows] @ w) / Gp[rows], 0.0)
      k = int(np.argmin(steps))
      if steps[k] < alpha:
        alpha, blocking = float(steps[k]), int(rows[k])
    w = w + alpha * p
    streak = streak + 1 if alpha == 0.0 else 0
    if blocking is not None:
      working.append(blocking)
      working.sort()

  if status != "optimal":
    logger.warning(f"QP active set stopped after {iterations} iterations")
    return QpSolution(w, status, iterations=iterations)

  polished = _polish(s, working)
  if polished is not None:
    w, mu = polished
  lam = np.zeros(mi)
  lam[working] = np.maximum(mu[me:], 0.0)
  lam, nu = s.unscale_duals(lam, mu[:me])
  return QpSolution(w, "optimal", lam, nu, iterations)


def dump_problem(
  problem: QpProblem, path: Path | str, context: Optional[Dict[str, Any]] = None
) -> Path:
  """JSON copy of a QP for reproducing a failed solve."""
  path = Path(path)
  path.parent.mkdir(parents=True, exist_ok=True)
  payload = {
    "format": "qp",
    "format_version": QP_FORMAT_VERSION,
    "context": context or {},
    **{name: getattr(problem, name) for name in ("H", "f", "G", "h", "E", "d")},
  }
  with open(path, "w", encoding="utf-8") as fp:
    json.dump(to_dict(payload), fp)
  logger.info(f"Dumped QP ({problem.n} variables) to {path}")
  return path


def load_problem(path: Path | str) -> QpProblem:
  with open(path, "r", encoding="utf-8") as fp:
    data = json.load(fp)
  if data.get("format") != "qp":
    raise ValueError(f"{path} is not a QP dump")
  n = len(data["f"])
  G = to_array(data["G"], ndim=2) if data["G"] else np.zeros((0, n))
  E = to_array(data["E"], ndim=2) if data["E"] else np.zeros((0, n))
  return QpProblem(
    to_array(data["H"], ndim=2), to_array(data["f"]), G, to_array(data["h"]), E,
    to_array(data["d"]),
  )
