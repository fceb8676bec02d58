"""Rate-based extended-state models.

The extended state carries increments next to the previous absolute values, so a
prediction only needs scaled measurements and never the equilibrium offset.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ...inputs import DT
from ..lpv.lpv_model import LocalModel

logger = logging.getLogger(__name__)

RATE_LAYOUT = ("dx", "x_prev", "u_prev")
TRACKING_LAYOUT = ("dz", "e", "z_prev", "v_prev")


@dataclass(frozen=True)
class Horizon:
  N: int
  dt: float = DT

  def __post_init__(self):
    if self.N < 1:
      raise ValueError(f"Horizon must be >= 1 step, got {self.N}")
    if not self.dt > 0:
      raise ValueError("Horizon dt must be > 0")

  @property
  def seconds(self) -> float:
    return self.N * self.dt


@dataclass(eq=False)
class RateModel:
  A_ext: np.ndarray
  B_ext: np.ndarray
  n_x: int
  n_u: int
  layout: Tuple[str, ...] = RATE_LAYOUT
  Bd_ext: Optional[np.ndarray] = None

  @property
  def n_ext(self) -> int:
    return self.A_ext.shape[0]

  @property
  def n_d(self) -> int:
    return 0 if self.Bd_ext is None else self.Bd_ext.shape[1]

  def _sizes(self) -> Dict[str, int]:
    return {name: self.n_u if name in ("u_prev", "v_prev") else self.n_x for name in self.layout}

  def block(self, name: str) -> slice:
    start = 0
    for key, size in self._sizes().items():
      if key == name:
        return slice(start, start + size)
      start += size
    raise KeyError(f"No block '{name}' in layout {self.layout}")

  def selector(self, name: str, rows: Optional[Sequence[int]] = None) -> np.ndarray:
    """Rows of the identity that pick block `name` (optionally a subset)."""
    S = np.eye(self.n_ext)[self.block(name)]
    return S if rows is None else S[list(rows)]

  def current_state(self) -> np.ndarray:
    """Selector of the absolute state at the same step: increment plus previous."""
    if len(self.layout) == 1:
      return self.selector(self.layout[0])
    prev = "x_prev" if "x_prev" in self.layout else "z_prev"
    return self.selector(self.layout[0]) + self.selector(prev)

  def step(self, xi: np.ndarray, du: np.ndarray, dd: Optional[np.ndarray] = None) -> np.ndarray:
    out = self.A_ext @ xi + self.B_ext @ du
    if self.Bd_ext is not None and dd is not None:
      out = out + self.Bd_ext @ dd
    return out

  def rollout(
    self, xi0: np.ndarray, moves: np.ndarray, disturbances: Optional[np.ndarray] = None
  ) -> np.ndarray:
    moves = np.atleast_2d(moves)
    traj = np.zeros((moves.shape[0] + 1, self.n_ext))
    traj[0] = xi0
    for k, du in enumerate(moves):
      dd = None if disturbances is None else disturbances[k]
      traj[k + 1] = self.step(traj[k], du, dd)
    return traj


def _check(A: np.ndarray, B: np.ndarray, Bd: Optional[np.ndarray]):
  A, B = np.atleast_2d(np.asarray(A, dtype=float)), np.atleast_2d(np.asarray(B, dtype=float))
  n = A.shape[0]
  if A.shape != (n, n):
    raise ValueError(f"A must be square, got {A.shape}")
  if B.shape[0] != n:
    raise ValueError(f"B has {B.shape[0]} rows, expected {n}")
  if Bd is not None:
    Bd = np.atleast_2d(np.asarray(Bd, dtype=float))
    if Bd.shape[0] != n:
      raise ValueError(f"Bd has {Bd.shape[0]} rows, expected {n}")
  return A, B, Bd


def rate_matrices(
  A: np.ndarray, B: np.ndarray, Bd: Optional[np.ndarray] = None
) -> RateModel:
  """[A 0 0; I I 0; 0 0 I] and [B; 0; I] over (dx, x_prev, u_prev)."""
  A, B, Bd = _check(A, B, Bd)
  n, m = B.shape
  I_n, Z_nn, Z_nm = np.eye(n), np.zeros((n, n)), np.zeros((n, m))
  A_ext = np.block(
    [
      [A, Z_nn, Z_nm],
      [I_n, I_n, Z_nm],
      [Z_nm.T, Z_nm.T, np.eye(m)],
    ]
  )
  B_ext = np.vstack([B, Z_nm, np.eye(m)])
  Bd_ext = None if Bd is None else np.vstack([Bd, np.zeros((n + m, Bd.shape[1]))])
  return RateModel(A_ext, B_ext, n, m, RATE_LAYOUT, Bd_ext)


def tracking_matrices(
  A: np.ndarray, B: np.ndarray, Bd: Optional[np.ndarray] = None
) -> RateModel:
  """Rate model with the tracking error e = z - r carried as an integrator."""
  A, B, Bd = _check(A, B, Bd)
  n, m = B.shape
  I_n, Z_nn, Z_nm = np.eye(n), np.zeros((n, n)), np.zeros((n, m))
  A_ext = np.block(
    [
      [A, Z_nn, Z_nn, Z_nm],
      [A, I_n, Z_nn, Z_nm],
      [I_n, Z_nn, I_n, Z_nm],
      [Z_nm.T, Z_nm.T, Z_nm.T, np.eye(m)],
    ]
  )
  B_ext = np.vstack([B, B, Z_nm, np.eye(m)])
  Bd_ext = None
  if Bd is not None:
    Bd_ext = np.vstack([Bd, Bd, np.zeros((n + m, Bd.shape[1]))])
  return RateModel(A_ext, B_ext, n, m, TRACKING_LAYOUT, Bd_ext)


def make_rate_model(local: LocalModel) -> RateModel:
  """Rate model in scaled coordinates (x / sigma_x, u / sigma_u) of a local model."""
  return rate_matrices(local.A, local.B, local.Bf)


def make_tracking_model(local: LocalModel) -> RateModel:
  return tracking_matrices(local.A, local.B, local.Bf)


def rate_state(
  x: np.ndarray, x_prev: np.ndarray, u_prev: np.ndarray
) -> np.ndarray:
  """Extended state (x - x_prev, x_prev, u_prev)."""
  x, x_prev = np.asarray(x, dtype=float), np.asarray(x_prev, dtype=float)
  return np.concatenate([x - x_prev, x_prev, np.asarray(u_prev, dtype=float)])


def tracking_state(
  z: np.ndarray, z_prev: np.ndarray, reference: np.ndarray, v_prev: np.ndarray
) -> np.ndarray:
  """Extended state (z - z_prev, z - r, z_prev, v_prev)."""
  z, z_prev = np.asarray(z, dtype=float), np.asarray(z_prev, dtype=float)
  return np.concatenate(
    [z - z_prev, z - np.asarray(reference, dtype=float), z_prev, np.asarray(v_prev, dtype=float)]
  )


def nominal_model(local: LocalModel) -> RateModel:
  """The local model itself, x~+ = A x~ + B u~ + Bf d~, in the RateModel container.

  Condensing it gives an absolute-input problem: the "moves" are the inputs.
  """
  A, B, Bd = _check(local.A, local.B, local.Bf)
  return RateModel(A, B, B.shape[0], B.shape[1], ("x",), Bd)
