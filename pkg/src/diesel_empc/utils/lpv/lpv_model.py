"""Local linear models in normalized coordinates and their LPV grid assembly.

A local model maps normalized deviations

    x~ = (x - x_ss) / sigma_x,   u~ = (u - u_ss) / sigma_u,   d~ = (d - d_ss) / sigma_d

through x~[k+1] = A x~[k] + B u~[k] (+ Bf d~[k]). The grid model interpolates
every matrix and table entrywise between nodes.
"""

import logging
import uuid
from dataclasses import dataclass, field
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from ...cache import cache
from ...errors import ZeroVarianceError
from ...inputs import OperatingPoint
from .lpv_grid import GridTable, ScheduleGrid, stack_nodes

logger = logging.getLogger(__name__)

ModelKind = Literal["emissions", "airpath"]

STATE_NAMES: Dict[str, Tuple[str, ...]] = {
  "emissions": ("nox", "soot"),
  "airpath": ("intake_pressure", "egr_rate"),
}
INPUT_NAMES: Dict[str, Tuple[str, ...]] = {
  "emissions": ("intake_pressure", "egr_rate", "fuel_rate"),
  "airpath": ("egr_valve", "vgt_position"),
}
DISTURBANCE_NAMES: Dict[str, Tuple[str, ...]] = {
  "emissions": (),
  "airpath": ("fuel_rate",),
}

Part = Literal["state", "input", "disturbance"]


def _vector(value, name: str, size: int) -> np.ndarray:
  arr = np.asarray(value, dtype=float).reshape(-1)
  if arr.shape != (size,):
    raise ValueError(f"{name} must have {size} entries, got {arr.shape}")
  if not np.all(np.isfinite(arr)):
    raise ValueError(f"{name} must be finite")
  return arr


def _check_scale(scale: np.ndarray, name: str) -> None:
  if np.any(scale <= 0):
    raise ZeroVarianceError(f"{name} has non-positive entries: {scale.tolist()}")


@dataclass(eq=False)
class LocalModel:
  A: np.ndarray
  B: np.ndarray
  x_ss: np.ndarray
  u_ss: np.ndarray
  sigma_x: np.ndarray
  sigma_u: np.ndarray
  Bf: Optional[np.ndarray] = None
  d_ss: Optional[np.ndarray] = None
  sigma_d: Optional[np.ndarray] = None
  rollout_error: float = 0.0
  flagged: bool = False
  projected: bool = False
  # (i, j) of the node whose dynamics replaced a rejected fit
  substituted_from: Optional[Tuple[int, int]] = None

  def __post_init__(self):
    self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
    n = self.A.shape[0]
    if self.A.shape != (n, n):
      raise ValueError(f"A must be square, got {self.A.shape}")
    self.B = np.asarray(self.B, dtype=float).reshape(n, -1)
    m = self.B.shape[1]
    self.x_ss = _vector(self.x_ss, "x_ss", n)
    self.sigma_x = _vector(self.sigma_x, "sigma_x", n)
    self.u_ss = _vector(self.u_ss, "u_ss", m)
    self.sigma_u = _vector(self.sigma_u, "sigma_u", m)
    _check_scale(self.sigma_x, "sigma_x")
    _check_scale(self.sigma_u, "sigma_u")
    if self.Bf is not None:
      self.Bf = np.asarray(self.Bf, dtype=float).reshape(n, -1)
      nd = self.Bf.shape[1]
      self.d_ss = _vector(self.d_ss if self.d_ss is not None else np.zeros(nd), "d_ss", nd)
      self.sigma_d = _vector(
        self.sigma_d if self.sigma_d is not None else np.ones(nd), "sigma_d", nd
      )
      _check_scale(self.sigma_d, "sigma_d")
    if self.substituted_from is not None:
      self.substituted_from = tuple(int(k) for k in self.substituted_from)
    if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.B))):
      raise ValueError("Local model matrices must be finite")

  @property
  def n_x(self) -> int:
    return self.A.shape[0]

  @property
  def n_u(self) -> int:
    return self.B.shape[1]

  @property
  def n_d(self) -> int:
    return 0 if self.Bf is None else self.Bf.shape[1]

  @property
  def spectral_radius(self) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(self.A))))

  def offsets(self, part: Part) -> Tuple[np.ndarray, np.ndarray]:
    if part == "state":
      return self.x_ss, self.sigma_x
    if part == "input":
      return self.u_ss, self.sigma_u
    if self.Bf is None:
      raise ValueError("Model has no disturbance channel")
    return self.d_ss, self.sigma_d

  def physical_matrices(self) -> Tuple[np.ndarray, ...]:
    """(A, B[, Bf]) acting on un-normalized deviations from the node equilibrium."""
    sx = self.sigma_x
    A = self.A * sx[:, None] / sx[None, :]
    B = self.B * sx[:, None] / self.sigma_u[None, :]
    if self.Bf is None:
      return A, B
    return A, B, self.Bf * sx[:, None] / self.sigma_d[None, :]

  def step(self, x: np.ndarray, u: np.ndarray, d: Optional[np.ndarray] = None) -> np.ndarray:
    """One step in physical units, renormalizing with this model's offsets."""
    xt = self.A @ normalize(x, self) + self.B @ normalize(u, self, "input")
    if self.Bf is not None:
      if d is None:
        raise ValueError("Airpath model step needs the fuel disturbance")
      xt = xt + self.Bf @ normalize(d, self, "disturbance")
    return denormalize(xt, self)


def normalize(x, local: LocalModel, part: Part = "state") -> np.ndarray:
  """(x - offset) / sigma for the state, input or disturbance channels."""
  offset, scale = local.offsets(part)
  _check_scale(scale, f"sigma ({part})")
  return (np.asarray(x, dtype=float) - offset) / scale


def denormalize(xt, local: LocalModel, part: Part = "state") -> np.ndarray:
  offset, scale = local.offsets(part)
  _check_scale(scale, f"sigma ({part})")
  return np.asarray(xt, dtype=float) * scale + offset


# Per-node fields interpolated entrywise.
_FIELDS = ("A", "B", "x_ss", "u_ss", "sigma_x", "sigma_u")
_DIST_FIELDS = ("Bf", "d_ss", "sigma_d")


@dataclass(eq=False)
class LpvGridModel:
  kind: ModelKind
  grid: ScheduleGrid
  locals: List[LocalModel]
  metadata: Dict[str, object] = field(default_factory=dict)
  key: str = field(default_factory=lambda: uuid.uuid4().hex)

  def __post_init__(self):
    if len(self.locals) != self.grid.size:
      raise ValueError(
        f"Grid has {self.grid.size} nodes but {len(self.locals)} local models were given"
      )
    n, m = len(STATE_NAMES[self.kind]), len(INPUT_NAMES[self.kind])
    nd = len(DISTURBANCE_NAMES[self.kind])
    for idx, local in enumerate(self.locals):
      if (local.n_x, local.n_u, local.n_d) != (n, m, nd):
        raise ValueError(
          f"Node {idx} has dims {(local.n_x, local.n_u, local.n_d)}, "
          f"{self.kind} models need {(n, m, nd)}"
        )
    names = _FIELDS + (_DIST_FIELDS if nd else ())
    self._tables = {
      name: GridTable(self.grid, stack_nodes(self.grid, [getattr(lm, name) for lm in self.locals]))
      for name in names
    }

  @property
  def dims(self) -> Tuple[int, int]:
    return self.locals[0].n_x, self.locals[0].n_u

  def local(self, i: int, j: int) -> LocalModel:
    return self.locals[i * len(self.grid.fuels) + j]

  def flagged_nodes(self) -> List[Tuple[int, int]]:
    nf = len(self.grid.fuels)
    return [divmod(k, nf) for k, lm in enumerate(self.locals) if lm.flagged]

  def table(self, name: str) -> GridTable:
    return self._tables[name]

  def tables(self) -> Dict[str, GridTable]:
    return dict(self._tables)


def interpolate(model: LpvGridModel, rho: OperatingPoint) -> LocalModel:
  """Entrywise bilinear interpolation of the node models at `rho`.

  Queries outside the grid are clamped to its boundary. Results are cached per
  (model, clamped rho).
  """
  speed, fuel = model.grid.clamp(rho)
  key = ("lpv", model.key, speed, fuel)
  cached = cache.get(key)
  if cached is not None:
    return cached
  values = {name: table.at(speed, fuel) for name, table in model.tables().items()}
  local = LocalModel(**values)
  cache.set(key, local)
  return local


def simulate_lpv(
  model: LpvGridModel,
  x0: Sequence[float],
  inputs: np.ndarray,
  rhos: Sequence[OperatingPoint],
  disturbances: Optional[np.ndarray] = None,
) -> np.ndarray:
  """Roll the LPV model forward in physical units.

  The state is renormalized once per step with the local model at rho[k].
  Returns the (T + 1, n_x) trajectory including x0.
  """
  inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
  if len(rhos) != inputs.shape[0]:
    raise ValueError("inputs and rhos must have equal length")
  if model.kind == "airpath" and disturbances is None:
    disturbances = np.array([[rho.fuel_rate] for rho in rhos])
  x = np.asarray(x0, dtype=float)
  out = [x]
  for k, rho in enumerate(rhos):
    local = interpolate(model, rho)
    d = None if disturbances is None or local.Bf is None else disturbances[k]
    x = local.step(x, inputs[k], d)
    out.append(x)
  return np.array(out)
