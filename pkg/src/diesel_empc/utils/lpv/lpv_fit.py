"""Local model fitting: one-step least squares with a multi-step rollout gate."""

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import least_squares

from ...errors import ModelQualityError, RankDeficientError
from ...inputs import IdentConfig
from .lpv_experiment import ExperimentLog
from .lpv_model import DISTURBANCE_NAMES, INPUT_NAMES, STATE_NAMES, LocalModel, ModelKind

logger = logging.getLogger(__name__)

# rows of data required per fitted parameter
MIN_ROWS_PER_PARAM = 10


@dataclass
class Regression:
  """Normalized state, input and disturbance series of one experiment.

  states[k + 1] follows from states[k], inputs[k] and disturbances[k].
  """

  states: np.ndarray  # (T, n)
  inputs: np.ndarray  # (T - 1, m)
  disturbances: Optional[np.ndarray]  # (T - 1, nd)


def _scales(values: np.ndarray, names: Sequence[str]) -> np.ndarray:
  scale = values.std(axis=0)
  for name, s, ref in zip(names, scale, np.abs(values).max(axis=0)):
    if not s > 1e-12 * (1.0 + ref):
      raise RankDeficientError(name, f"Channel '{name}' is not excited (zero variance)")
  return scale


def _design(reg: Regression) -> Tuple[np.ndarray, np.ndarray]:
  parts = [reg.states[:-1], reg.inputs]
  if reg.disturbances is not None:
    parts.append(reg.disturbances)
  return np.hstack(parts), reg.states[1:]


def _check_rank(phi: np.ndarray, names: Sequence[str]) -> None:
  _, s, vt = np.linalg.svd(phi, full_matrices=False)
  tol = s[0] * max(phi.shape) * np.finfo(float).eps
  if s[-1] <= tol:
    raise RankDeficientError(names[int(np.argmax(np.abs(vt[-1])))])


def _split(theta: np.ndarray, n: int, m: int) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
  A = theta[:n].T
  B = theta[n : n + m].T
  Bf = theta[n + m :].T if theta.shape[0] > n + m else None
  return A, B, Bf


def spectral_radius(A: np.ndarray) -> float:
  return float(np.max(np.abs(np.linalg.eigvals(A))))


def project_stable(A: np.ndarray, max_radius: float) -> Tuple[np.ndarray, bool]:
  """Scale A so every eigenvalue lies within `max_radius`."""
  radius = spectral_radius(A)
  if radius <= max_radius:
    return A, False
  return A * (max_radius / radius), True


def rollout(
  reg: Regression, A: np.ndarray, B: np.ndarray, Bf: Optional[np.ndarray], horizon: int
) -> Tuple[np.ndarray, np.ndarray]:
  """Open-loop predictions over non-overlapping windows of `horizon` steps.

  Returns (predicted, actual), both shaped (windows, horizon, n).
  """
  T = reg.states.shape[0]
  horizon = min(horizon, T - 1)
  starts = np.arange(0, T - horizon, horizon)
  x = reg.states[starts]
  predicted = []
  for j in range(horizon):
    x = x @ A.T + reg.inputs[starts + j] @ B.T
    if Bf is not None:
      x = x + reg.disturbances[starts + j] @ Bf.T
    predicted.append(x)
  actual = reg.states[starts[:, None] + np.arange(1, horizon + 1)[None, :]]
  return np.stack(predicted, axis=1), actual


def rollout_error(
  reg: Regression, A: np.ndarray, B: np.ndarray, Bf: Optional[np.ndarray], horizon: int
) -> float:
  """Rollout residual norm relative to the spread of the predicted signals."""
  predicted, actual = rollout(reg, A, B, Bf, horizon)
  n = actual.shape[-1]
  spread = actual.reshape(-1, n) - actual.reshape(-1, n).mean(axis=0)
  denom = float(np.sum(spread**2))
  if denom <= 0:
    return np.inf
  return float(np.sqrt(np.sum((predicted - actual) ** 2) / denom))


def _refit_inputs(reg: Regression, A: np.ndarray) -> np.ndarray:
  parts = [reg.inputs] + ([reg.disturbances] if reg.disturbances is not None else [])
  target = reg.states[1:] - reg.states[:-1] @ A.T
  coef, *_ = np.linalg.lstsq(np.hstack(parts), target, rcond=None)
  return coef


def _refine(
  reg: Regression, A: np.ndarray, B: np.ndarray, Bf: Optional[np.ndarray], cfg: IdentConfig
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
  n, m = B.shape
  blocks = [A, B] + ([Bf] if Bf is not None else [])
  theta0 = np.hstack(blocks).T.ravel()
  shape = (theta0.size // n, n)

  def residuals(theta):
    A_, B_, Bf_ = _split(theta.reshape(shape), n, m)
    predicted, actual = rollout(reg, A_, B_, Bf_, cfg.horizon)
    return (predicted - actual).ravel()

  result = least_squares(residuals, theta0, method="trf", max_nfev=200)
  A_r, B_r, Bf_r = _split(result.x.reshape(shape), n, m)
  A_r, _ = project_stable(A_r, cfg.max_spectral_radius)
  return A_r, B_r, Bf_r


def fit_regression(
  reg: Regression,
  names: Sequence[str],
  cfg: IdentConfig = IdentConfig(),
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray], float, bool]:
  """Fit normalized (A, B[, Bf]); returns matrices, rollout error and projection flag.

  `names` lists the state, input and disturbance channels in regressor order.
  """
  phi, target = _design(reg)
  n = reg.states.shape[1]
  m = reg.inputs.shape[1]
  n_params = n * phi.shape[1]
  if phi.shape[0] < MIN_ROWS_PER_PARAM * n_params:
    raise ValueError(
      f"Log has {phi.shape[0]} transitions; at least {MIN_ROWS_PER_PARAM * n_params} "
      f"are needed for {n_params} parameters"
    )
  _check_rank(phi, names)
  theta, *_ = np.linalg.lstsq(phi, target, rcond=None)
  A, B, Bf = _split(theta, n, m)

  A, projected = project_stable(A, cfg.max_spectral_radius)
  if projected:
    coef = _refit_inputs(reg, A)
    B, Bf = coef[:m].T, (coef[m:].T if Bf is not None else None)
  error = rollout_error(reg, A, B, Bf, cfg.horizon)

  if cfg.refine or (cfg.refine_rejected and not error <= cfg.rollout_gate):
    A_r, B_r, Bf_r = _refine(reg, A, B, Bf, cfg)
    refined = rollout_error(reg, A_r, B_r, Bf_r, cfg.horizon)
    if refined < error:
      logger.debug(f"Rollout refinement lowered error {error:.4f} -> {refined:.4f}")
      A, B, Bf, error = A_r, B_r, Bf_r, refined
  return A, B, Bf, error, projected


def fit_arrays(
  states: np.ndarray,
  inputs: np.ndarray,
  x_ss: Sequence[float],
  u_ss: Sequence[float],
  disturbances: Optional[np.ndarray] = None,
  d_ss: Optional[Sequence[float]] = None,
  names: Optional[Sequence[str]] = None,
  cfg: IdentConfig = IdentConfig(),
) -> LocalModel:
  """Fit a local model to raw series around the equilibrium (x_ss, u_ss[, d_ss]).

  Scales are the per-channel standard deviations over the series.
  """
  states = np.asarray(states, dtype=float)
  inputs = np.asarray(inputs, dtype=float).reshape(states.shape[0] - 1, -1)
  n, m = states.shape[1], inputs.shape[1]
  if disturbances is not None:
    disturbances = np.asarray(disturbances, dtype=float).reshape(states.shape[0] - 1, -1)
  nd = 0 if disturbances is None else disturbances.shape[1]
  if names is None:
    names = (
      [f"x{i}" for i in range(n)] + [f"u{i}" for i in range(m)] + [f"d{i}" for i in range(nd)]
    )
  sigma_x = _scales(states, names[:n])
  sigma_u = _scales(inputs, names[n : n + m])
  x_ss = np.asarray(x_ss, dtype=float)
  u_ss = np.asarray(u_ss, dtype=float)
  reg = Regression(
    states=(states - x_ss) / sigma_x,
    inputs=(inputs - u_ss) / sigma_u,
    disturbances=None,
  )
  sigma_d = None
  if disturbances is not None:
    sigma_d = _scales(disturbances, names[n + m :])
    d_ss = np.zeros(nd) if d_ss is None else np.asarray(d_ss, dtype=float)
    reg.disturbances = (disturbances - d_ss) / sigma_d

  A, B, Bf, error, projected = fit_regression(reg, names, cfg)
  flagged = not error <= cfg.rollout_gate
  if flagged:
    message = (
      f"Local fit rollout error {error:.3f} over {cfg.horizon} steps exceeds "
      f"the gate {cfg.rollout_gate}"
    )
    if cfg.strict:
      raise ModelQualityError(message)
    logger.warning(message)
  return LocalModel(
    A=A, B=B, x_ss=x_ss, u_ss=u_ss, sigma_x=sigma_x, sigma_u=sigma_u,
    Bf=Bf, d_ss=d_ss if Bf is not None else None, sigma_d=sigma_d,
    rollout_error=error, flagged=flagged, projected=projected,
  )


def log_series(
  log: ExperimentLog, kind: ModelKind
) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray], np.ndarray, np.ndarray, Optional[np.ndarray]]:
  """Raw (states, inputs, disturbances) and their equilibrium values for one model.

  The emissions input over step k is the airpath reached at its end together
  with the fuel rate held during it.
  """
  eq = log.equilibrium()
  pim, chi, fuel = log.column("pim"), log.column("chi_egr"), log.column("winj")
  if kind == "airpath":
    states = np.column_stack([pim, chi])
    inputs = np.column_stack([log.column("egr_cmd"), log.column("vgt_cmd")])[:-1]
    disturbances = fuel[:-1, None]
    x_ss = np.array([eq["pim"], eq["chi_egr"]])
    u_ss = log.v_ss.as_array()
    d_ss = np.array([log.node.fuel_rate])
    return states, inputs, disturbances, x_ss, u_ss, d_ss
  states = np.column_stack([log.column("nox"), log.column("soot")])
  inputs = np.column_stack([pim[1:], chi[1:], fuel[:-1]])
  x_ss = np.array([eq["nox"], eq["soot"]])
  u_ss = np.array([eq["pim"], eq["chi_egr"], log.node.fuel_rate])
  return states, inputs, None, x_ss, u_ss, None


def fit_local(
  log: ExperimentLog, kind: ModelKind, cfg: IdentConfig = IdentConfig()
) -> LocalModel:
  """Fit the emissions or airpath local model of one node experiment."""
  states, inputs, disturbances, x_ss, u_ss, d_ss = log_series(log, kind)
  names = STATE_NAMES[kind] + INPUT_NAMES[kind] + DISTURBANCE_NAMES[kind]
  local = fit_arrays(states, inputs, x_ss, u_ss, disturbances, d_ss, names, cfg)
  logger.debug(
    f"Fitted {kind} model at {log.node.as_tuple()}: radius {local.spectral_radius:.3f}, "
    f"rollout error {local.rollout_error:.3f}"
  )
  return local
