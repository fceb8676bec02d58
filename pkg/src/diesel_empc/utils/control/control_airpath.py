"""Airpath tracking MPC: feedforward on the nominal model plus rate-based feedback.

The feedforward (FF) runs a copy of the airpath model driven only by its own
commands and returns the first input of a tracking QP solved from that model
state. The feedback (FB) works on measurements with the extended state
(dz, e, z_prev, v_prev). Its previous-input state is shifted by the FF
increment, which enters the first prediction step as a known disturbance
together with the fuel-rate increment. The applied command is
clamp(v_prev + dv_0) and the correction is that command minus the FF value.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ...inputs import ActuatorInput, AirpathMpcConfig, AirpathState, OperatingPoint
from ..lpv.lpv_model import LocalModel, LpvGridModel, interpolate, normalize
from ..mpc.mpc_condense import Constraint, CostTerm, condense
from ..mpc.mpc_qp import dump_problem, solve_qp
from ..mpc.mpc_rate import Horizon, nominal_model, tracking_matrices, tracking_state

logger = logging.getLogger(__name__)


@dataclass
class FeedforwardState:
  """Nominal-model airpath state and last FF command, physical units."""

  z: np.ndarray
  v: np.ndarray

  @classmethod
  def at(cls, z: AirpathState, v: ActuatorInput) -> "FeedforwardState":
    return cls(z.as_array(), v.as_array())


@dataclass
class FeedbackState:
  """Previous measurement, applied command and fuel rate, physical units."""

  z_prev: np.ndarray
  v_prev: np.ndarray
  fuel_prev: float


def _dump(problem, dump_dir: Optional[Path], name: str, rho: OperatingPoint, status: str):
  if dump_dir is None:
    return
  dump_problem(
    problem,
    Path(dump_dir) / f"{name}_{rho.engine_speed:.0f}_{rho.fuel_rate:.1f}.json",
    {"controller": name, "status": status},
  )


def _clamp(v: np.ndarray, cfg: AirpathMpcConfig) -> np.ndarray:
  return np.clip(v, cfg.v_min, cfg.v_max)


def airpath_ff_step(
  r_adj: AirpathState,
  rho: OperatingPoint,
  model: LpvGridModel,
  cfg: AirpathMpcConfig,
  state: FeedforwardState,
  dump_dir: Optional[Path] = None,
) -> ActuatorInput:
  """First FF input; advances `state` by one step of the nominal model.

  The QP is posed in the local model's normalized deviation coordinates with
  absolute inputs. On QP failure the previous FF command is held.
  """
  local = interpolate(model, rho)
  nominal = nominal_model(local)
  N = cfg.horizon
  z0 = normalize(state.z, local, "state")
  r = normalize(r_adj.as_array(), local, "state")
  d = normalize([rho.fuel_rate], local, "disturbance")
  C = nominal.current_state()
  stage = list(range(1, N + 1))
  Q = np.diag(cfg.ff_q)
  terms = [
    CostTerm("quadratic", "state", Q, stage, C, r),
    CostTerm("quadratic", "state", cfg.ff_terminal_weight * Q, [N], C, r),
    CostTerm("quadratic", "move", np.diag(cfg.ff_r), range(N)),
  ]
  v_lo = normalize(cfg.v_min, local, "input")
  v_hi = normalize(cfg.v_max, local, "input")
  constraints = [Constraint("move", np.eye(nominal.n_u), range(N), v_lo, v_hi)]
  cq = condense(
    nominal, Horizon(N), z0, terms, constraints, disturbance=np.tile(d, (N, 1))
  )
  start = np.tile(np.clip(normalize(state.v, local, "input"), v_lo, v_hi), (N, 1))
  sol = solve_qp(cq.problem, w0=cq.feasible_start(start))
  if sol.ok:
    v = _clamp(local.u_ss + cq.moves(sol.w)[0] * local.sigma_u, cfg)
  else:
    logger.warning(f"Airpath FF QP failed ({sol.status}); holding previous command")
    _dump(cq.problem, dump_dir, "airpath_ff", rho, sol.status)
    v = state.v.copy()
  state.z = local.step(state.z, v, [rho.fuel_rate])
  state.v = v
  return ActuatorInput.from_array(v)


def _known_increment(
  local: LocalModel, dv_ff: np.ndarray, dw: float
) -> np.ndarray:
  """B dv_ff + Bf dw in scaled state units."""
  inc = local.B @ (dv_ff / local.sigma_u)
  if local.Bf is not None:
    inc = inc + local.Bf @ (np.atleast_1d(dw) / local.sigma_d)
  return inc


def airpath_fb_step(
  z_meas: AirpathState,
  r_adj: AirpathState,
  rho: OperatingPoint,
  v_ff: ActuatorInput,
  dv_ff: np.ndarray,
  state: FeedbackState,
  model: LpvGridModel,
  cfg: AirpathMpcConfig,
  dump_dir: Optional[Path] = None,
) -> np.ndarray:
  """FB correction to add to `v_ff`; updates `state` with the applied command.

  On QP failure the correction is zero.
  """
  local = interpolate(model, rho)
  sz, sv = local.sigma_x, local.sigma_u
  z = z_meas.as_array()
  if not np.all(np.isfinite(z)):
    raise ValueError("Airpath measurement must be finite")
  N = cfg.horizon
  rate = tracking_matrices(local.A, local.B, np.eye(local.n_x))
  v_shifted = state.v_prev + np.asarray(dv_ff, dtype=float)
  xi0 = tracking_state(z / sz, state.z_prev / sz, r_adj.as_array() / sz, v_shifted / sv)
  disturbance = np.zeros((N, local.n_x))
  disturbance[0] = _known_increment(local, np.asarray(dv_ff, dtype=float), rho.fuel_rate - state.fuel_prev)

  e_rows = rate.selector("e")
  z_rows = rate.current_state()
  v_rows = rate.selector("v_prev")
  stage = list(range(1, N + 1))
  Q = np.diag(cfg.q_e)
  terms = [
    CostTerm("quadratic", "state", Q, stage, e_rows),
    CostTerm("quadratic", "state", cfg.terminal_weight * Q, [N], e_rows),
    CostTerm("quadratic", "move", np.diag(cfg.r_dv), range(N)),
    CostTerm("quadratic", "slack", [[cfg.slack_weight]], [0]),
  ]
  constraints = [
    Constraint(
      "state", z_rows, stage, np.array(cfg.z_min) / sz, np.array(cfg.z_max) / sz, slack=[0]
    ),
    Constraint("state", v_rows, stage, np.array(cfg.v_min) / sv, np.array(cfg.v_max) / sv),
  ]
  cq = condense(rate, Horizon(N), xi0, terms, constraints, n_slack=1, disturbance=disturbance)
  v_now = v_rows @ xi0
  start = np.zeros((N, local.n_u))
  start[0] = np.clip(v_now, np.array(cfg.v_min) / sv, np.array(cfg.v_max) / sv) - v_now
  sol = solve_qp(cq.problem, w0=cq.feasible_start(start))
  v_ff_arr = v_ff.as_array()
  if sol.ok:
    total = _clamp(v_shifted + cq.moves(sol.w)[0] * sv, cfg)
  else:
    logger.warning(f"Airpath FB QP failed ({sol.status}); applying zero correction")
    _dump(cq.problem, dump_dir, "airpath_fb", rho, sol.status)
    total = _clamp(v_ff_arr, cfg)
  state.z_prev = z
  state.v_prev = total
  state.fuel_prev = rho.fuel_rate
  return total - v_ff_arr
