"""Supervisory economic MPC.

Inputs of the emissions model are the airpath targets and the fuel rate,
u = (p_im, chi_egr, w_inj). Each solve trades target tracking, fuel-rate
reduction and NOx against each other on the rate-based emissions model, frozen
at the current operating point, and returns adjusted targets for the airpath
loop and the fuel command for the engine.

All signals are scaled by the local model's sigma before condensing, so every
weight acts on normalized quantities.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ...inputs import EmissionState, EmpcWeights, OperatingPoint, Scenario
from ..lpv.lpv_maps import TargetMaps, Targets
from ..lpv.lpv_model import LpvGridModel, interpolate
from ..mpc.mpc_condense import Constraint, CostTerm, condense
from ..mpc.mpc_qp import dump_problem, solve_qp
from ..mpc.mpc_rate import Horizon, make_rate_model, rate_state

logger = logging.getLogger(__name__)

P, CHI, W = 0, 1, 2
NOX, SOOT = 0, 1


@dataclass(frozen=True)
class AdjustedTargets:
  p_im_adj: float
  chi_egr_adj: float
  w_inj_adj: float

  def as_array(self) -> np.ndarray:
    return np.array([self.p_im_adj, self.chi_egr_adj, self.w_inj_adj])


@dataclass(frozen=True)
class EmpcResult:
  """First and second planned targets plus solve diagnostics."""

  first: AdjustedTargets
  second: AdjustedTargets
  lookup: Targets
  status: str
  nox_pred: float = float("nan")
  soot_pred: float = float("nan")
  slack: float = 0.0


def lookup_targets(lookup: Targets, w_trg: float) -> AdjustedTargets:
  return AdjustedTargets(
    lookup.airpath.intake_pressure, lookup.airpath.egr_rate, w_trg
  )


def _clip(u: np.ndarray, w_trg: float, w: EmpcWeights) -> AdjustedTargets:
  return AdjustedTargets(
    p_im_adj=float(max(u[P], 1.0)),
    chi_egr_adj=float(np.clip(u[CHI], 0.0, 1.0)),
    w_inj_adj=float(np.clip(u[W], w.fuel_lower_ratio * w_trg, w_trg)),
  )


def empc_step(
  x: EmissionState,
  rho: OperatingPoint,
  prev_u: np.ndarray,
  maps: TargetMaps,
  model: LpvGridModel,
  w: EmpcWeights,
  scen: Scenario,
  x_prev: Optional[EmissionState] = None,
  dump_dir: Optional[Path] = None,
) -> EmpcResult:
  """Adjusted targets for the current step.

  `rho` carries the demanded fuel rate w_trg. `prev_u` is the emissions-model
  input applied at the previous step (measured airpath and applied fuel), and
  `x_prev` the previous emission measurement (defaults to `x`, i.e. no trend).
  """
  lookup = maps.lookup(rho)
  w_trg = rho.fuel_rate
  fallback = lookup_targets(lookup, w_trg)
  if not scen.empc_enabled:
    return EmpcResult(fallback, fallback, lookup, "baseline")

  local = interpolate(model, rho)
  sx, su = local.sigma_x, local.sigma_u
  N = w.horizon
  rate = make_rate_model(local)
  x_now = x.as_array()
  x_last = x_now if x_prev is None else x_prev.as_array()
  xi0 = rate_state(x_now / sx, x_last / sx, np.asarray(prev_u, dtype=float) / su)

  u_trg = np.array([lookup.airpath.intake_pressure, lookup.airpath.egr_rate, w_trg]) / su
  u_rows = rate.selector("u_prev")
  x_rows = rate.selector("x_prev") + rate.selector("dx")
  stage = list(range(1, N + 1))
  tracking = np.diag([w.alpha, w.beta])
  eta = 0.0 if scen.nox_penalty == "none" else w.eta
  soot_on = scen.soot_limit_enabled and w.soot_max is not None

  # stage j acts on (x_{j+1}, u_j, du_j, eps_j); the terminal copy repeats the
  # state-dependent part at the last predicted step with du = 0
  terms = [
    CostTerm("quadratic", "state", tracking, stage + [N], u_rows[[P, CHI]], u_trg[[P, CHI]]),
    CostTerm("linear", "state", [w.gamma], stage + [N], -u_rows[[W]], [-u_trg[W]]),
    CostTerm("linear", "state", [eta], stage + [N], x_rows[[NOX]]),
    CostTerm("quadratic", "move", w.R, range(N)),
  ]
  chi_lo = max(w.chi_bounds[0], lookup.airpath.egr_rate - w.max_target_deviation[1])
  chi_hi = min(w.chi_bounds[1], lookup.airpath.egr_rate + w.max_target_deviation[1])
  chi_lo = min(chi_lo, chi_hi)
  p_dev = w.max_target_deviation[0]
  lower = np.array([lookup.airpath.intake_pressure - p_dev, chi_lo, w.fuel_lower_ratio * w_trg])
  upper = np.array([lookup.airpath.intake_pressure + p_dev, chi_hi, w_trg])
  constraints = [Constraint("state", u_rows, stage, lower / su, upper / su)]
  n_slack = 0
  if soot_on:
    n_slack = N
    terms.append(CostTerm("linear", "slack", [w.zeta], range(N)))
    constraints.append(
      Constraint("state", x_rows[[SOOT]], stage, upper=w.soot_max / sx[SOOT], slack=range(N))
    )

  cq = condense(rate, Horizon(N), xi0, terms, constraints, n_slack)
  u_prev = u_rows @ xi0
  moves = np.zeros((N, rate.n_u))
  moves[0] = np.clip(u_prev, lower / su, upper / su) - u_prev
  sol = solve_qp(cq.problem, w0=cq.feasible_start(moves))
  if not sol.ok:
    logger.warning(
      f"EMPC QP failed ({sol.status}) at rho={rho.as_tuple()}; using look-up targets"
    )
    if dump_dir is not None:
      dump_problem(
        cq.problem,
        Path(dump_dir) / f"empc_{rho.engine_speed:.0f}_{rho.fuel_rate:.1f}.json",
        {"controller": "empc", "scenario": scen.name, "status": sol.status},
      )
    return EmpcResult(fallback, fallback, lookup, sol.status)

  traj = cq.trajectory(sol.w)
  u0 = (u_rows @ traj[1]) * su
  u1 = (u_rows @ traj[min(2, N)]) * su
  nox_pred = float((x_rows[NOX] @ traj[1]) * sx[NOX])
  soot_pred = float((x_rows[SOOT] @ traj[1]) * sx[SOOT])
  slack = float(cq.slacks(sol.w).max(initial=0.0) * sx[SOOT])
  logger.debug(
    f"EMPC u0={np.round(u0, 4).tolist()} nox_pred={nox_pred:.1f} slack={slack:.3g}"
  )
  return EmpcResult(
    _clip(u0, w_trg, w), _clip(u1, w_trg, w), lookup, "optimal",
    nox_pred=nox_pred, soot_pred=soot_pred, slack=slack,
  )
