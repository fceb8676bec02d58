"""Synthetic mean-value airpath model of a turbocharged EGR diesel engine.

Three dynamic states (intake manifold pressure, exhaust manifold pressure,
normalized turbo speed) are integrated with fixed-step RK4 sub-steps. Flows
through the compressor, EGR valve and turbine are smooth (softplus) functions of
the pressure differences so that the model is continuous in every input.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.optimize import root

from ...errors import NonFiniteStateError, SettleError
from ...inputs import DT, ActuatorInput, OperatingPoint, PlantParams
from .plant_emissions import REFERENCE_PLANT, emission_truth, static_emissions
from .plant_state import PlantState, egr_rate

logger = logging.getLogger(__name__)


def softplus(x: float, width: float) -> float:
  """Smooth max(x, 0) with transition width `width`."""
  if x > 0:
    return x + width * math.log1p(math.exp(-x / width))
  return width * math.log1p(math.exp(x / width))


@dataclass(frozen=True)
class AirpathFlows:
  w_cyl: float  # cylinder charge
  w_fuel: float
  w_c: float  # compressor
  w_egr: float
  w_t: float  # turbine
  p_boost: float  # compressor delivery pressure


def airpath_flows(
  p_im: float, p_ex: float, n_t: float, egr_valve: float, vgt_position: float,
  engine_speed: float, fuel_rate: float, params: PlantParams,
) -> AirpathFlows:
  width = params.flow_smoothing
  w_cyl = params.k_cyl * engine_speed * p_im
  w_fuel = params.k_fuel * engine_speed * fuel_rate
  p_boost = params.p_amb * (1.0 + params.k_boost * n_t * n_t)
  w_c = params.k_comp * softplus(p_boost - p_im, width)
  w_egr = params.k_egr * (egr_valve / 100.0) * softplus(p_ex - p_im, width)
  area = 1.0 - params.vgt_area_span * vgt_position / 100.0
  w_t = params.k_turb * area * softplus(p_ex - params.p_amb, width)
  return AirpathFlows(w_cyl, w_fuel, w_c, w_egr, w_t, p_boost)


def _derivatives(
  x: Tuple[float, float, float], egr_valve: float, vgt_position: float,
  engine_speed: float, fuel_rate: float, params: PlantParams,
) -> Tuple[float, float, float]:
  p_im, p_ex, n_t = x
  f = airpath_flows(p_im, p_ex, n_t, egr_valve, vgt_position, engine_speed, fuel_rate, params)
  dp_im = params.c_im * (f.w_c + f.w_egr - f.w_cyl)
  dp_ex = params.c_ex * (f.w_cyl + f.w_fuel - f.w_egr - f.w_t)
  # exhaust enthalpy grows with the fuel/charge ratio
  phi = f.w_fuel / f.w_cyl if f.w_cyl > 0 else 0.0
  expansion = softplus(p_ex - params.p_amb, params.flow_smoothing) / p_ex
  p_turb = params.k_turb_power * f.w_t * (1.0 + params.k_exh_temp * phi) * expansion
  p_comp = params.k_comp_power * f.w_c * params.k_boost * n_t * n_t
  dn_t = (p_turb - p_comp - params.k_friction * n_t) / params.turbo_inertia
  return dp_im, dp_ex, dn_t


def _rk4(
  x: Tuple[float, float, float], h: float, args: tuple
) -> Tuple[float, float, float]:
  k1 = _derivatives(x, *args)
  x2 = tuple(xi + 0.5 * h * ki for xi, ki in zip(x, k1))
  k2 = _derivatives(x2, *args)
  x3 = tuple(xi + 0.5 * h * ki for xi, ki in zip(x, k2))
  k3 = _derivatives(x3, *args)
  x4 = tuple(xi + h * ki for xi, ki in zip(x, k3))
  k4 = _derivatives(x4, *args)
  return tuple(
    xi + h / 6.0 * (a + 2.0 * b + 2.0 * c + d)
    for xi, a, b, c, d in zip(x, k1, k2, k3, k4)
  )


def _assemble(
  x: Tuple[float, float, float], v: ActuatorInput, rho: OperatingPoint,
  params: PlantParams, nox: float, soot: float,
) -> PlantState:
  p_im, p_ex, n_t = x
  f = airpath_flows(
    p_im, p_ex, n_t, v.egr_valve, v.vgt_position, rho.engine_speed, rho.fuel_rate, params
  )
  return PlantState(
    intake_pressure=p_im,
    exhaust_pressure=p_ex,
    turbo_speed=n_t,
    compressor_flow=f.w_c,
    egr_flow=f.w_egr,
    nox=nox,
    soot=soot,
  )


def plant_step(
  state: PlantState,
  v: ActuatorInput,
  rho: OperatingPoint,
  dt: float = DT,
  params: PlantParams = REFERENCE_PLANT,
) -> PlantState:
  """Advance the plant by `dt` seconds under constant actuator and operating inputs."""
  if not dt > 0:
    raise ValueError("dt must be > 0")
  args = (v.egr_valve, v.vgt_position, rho.engine_speed, rho.fuel_rate, params)
  x = (state.intake_pressure, state.exhaust_pressure, state.turbo_speed)
  h = dt / params.substeps
  try:
    for _ in range(params.substeps):
      x = _rk4(x, h, args)
  except (OverflowError, ZeroDivisionError) as e:
    raise NonFiniteStateError(f"Plant integration failed: {e}") from e
  if not all(math.isfinite(xi) for xi in x) or x[0] <= 0 or x[1] <= 0:
    raise NonFiniteStateError(f"Plant airpath state left the physical domain: {x}")
  x = (x[0], x[1], max(x[2], 0.0))

  airpath_only = _assemble(x, v, rho, params, state.nox, state.soot)
  emissions = emission_truth(airpath_only, v, rho, dt=dt, params=params)
  return airpath_only.with_emissions(emissions.nox, emissions.soot)


def plant_equilibrium(
  v: ActuatorInput,
  rho: OperatingPoint,
  params: PlantParams = REFERENCE_PLANT,
  tol: float = 1e-9,
) -> PlantState:
  """Steady state of the plant for constant (v, rho).

  A short settle run from a generic initial condition is polished with a
  Powell hybrid root solve on the airpath derivatives.
  """
  args = (v.egr_valve, v.vgt_position, rho.engine_speed, rho.fuel_rate, params)
  x = (params.p_amb + 20.0, params.p_amb + 60.0, 0.4)
  h = DT / params.substeps
  for _ in range(200 * params.substeps):
    x = _rk4(x, h, args)
    x = (x[0], x[1], max(x[2], 0.0))

  sol = root(lambda z: np.array(_derivatives(tuple(z), *args)), np.array(x),
             method="hybr", options={"xtol": 1e-14})
  residual = float(np.max(np.abs(sol.fun)))
  if not sol.success and residual > tol:
    raise SettleError(
      f"Plant failed to settle at v={v.as_array().tolist()}, rho={rho.as_tuple()}: "
      f"residual {residual:.3e} ({sol.message})"
    )
  if residual > tol or sol.x[0] <= 0 or sol.x[1] <= 0 or sol.x[2] < 0:
    raise SettleError(
      f"Equilibrium residual {residual:.3e} exceeds tolerance at rho={rho.as_tuple()}"
    )
  x = (float(sol.x[0]), float(sol.x[1]), float(sol.x[2]))
  airpath_only = _assemble(x, v, rho, params, 0.0, 0.0)
  nox, soot = static_emissions(
    x[0], airpath_only.egr_rate, rho.engine_speed, rho.fuel_rate, params
  )
  logger.debug(
    f"Equilibrium at rho={rho.as_tuple()}: p_im={x[0]:.2f} kPa, "
    f"chi={airpath_only.egr_rate:.3f}, nox={nox:.1f}, soot={soot:.3f}"
  )
  return airpath_only.with_emissions(nox, soot)


def settle(
  state: PlantState,
  v: ActuatorInput,
  rho: OperatingPoint,
  params: PlantParams = REFERENCE_PLANT,
  tol: float = 1e-8,
  max_steps: int = 20000,
) -> Tuple[PlantState, int]:
  """Step the plant until successive states differ by less than `tol`."""
  for k in range(1, max_steps + 1):
    new_state = plant_step(state, v, rho, DT, params)
    if new_state.distance(state) < tol:
      return new_state, k
    state = new_state
  raise SettleError(f"Plant did not settle within {max_steps} steps at rho={rho.as_tuple()}")


__all__ = [
  "AirpathFlows",
  "airpath_flows",
  "egr_rate",
  "plant_equilibrium",
  "plant_step",
  "settle",
  "softplus",
]
