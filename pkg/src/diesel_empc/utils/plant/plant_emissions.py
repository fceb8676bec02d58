"""Ground-truth feedgas emission maps of the reference plant.

Static NOx falls with EGR dilution and rises with load, speed and boost; static
Soot rises with load and EGR and grows sharply as the fresh air-to-fuel ratio
drops. Both are filtered through first-order lags with time constants
`tau_nox` and `tau_soot`.
"""

import logging
import math
from typing import Optional, Tuple

from ...inputs import DT, ActuatorInput, EmissionState, OperatingPoint, PlantParams
from .plant_state import PlantState

logger = logging.getLogger(__name__)

REFERENCE_PLANT = PlantParams()


def air_fuel_ratio(
  intake_pressure: float, chi_egr: float, engine_speed: float, fuel_rate: float,
  params: PlantParams = REFERENCE_PLANT,
) -> float:
  """Fresh air to fuel mass ratio; infinite without fuel."""
  w_fuel = params.k_fuel * engine_speed * fuel_rate
  if w_fuel <= 0:
    return math.inf
  w_cyl = params.k_cyl * engine_speed * intake_pressure
  return w_cyl * (1.0 - chi_egr) / w_fuel


def static_emissions(
  intake_pressure: float, chi_egr: float, engine_speed: float, fuel_rate: float,
  params: PlantParams = REFERENCE_PLANT,
) -> Tuple[float, float]:
  """Instantaneous (NOx ppm, Soot %) before the measurement lags."""
  load = fuel_rate / params.max_fuel
  nox = params.nox_floor + params.nox_gain * load * (
    (engine_speed / params.ref_speed) ** params.nox_speed_exp
    * math.exp(-params.nox_egr_sens * chi_egr)
    * (intake_pressure / params.ref_pressure) ** params.nox_boost_exp
  )
  afr = air_fuel_ratio(intake_pressure, chi_egr, engine_speed, fuel_rate, params)
  smoke = 0.0 if math.isinf(afr) else math.exp(-afr / params.soot_afr_scale)
  soot = params.soot_floor + params.soot_gain * load * (
    (1.0 + params.soot_egr_sens * chi_egr) * smoke
  )
  return nox, soot


def lag_update(
  previous: float, target: float, tau: float, dt: float
) -> float:
  """Exact discretization of a first-order lag over one interval."""
  a = math.exp(-dt / tau)
  return target + (previous - target) * a


def emission_truth(
  state: PlantState,
  v: ActuatorInput,
  rho: OperatingPoint,
  dt: Optional[float] = DT,
  params: PlantParams = REFERENCE_PLANT,
) -> EmissionState:
  """True feedgas emissions for a plant state.

  With `dt` the lag states held in `state` are advanced one interval towards
  the static maps; with `dt=None` the static map values are returned.
  """
  nox_ss, soot_ss = static_emissions(
    state.intake_pressure, state.egr_rate, rho.engine_speed, rho.fuel_rate, params
  )
  if dt is None:
    return EmissionState(nox=nox_ss, soot=soot_ss)
  if dt <= 0:
    raise ValueError("dt must be > 0")
  nox = lag_update(state.nox, nox_ss, params.tau_nox, dt)
  soot = lag_update(state.soot, soot_ss, params.tau_soot, dt)
  return EmissionState(nox=max(nox, 0.0), soot=max(soot, 0.0))
