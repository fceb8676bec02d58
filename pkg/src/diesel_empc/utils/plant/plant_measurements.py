"""Synthetic measured-variable proxies for the emissions network inputs.

The proxies mimic the dynamometer channels by name and rough magnitude only;
they are smooth functions of the plant state and are not physically calibrated.
"""

import logging
import math
from typing import Dict, Optional

import numpy as np

from ...inputs import ActuatorInput, OperatingPoint, PlantParams
from .plant_emissions import REFERENCE_PLANT, air_fuel_ratio
from .plant_state import PlantState

logger = logging.getLogger(__name__)

CANDIDATE_CHANNELS = (
  "injection_pressure",
  "main_injection_timing",
  "main_fuel_rate",
  "pilot_fuel_rate",
  "engine_torque",
  "engine_speed",
  "intake_pressure",
  "exhaust_pressure",
  "mass_air_flow",
  "egr_position",
  "vgt_position",
)

# Retained network inputs, in network input order.
MEASUREMENT_CHANNELS = tuple(c for c in CANDIDATE_CHANNELS if c != "pilot_fuel_rate")

CHANNEL_UNITS = {
  "injection_pressure": "MPa",
  "main_injection_timing": "deg BTDC",
  "main_fuel_rate": "mm^3/st",
  "pilot_fuel_rate": "mm^3/st",
  "engine_torque": "Nm",
  "engine_speed": "rpm",
  "intake_pressure": "kPa",
  "exhaust_pressure": "kPa",
  "mass_air_flow": "g/s",
  "egr_position": "%",
  "vgt_position": "%",
}


def candidate_measurements(
  state: PlantState,
  v: ActuatorInput,
  rho: OperatingPoint,
  pilot_dither: float = 0.0,
  params: PlantParams = REFERENCE_PLANT,
) -> Dict[str, float]:
  """All eleven candidate channels, including the pre-injection quantity.

  `pilot_dither` perturbs the pre-injection quantity (transient logs only); the
  main injection absorbs the difference so the total fuel stays `rho.fuel_rate`.
  """
  speed = rho.engine_speed
  fuel = rho.fuel_rate
  pilot = min(max(params.pilot_fuel + pilot_dither, 0.0), fuel) if fuel > 0 else 0.0
  speed_frac = speed / params.max_rpm
  load = fuel / params.max_fuel

  rail = 40.0 + 90.0 * speed_frac**1.5 + 60.0 * load * (1.0 - 0.3 * load)
  timing = 2.0 + 10.0 * math.sqrt(speed_frac) - 4.0 * load**2
  afr = air_fuel_ratio(state.intake_pressure, state.egr_rate, speed, fuel, params)
  efficiency = 1.0 if math.isinf(afr) else 1.0 - math.exp(-afr / 12.0)
  pumping = 0.8 * (state.exhaust_pressure - state.intake_pressure)
  torque = 16.0 * fuel * efficiency - (20.0 + 0.01 * speed) - pumping

  return {
    "injection_pressure": rail,
    "main_injection_timing": timing,
    "main_fuel_rate": fuel - pilot,
    "pilot_fuel_rate": pilot,
    "engine_torque": torque,
    "engine_speed": speed,
    "intake_pressure": state.intake_pressure,
    "exhaust_pressure": state.exhaust_pressure,
    "mass_air_flow": state.compressor_flow,
    "egr_position": v.egr_valve,
    "vgt_position": v.vgt_position,
  }


def measurement_vector(
  state: PlantState,
  v: ActuatorInput,
  rho: OperatingPoint,
  params: Optional[PlantParams] = None,
) -> np.ndarray:
  """The ten network input channels in `MEASUREMENT_CHANNELS` order."""
  values = candidate_measurements(state, v, rho, params=params or REFERENCE_PLANT)
  return np.array([values[name] for name in MEASUREMENT_CHANNELS])
