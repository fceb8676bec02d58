"""Synthetic test-cell logs produced by driving the reference plant.

Steady-state samples are settled equilibria at random operating points and
actuator positions. The transient log follows smooth random speed/fuel
profiles while the EGR valve and VGT hold random positions for random dwell
times. Sensor channels carry Gaussian noise proportional to the reading.
"""

import logging
from typing import Dict, List, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator

from ...errors import SettleError
from ...inputs import DT, ActuatorInput, DataGenConfig, OperatingPoint, PlantParams
from ..plant.plant_emissions import REFERENCE_PLANT
from ..plant.plant_measurements import CANDIDATE_CHANNELS, candidate_measurements
from ..plant.plant_model import plant_equilibrium, plant_step
from .data_dataset import SampleSet

logger = logging.getLogger(__name__)

SENSOR_CHANNELS = (
  "injection_pressure",
  "engine_torque",
  "intake_pressure",
  "exhaust_pressure",
  "mass_air_flow",
)

_MAX_REDRAWS = 20


def _noisy(values: Dict[str, float], rng: np.random.Generator, noise_pct: float) -> List[float]:
  row = []
  for name in CANDIDATE_CHANNELS:
    value = values[name]
    if name in SENSOR_CHANNELS and noise_pct > 0:
      value += abs(value) * noise_pct / 100.0 * rng.standard_normal()
    row.append(value)
  return row


def generate_steady(
  cfg: DataGenConfig = DataGenConfig(), params: PlantParams = REFERENCE_PLANT
) -> SampleSet:
  """`cfg.n_steady` settled equilibria at uniformly drawn (rho, v)."""
  rng = np.random.default_rng(cfg.seed)
  inputs, targets = [], []
  for i in range(cfg.n_steady):
    for attempt in range(_MAX_REDRAWS):
      rho = OperatingPoint(
        engine_speed=float(rng.uniform(*cfg.speed_range)),
        fuel_rate=float(rng.uniform(*cfg.fuel_range)),
      )
      v = ActuatorInput(
        egr_valve=float(rng.uniform(*cfg.actuator_range)),
        vgt_position=float(rng.uniform(*cfg.actuator_range)),
      )
      try:
        state = plant_equilibrium(v, rho, params)
        break
      except SettleError as e:
        logger.warning(f"Steady point {i} redrawn (attempt {attempt + 1}): {e}")
    else:
      raise SettleError(f"No settled equilibrium found for steady point {i}")
    values = candidate_measurements(state, v, rho, params=params)
    inputs.append(_noisy(values, rng, cfg.noise_pct))
    targets.append([state.nox, state.soot])
  logger.info(f"Generated {cfg.n_steady} steady-state samples")
  return SampleSet(
    CANDIDATE_CHANNELS,
    np.array(inputs).reshape(-1, len(CANDIDATE_CHANNELS)),
    np.array(targets).reshape(-1, 2),
    ["steady_state"] * cfg.n_steady,
  )


def _random_hold(
  rng: np.random.Generator, n: int, dt: float, cfg: DataGenConfig
) -> np.ndarray:
  """Piecewise-constant sequence with random levels and dwell times."""
  out = np.empty(n)
  k = 0
  while k < n:
    dwell = max(1, int(round(rng.uniform(*cfg.hold_range) / dt)))
    out[k : k + dwell] = rng.uniform(*cfg.actuator_range)
    k += dwell
  return out


def excitation_profile(
  cfg: DataGenConfig = DataGenConfig(), dt: float = DT
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
  """Seeded (speed, fuel, egr, vgt, pilot dither) sequences of length n_transient."""
  rng = np.random.default_rng(cfg.seed + 1)
  n = cfg.n_transient
  t = np.arange(n) * dt
  n_knots = max(2, int(np.ceil(n * dt / cfg.knot_spacing)) + 1)
  knots = np.arange(n_knots) * cfg.knot_spacing
  speed = PchipInterpolator(knots, rng.uniform(*cfg.speed_range, size=n_knots))(t)
  fuel = PchipInterpolator(knots, rng.uniform(*cfg.fuel_range, size=n_knots))(t)
  # round-off guard; pchip stays within its knots
  speed = np.clip(speed, *cfg.speed_range)
  fuel = np.clip(fuel, *cfg.fuel_range)
  egr = _random_hold(rng, n, dt, cfg)
  vgt = _random_hold(rng, n, dt, cfg)
  dither = rng.uniform(-cfg.pilot_dither, cfg.pilot_dither, size=n)
  return speed, fuel, egr, vgt, dither


def generate_transient(
  cfg: DataGenConfig = DataGenConfig(),
  params: PlantParams = REFERENCE_PLANT,
  dt: float = DT,
) -> SampleSet:
  """`cfg.n_transient` consecutive samples of one excitation run.

  The run starts from the equilibrium at the first profile point; sample k is
  logged after plant step k, at t = (k + 1) * dt.
  """
  n = cfg.n_transient
  if n == 0:
    return SampleSet.empty(CANDIDATE_CHANNELS)
  speed, fuel, egr, vgt, dither = excitation_profile(cfg, dt)
  rng = np.random.default_rng(cfg.seed + 2)
  state = plant_equilibrium(
    ActuatorInput(egr_valve=float(egr[0]), vgt_position=float(vgt[0])),
    OperatingPoint(engine_speed=float(speed[0]), fuel_rate=float(fuel[0])),
    params,
  )
  inputs = np.empty((n, len(CANDIDATE_CHANNELS)))
  targets = np.empty((n, 2))
  for k in range(n):
    v = ActuatorInput(egr_valve=float(egr[k]), vgt_position=float(vgt[k]))
    rho = OperatingPoint(engine_speed=float(speed[k]), fuel_rate=float(fuel[k]))
    state = plant_step(state, v, rho, dt, params)
    values = candidate_measurements(state, v, rho, pilot_dither=float(dither[k]), params=params)
    inputs[k] = _noisy(values, rng, cfg.noise_pct)
    targets[k] = (state.nox, state.soot)
    if (k + 1) % 2000 == 0:
      logger.debug(f"Transient log: {k + 1}/{n} steps")
  logger.info(f"Generated {n} transient samples ({n * dt:.1f} s)")
  return SampleSet(
    CANDIDATE_CHANNELS, inputs, targets, ["transient"] * n, (np.arange(n) + 1) * dt
  )
