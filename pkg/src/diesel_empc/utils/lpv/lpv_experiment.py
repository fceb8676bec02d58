"""Node identification experiments: PRBS actuator and fuel perturbations."""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from ...inputs import ActuatorInput, OperatingPoint, PerturbationSpec, PlantParams
from ..plant.plant_emissions import REFERENCE_PLANT
from ..plant.plant_model import plant_equilibrium, plant_step
from ..plant.plant_sources import EmissionSource, TruthEmissionSource
from ..plant.plant_state import PlantState

logger = logging.getLogger(__name__)

# Row k: plant readings at t_k and the commands applied over [t_k, t_k + dt).
LOG_COLUMNS = ["t", "egr_cmd", "vgt_cmd", "winj", "pim", "chi_egr", "nox", "soot"]


@dataclass(eq=False)
class ExperimentLog:
  node: OperatingPoint
  v_ss: ActuatorInput
  spec: PerturbationSpec
  frame: pd.DataFrame
  source: str = "truth"

  def __post_init__(self):
    if list(self.frame.columns) != LOG_COLUMNS:
      raise ValueError(f"Log columns {list(self.frame.columns)} differ from {LOG_COLUMNS}")
    commands = self.frame[["egr_cmd", "vgt_cmd"]].to_numpy()
    if np.any(commands < 0) or np.any(commands > 100):
      raise ValueError("Logged actuator commands leave [0, 100]")

  def __len__(self) -> int:
    return len(self.frame)

  def column(self, name: str) -> np.ndarray:
    return self.frame[name].to_numpy(dtype=float)

  def equilibrium(self) -> pd.Series:
    """Readings at the first row, taken at the settled node equilibrium."""
    return self.frame.iloc[0]


def prbs(
  rng: np.random.Generator, steps: int, hold_steps: int
) -> np.ndarray:
  """Random +/-1 levels redrawn every `hold_steps` samples."""
  clocks = -(-steps // hold_steps)
  levels = rng.choice(np.array([-1.0, 1.0]), size=clocks)
  return np.repeat(levels, hold_steps)[:steps]


def log_row(
  t: float, state: PlantState, v: ActuatorInput, fuel: float, nox: float, soot: float
) -> dict:
  return {
    "t": t,
    "egr_cmd": v.egr_valve,
    "vgt_cmd": v.vgt_position,
    "winj": fuel,
    "pim": state.intake_pressure,
    "chi_egr": state.egr_rate,
    "nox": nox,
    "soot": soot,
  }


def run_perturbation(
  node: OperatingPoint,
  spec: PerturbationSpec,
  v_ss: ActuatorInput,
  params: PlantParams = REFERENCE_PLANT,
  source: Optional[EmissionSource] = None,
) -> ExperimentLog:
  """Settle the plant at (v_ss, node), then log its response to PRBS steps.

  EGR and VGT commands switch between v_ss -/+ amplitude_pct (clamped to
  [0, 100]); the fuel rate switches between node -/+ fuel_amplitude_pct of the
  fuel envelope, kept >= 0. Each channel has its own seeded sequence.
  """
  source = source or TruthEmissionSource()
  steps = spec.steps
  hold = max(int(round(spec.min_hold / spec.dt)), 1)
  rng = np.random.default_rng(spec.seed)
  egr_seq = prbs(rng, steps, hold) * (spec.amplitude_pct if spec.perturb_egr else 0.0)
  vgt_seq = prbs(rng, steps, hold) * (spec.amplitude_pct if spec.perturb_vgt else 0.0)
  fuel_amp = spec.fuel_amplitude_pct / 100.0 * params.max_fuel
  fuel_seq = prbs(rng, steps, hold) * (fuel_amp if spec.perturb_fuel else 0.0)

  state = plant_equilibrium(v_ss, node, params)
  # sensors read the commands that held over the previous interval
  last_v, last_rho = v_ss, node
  rows = []
  for k in range(steps):
    v = ActuatorInput(
      egr_valve=float(np.clip(v_ss.egr_valve + egr_seq[k], 0.0, 100.0)),
      vgt_position=float(np.clip(v_ss.vgt_position + vgt_seq[k], 0.0, 100.0)),
    )
    fuel = max(node.fuel_rate + fuel_seq[k], 0.0)
    rho = OperatingPoint(engine_speed=node.engine_speed, fuel_rate=fuel)
    emissions = source.measure(state, last_v, last_rho)
    rows.append(log_row(k * spec.dt, state, v, fuel, emissions.nox, emissions.soot))
    state = plant_step(state, v, rho, spec.dt, params)
    last_v, last_rho = v, rho

  frame = pd.DataFrame(rows, columns=LOG_COLUMNS)
  logger.debug(
    f"Perturbation at {node.as_tuple()}: {steps} steps, source {source.name}, "
    f"pim range [{frame['pim'].min():.1f}, {frame['pim'].max():.1f}] kPa"
  )
  return ExperimentLog(node=node, v_ss=v_ss, spec=spec, frame=frame, source=source.name)
