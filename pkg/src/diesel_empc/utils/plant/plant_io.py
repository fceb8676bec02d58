"""Open-loop simulation and trajectory CSV dumps."""

import logging
from pathlib import Path
from typing import List, Sequence, Tuple

import pandas as pd

from ...errors import ModelFormatError
from ...inputs import DT, ActuatorInput, OperatingPoint, PlantParams
from .plant_emissions import REFERENCE_PLANT
from .plant_model import plant_step
from .plant_state import PlantState

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = [
  "t", "ne", "winj", "egr_cmd", "vgt_cmd", "pim", "pex", "nturb",
  "wc", "wegr", "chi_egr", "nox", "soot",
]


def trajectory_row(
  t: float, state: PlantState, v: ActuatorInput, rho: OperatingPoint
) -> dict:
  return {
    "t": t,
    "ne": rho.engine_speed,
    "winj": rho.fuel_rate,
    "egr_cmd": v.egr_valve,
    "vgt_cmd": v.vgt_position,
    "pim": state.intake_pressure,
    "pex": state.exhaust_pressure,
    "nturb": state.turbo_speed,
    "wc": state.compressor_flow,
    "wegr": state.egr_flow,
    "chi_egr": state.egr_rate,
    "nox": state.nox,
    "soot": state.soot,
  }


def simulate_open_loop(
  initial: PlantState,
  schedule: Sequence[Tuple[ActuatorInput, OperatingPoint]],
  dt: float = DT,
  params: PlantParams = REFERENCE_PLANT,
) -> Tuple[List[PlantState], pd.DataFrame]:
  """Apply (v, rho) pairs step by step; row k holds the state after step k."""
  states: List[PlantState] = []
  rows = []
  state = initial
  for k, (v, rho) in enumerate(schedule):
    state = plant_step(state, v, rho, dt, params)
    states.append(state)
    rows.append(trajectory_row((k + 1) * dt, state, v, rho))
  logger.debug(f"Open-loop simulation finished after {len(schedule)} steps")
  return states, pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS)


def write_trajectory_csv(frame: pd.DataFrame, path: Path | str) -> Path:
  path = Path(path)
  path.parent.mkdir(parents=True, exist_ok=True)
  frame.loc[:, TRAJECTORY_COLUMNS].to_csv(path, index=False, float_format="%.10g")
  logger.info(f"Wrote trajectory ({len(frame)} rows) to {path}")
  return path


def read_trajectory_csv(path: Path | str) -> pd.DataFrame:
  frame = pd.read_csv(path)
  if list(frame.columns) != TRAJECTORY_COLUMNS:
    raise ModelFormatError(
      f"Trajectory {path} has columns {list(frame.columns)}, expected {TRAJECTORY_COLUMNS}"
    )
  return frame
