"""Reference plant utility modules.

This package contains the synthetic engine standing in for the test cell:
- plant_state: state container and EGR-rate definition
- plant_model: airpath dynamics, equilibria and settling
- plant_emissions: ground-truth NOx/Soot maps with lags
- plant_measurements: measured-variable proxies for the network inputs
- plant_io: open-loop simulation and trajectory CSV dumps
- plant_sources: emission measurement sources
"""

from .plant_emissions import (
  REFERENCE_PLANT,
  air_fuel_ratio,
  emission_truth,
  static_emissions,
)
from .plant_io import (
  TRAJECTORY_COLUMNS,
  read_trajectory_csv,
  simulate_open_loop,
  write_trajectory_csv,
)
from .plant_measurements import (
  CANDIDATE_CHANNELS,
  CHANNEL_UNITS,
  MEASUREMENT_CHANNELS,
  candidate_measurements,
  measurement_vector,
)
from .plant_model import airpath_flows, plant_equilibrium, plant_step, settle
from .plant_sources import EmissionSource, TruthEmissionSource
from .plant_state import PlantState, egr_rate

__all__ = [
  "REFERENCE_PLANT",
  "air_fuel_ratio",
  "emission_truth",
  "static_emissions",
  "TRAJECTORY_COLUMNS",
  "read_trajectory_csv",
  "simulate_open_loop",
  "write_trajectory_csv",
  "CANDIDATE_CHANNELS",
  "CHANNEL_UNITS",
  "MEASUREMENT_CHANNELS",
  "candidate_measurements",
  "measurement_vector",
  "airpath_flows",
  "plant_equilibrium",
  "plant_step",
  "settle",
  "EmissionSource",
  "TruthEmissionSource",
  "PlantState",
  "egr_rate",
]
