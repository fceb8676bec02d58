"""LPV identification utility modules.

This package contains the scheduled linear models used by both controllers:
- lpv_grid: scheduling grid and clamped bilinear tables
- lpv_model: normalized local models, grid assembly, interpolation, simulation
- lpv_experiment: PRBS perturbation experiments at grid nodes
- lpv_fit: least-squares fits, stability projection and rollout gate
- lpv_maps: steady-state target look-up tables
- lpv_identify: identification over the full grid
- lpv_validate: open-loop validation against the plant
- lpv_io: JSON model and table files
"""

from .lpv_experiment import LOG_COLUMNS, ExperimentLog, prbs, run_perturbation
from .lpv_fit import (
  Regression,
  fit_arrays,
  fit_local,
  fit_regression,
  log_series,
  project_stable,
  rollout,
  rollout_error,
  spectral_radius,
)
from .lpv_grid import GridTable, ScheduleGrid, stack_nodes
from .lpv_identify import identify_grid, identify_node, retry_spec, substitute_flagged
from .lpv_io import (
  LPV_FORMAT_VERSION,
  load_lpv,
  load_target_maps,
  save_lpv,
  save_target_maps,
)
from .lpv_maps import MAP_NAMES, TargetMaps, Targets, best_steady_point, build_target_maps
from .lpv_model import (
  DISTURBANCE_NAMES,
  INPUT_NAMES,
  STATE_NAMES,
  LocalModel,
  LpvGridModel,
  denormalize,
  interpolate,
  normalize,
  simulate_lpv,
)
from .lpv_validate import (
  NOX_MAE_LIMIT,
  SOOT_MAE_LIMIT,
  ValidationReport,
  ValidationScenario,
  make_validation_scenario,
  run_plant,
  validate_lpv,
)

__all__ = [
  "LOG_COLUMNS",
  "ExperimentLog",
  "prbs",
  "run_perturbation",
  "Regression",
  "fit_arrays",
  "fit_local",
  "fit_regression",
  "log_series",
  "project_stable",
  "rollout",
  "rollout_error",
  "spectral_radius",
  "GridTable",
  "ScheduleGrid",
  "stack_nodes",
  "identify_grid",
  "identify_node",
  "retry_spec",
  "substitute_flagged",
  "LPV_FORMAT_VERSION",
  "load_lpv",
  "load_target_maps",
  "save_lpv",
  "save_target_maps",
  "MAP_NAMES",
  "TargetMaps",
  "Targets",
  "best_steady_point",
  "build_target_maps",
  "DISTURBANCE_NAMES",
  "INPUT_NAMES",
  "STATE_NAMES",
  "LocalModel",
  "LpvGridModel",
  "denormalize",
  "interpolate",
  "normalize",
  "simulate_lpv",
  "NOX_MAE_LIMIT",
  "SOOT_MAE_LIMIT",
  "ValidationReport",
  "ValidationScenario",
  "make_validation_scenario",
  "run_plant",
  "validate_lpv",
]
