"""diesel-empc - Core module tying the lab's stages together.

This module exposes the command functions for:
- data generation and preparation from the reference plant
- training the emissions network
- identifying the LPV emissions and airpath models
- closed-loop scenario runs on drive cycles and their reports

It is the target of the `diesel-empc` console script and a compatibility
layer over `main_entry` and `commands`.
"""

import logging

from .commands import (
  COMMANDS,
  generate_data,
  identify_lpv,
  prepare_data,
  report,
  run_command,
  simulate,
  train_nn,
)
from .main_entry import main
from .scenarios import ScenarioLoader
from .settings import get_package_version, load_plant_params, load_settings

logger = logging.getLogger(__name__)

__all__ = [
  # Main entry point
  "main",
  # Configuration
  "ScenarioLoader",
  "get_package_version",
  "load_plant_params",
  "load_settings",
  # Commands
  "COMMANDS",
  "run_command",
  "generate_data",
  "prepare_data",
  "train_nn",
  "identify_lpv",
  "simulate",
  "report",
]

if __name__ == "__main__":
  raise SystemExit(main())
