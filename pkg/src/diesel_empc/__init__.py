# diesel_empc: emissions-aware model predictive control lab for a diesel engine

from . import core
from . import utils

__all__ = [
  "core",
  "utils",
  "main",
  "run_command",
  "load_settings",
  "load_plant_params",
  "ScenarioLoader",
]

from .commands import run_command
from .main_entry import main
from .scenarios import ScenarioLoader
from .settings import load_plant_params, load_settings
