"""Open-loop validation of identified LPV models against the plant."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ...inputs import DT, ActuatorInput, OperatingPoint, PlantParams
from ..plant.plant_emissions import REFERENCE_PLANT
from ..plant.plant_model import plant_equilibrium, plant_step
from ..plant.plant_sources import EmissionSource, TruthEmissionSource
from .lpv_experiment import LOG_COLUMNS, log_row
from .lpv_maps import TargetMaps
from .lpv_model import STATE_NAMES, LpvGridModel, simulate_lpv

logger = logging.getLogger(__name__)

# Acceptance thresholds on mean absolute error.
NOX_MAE_LIMIT = 100.0  # ppm
SOOT_MAE_LIMIT = 2.0  # % opacity

_LOG_NAMES = {"nox": "nox", "soot": "soot", "intake_pressure": "pim", "egr_rate": "chi_egr"}


@dataclass(eq=False)
class ValidationScenario:
  """Operating points and actuator commands applied step by step."""

  rhos: List[OperatingPoint]
  commands: List[ActuatorInput]
  dt: float = DT
  name: str = "validation"

  def __post_init__(self):
    if len(self.rhos) != len(self.commands):
      raise ValueError("rhos and commands must have equal length")
    if len(self.rhos) < 2:
      raise ValueError("a validation scenario needs at least 2 steps")


@dataclass
class ValidationReport:
  kind: str
  mae: Dict[str, float]
  predicted: np.ndarray
  actual: np.ndarray
  limits: Dict[str, float] = field(default_factory=dict)

  @property
  def passed(self) -> bool:
    return all(self.mae[name] < limit for name, limit in self.limits.items())


def make_validation_scenario(
  speeds: Sequence[float],
  fuels: Sequence[float],
  maps: TargetMaps,
  dt: float = DT,
  name: str = "validation",
) -> ValidationScenario:
  """Drive the plant open loop with the look-up equilibrium actuators along a profile."""
  rhos = [OperatingPoint(engine_speed=s, fuel_rate=f) for s, f in zip(speeds, fuels)]
  commands = [maps.lookup(rho).v_ss for rho in rhos]
  return ValidationScenario(rhos, commands, dt, name)


def run_plant(
  scenario: ValidationScenario,
  params: PlantParams = REFERENCE_PLANT,
  source: Optional[EmissionSource] = None,
) -> pd.DataFrame:
  """Plant readings in the identification log layout (row k before command k)."""
  source = source or TruthEmissionSource()
  state = plant_equilibrium(scenario.commands[0], scenario.rhos[0], params)
  last_v, last_rho = scenario.commands[0], scenario.rhos[0]
  rows = []
  for k, (v, rho) in enumerate(zip(scenario.commands, scenario.rhos)):
    emissions = source.measure(state, last_v, last_rho)
    rows.append(log_row(k * scenario.dt, state, v, rho.fuel_rate, emissions.nox, emissions.soot))
    state = plant_step(state, v, rho, scenario.dt, params)
    last_v, last_rho = v, rho
  return pd.DataFrame(rows, columns=LOG_COLUMNS)


def validate_lpv(
  model: LpvGridModel,
  scenario: ValidationScenario,
  params: PlantParams = REFERENCE_PLANT,
  source: Optional[EmissionSource] = None,
  reference: Optional[pd.DataFrame] = None,
) -> ValidationReport:
  """Simulate the LPV model on the inputs the plant saw and compare outputs.

  `reference` replaces the plant run with a previously recorded log.
  """
  frame = reference if reference is not None else run_plant(scenario, params, source)
  names = STATE_NAMES[model.kind]
  actual = frame[[_LOG_NAMES[n] for n in names]].to_numpy(dtype=float)
  fuel = frame["winj"].to_numpy(dtype=float)
  rhos = scenario.rhos[:-1]
  if model.kind == "emissions":
    inputs = np.column_stack(
      [frame["pim"].to_numpy()[1:], frame["chi_egr"].to_numpy()[1:], fuel[:-1]]
    )
    predicted = simulate_lpv(model, actual[0], inputs, rhos)
  else:
    inputs = frame[["egr_cmd", "vgt_cmd"]].to_numpy(dtype=float)[:-1]
    predicted = simulate_lpv(model, actual[0], inputs, rhos, fuel[:-1, None])

  mae = {n: float(np.mean(np.abs(predicted[:, c] - actual[:, c]))) for c, n in enumerate(names)}
  limits = {"nox": NOX_MAE_LIMIT, "soot": SOOT_MAE_LIMIT} if model.kind == "emissions" else {}
  report = ValidationReport(model.kind, mae, predicted, actual, limits)
  level = logging.INFO if report.passed else logging.WARNING
  logger.log(level, f"LPV {model.kind} validation on '{scenario.name}': MAE {mae}")
  return report
