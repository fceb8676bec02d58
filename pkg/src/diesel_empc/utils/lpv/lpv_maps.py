"""Steady-state look-up tables on the scheduling grid.

For each node the plant equilibrium is evaluated on a grid of EGR/VGT
candidates and the candidate with the lowest steady trade-off cost

    nox_weight * NOx / 1000 + soot_weight * Soot - torque_weight * torque / 100

is kept, subject to EGR rate <= chi_max. Its intake pressure and EGR rate
become the airpath targets, its actuator positions the equilibrium inputs.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ...errors import SettleError
from ...inputs import (
  ActuatorInput,
  AirpathState,
  EmissionState,
  GridConfig,
  OperatingPoint,
  PlantParams,
)
from ..plant.plant_emissions import REFERENCE_PLANT
from ..plant.plant_measurements import candidate_measurements
from ..plant.plant_model import plant_equilibrium
from ..plant.plant_sources import EmissionSource, TruthEmissionSource
from .lpv_grid import GridTable, ScheduleGrid

logger = logging.getLogger(__name__)

# table name -> column meaning, in storage order
MAP_NAMES = ("p_im", "chi_egr", "egr_valve", "vgt_position", "nox", "soot")


@dataclass(frozen=True)
class Targets:
  airpath: AirpathState
  v_ss: ActuatorInput
  emissions: EmissionState


@dataclass(eq=False)
class TargetMaps:
  """Look-up tables: airpath targets, equilibrium actuators and steady emissions."""

  grid: ScheduleGrid
  values: np.ndarray  # (n_speeds, n_fuels, len(MAP_NAMES))
  metadata: Dict[str, object] = field(default_factory=dict)

  def __post_init__(self):
    self.values = np.asarray(self.values, dtype=float)
    if self.values.shape != self.grid.shape + (len(MAP_NAMES),):
      raise ValueError(f"Target table shape {self.values.shape} does not match the grid")
    if not np.all(np.isfinite(self.values)):
      raise ValueError("Target tables must be finite")
    self._table = GridTable(self.grid, self.values)

  def table(self, name: str) -> np.ndarray:
    return self.values[:, :, MAP_NAMES.index(name)]

  def raw(self, rho: OperatingPoint) -> np.ndarray:
    return self._table(rho)

  def lookup(self, rho: OperatingPoint) -> Targets:
    p_im, chi, egr, vgt, nox, soot = self.raw(rho)
    return Targets(
      airpath=AirpathState(intake_pressure=p_im, egr_rate=min(max(chi, 0.0), 1.0)),
      v_ss=ActuatorInput(
        egr_valve=min(max(egr, 0.0), 100.0), vgt_position=min(max(vgt, 0.0), 100.0)
      ),
      emissions=EmissionState(nox=max(nox, 0.0), soot=max(soot, 0.0)),
    )


def steady_cost(nox: float, soot: float, torque: float, cfg: GridConfig) -> float:
  return (
    cfg.nox_weight * nox / 1000.0 + cfg.soot_weight * soot - cfg.torque_weight * torque / 100.0
  )


def best_steady_point(
  rho: OperatingPoint,
  cfg: GridConfig,
  params: PlantParams = REFERENCE_PLANT,
  source: Optional[EmissionSource] = None,
) -> np.ndarray:
  """Row of MAP_NAMES values for the cheapest admissible candidate at `rho`."""
  source = source or TruthEmissionSource()
  best, best_cost = None, np.inf
  for egr in cfg.egr_candidates:
    for vgt in cfg.vgt_candidates:
      v = ActuatorInput(egr_valve=egr, vgt_position=vgt)
      try:
        state = plant_equilibrium(v, rho, params)
      except SettleError as e:
        logger.debug(f"Skipping candidate {v.as_array().tolist()} at {rho.as_tuple()}: {e}")
        continue
      if state.egr_rate > cfg.chi_max:
        continue
      emissions = source.measure(state, v, rho)
      torque = candidate_measurements(state, v, rho, params=params)["engine_torque"]
      cost = steady_cost(emissions.nox, emissions.soot, torque, cfg)
      if cost < best_cost:
        best_cost = cost
        best = [state.intake_pressure, state.egr_rate, egr, vgt, emissions.nox, emissions.soot]
  if best is None:
    raise SettleError(f"No admissible steady actuator candidate at rho={rho.as_tuple()}")
  return np.array(best)


def build_target_maps(
  cfg: GridConfig = GridConfig(),
  params: PlantParams = REFERENCE_PLANT,
  source: Optional[EmissionSource] = None,
) -> TargetMaps:
  """Evaluate the steady optimum at every grid node."""
  grid = ScheduleGrid.from_config(cfg)
  values = np.zeros(grid.shape + (len(MAP_NAMES),))
  for i, j, rho in grid.nodes():
    values[i, j] = best_steady_point(rho, cfg, params, source)
  logger.info(
    f"Built target maps on a {grid.shape[0]}x{grid.shape[1]} grid "
    f"({len(cfg.egr_candidates) * len(cfg.vgt_candidates)} candidates per node)"
  )
  return TargetMaps(grid, values, {"plant": params.name})
