"""Integrated emissions and airpath control: EMPC over FF + FB airpath MPC."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from ...inputs import (
  DT,
  ActuatorInput,
  AirpathMpcConfig,
  AirpathState,
  EmissionState,
  OperatingPoint,
  Scenario,
)
from ..lpv.lpv_maps import TargetMaps
from ..lpv.lpv_model import LpvGridModel
from .control_airpath import (
  FeedbackState,
  FeedforwardState,
  airpath_fb_step,
  airpath_ff_step,
)
from .control_empc import AdjustedTargets, EmpcResult, empc_step, lookup_targets

logger = logging.getLogger(__name__)

TELEMETRY_COLUMNS = [
  "t",
  "engine_speed",
  "w_inj_trg",
  "p_im_trg",
  "chi_egr_trg",
  "p_im_adj",
  "chi_egr_adj",
  "w_inj_adj",
  "p_im",
  "chi_egr",
  "nox",
  "soot",
  "egr_ff",
  "vgt_ff",
  "egr_cmd",
  "vgt_cmd",
  "nox_pred",
  "soot_pred",
  "slack",
  "empc_status",
]


@dataclass
class PipelineOutput:
  command: ActuatorInput
  fuel: float
  telemetry: Dict[str, object]


@dataclass(eq=False)
class ControllerPipeline:
  """Per-simulation controller state.

  The EMPC solves every `rate_divider` base steps and its second planned move
  is applied on the intermediate step; the airpath MPC runs every base step,
  scheduled on (speed, applied fuel).
  """

  maps: TargetMaps
  emissions_model: LpvGridModel
  airpath_model: LpvGridModel
  scenario: Scenario
  airpath_cfg: AirpathMpcConfig = field(default_factory=AirpathMpcConfig)
  dt: float = DT
  use_feedforward: bool = True
  dump_dir: Optional[Path] = None

  def __post_init__(self):
    self.k = 0
    self.ff: Optional[FeedforwardState] = None
    self.fb: Optional[FeedbackState] = None
    self.x_prev: Optional[EmissionState] = None
    self.fuel_prev = 0.0
    self.pending: Optional[AdjustedTargets] = None
    self.last: Optional[EmpcResult] = None
    self.rows: List[Dict[str, object]] = []

  @property
  def weights(self):
    return self.scenario.weights

  def reset(self, z0: AirpathState, x0: EmissionState, rho: OperatingPoint) -> None:
    """Start from a measured equilibrium with the look-up actuator positions."""
    v0 = self.maps.lookup(rho).v_ss
    self.k = 0
    self.ff = FeedforwardState.at(z0, v0)
    self.fb = FeedbackState(z0.as_array(), v0.as_array(), rho.fuel_rate)
    self.x_prev = x0
    self.fuel_prev = rho.fuel_rate
    self.pending = None
    self.last = None
    self.rows = []

  def _targets(self, x: EmissionState, z: AirpathState, rho: OperatingPoint) -> AdjustedTargets:
    if not self.scenario.empc_enabled:
      lookup = self.maps.lookup(rho)
      targets = lookup_targets(lookup, rho.fuel_rate)
      self.last = EmpcResult(targets, targets, lookup, "baseline")
      return targets
    if self.k % self.weights.rate_divider == 0 or self.pending is None:
      prev_u = np.array([z.intake_pressure, z.egr_rate, self.fuel_prev])
      self.last = empc_step(
        x, rho, prev_u, self.maps, self.emissions_model, self.weights, self.scenario,
        x_prev=self.x_prev, dump_dir=self.dump_dir,
      )
      self.pending = self.last.second
      return self.last.first
    # intermediate step: planned move, re-clipped to the current fuel demand
    w = self.weights
    planned = self.pending
    return AdjustedTargets(
      planned.p_im_adj,
      planned.chi_egr_adj,
      float(np.clip(planned.w_inj_adj, w.fuel_lower_ratio * rho.fuel_rate, rho.fuel_rate)),
    )

  def step(
    self, z: AirpathState, x: EmissionState, engine_speed: float, w_trg: float
  ) -> PipelineOutput:
    rho = OperatingPoint(engine_speed=engine_speed, fuel_rate=w_trg)
    if self.ff is None:
      self.reset(z, x, rho)
    targets = self._targets(x, z, rho)
    fuel = targets.w_inj_adj
    r_adj = AirpathState(
      intake_pressure=max(targets.p_im_adj, 1.0),
      egr_rate=min(max(targets.chi_egr_adj, 0.0), 1.0),
    )
    rho_air = OperatingPoint(engine_speed=engine_speed, fuel_rate=fuel)

    v_ff_prev = self.ff.v.copy()
    if self.use_feedforward:
      v_ff = airpath_ff_step(
        r_adj, rho_air, self.airpath_model, self.airpath_cfg, self.ff, self.dump_dir
      )
    else:
      v_ff = ActuatorInput.from_array(v_ff_prev)
    dv_ff = v_ff.as_array() - v_ff_prev
    correction = airpath_fb_step(
      z, r_adj, rho_air, v_ff, dv_ff, self.fb, self.airpath_model, self.airpath_cfg,
      self.dump_dir,
    )
    command = ActuatorInput.from_array(
      np.clip(v_ff.as_array() + correction, self.airpath_cfg.v_min, self.airpath_cfg.v_max)
    )

    lookup = self.last.lookup
    row = {
      "t": self.k * self.dt,
      "engine_speed": engine_speed,
      "w_inj_trg": w_trg,
      "p_im_trg": lookup.airpath.intake_pressure,
      "chi_egr_trg": lookup.airpath.egr_rate,
      "p_im_adj": targets.p_im_adj,
      "chi_egr_adj": targets.chi_egr_adj,
      "w_inj_adj": fuel,
      "p_im": z.intake_pressure,
      "chi_egr": z.egr_rate,
      "nox": x.nox,
      "soot": x.soot,
      "egr_ff": v_ff.egr_valve,
      "vgt_ff": v_ff.vgt_position,
      "egr_cmd": command.egr_valve,
      "vgt_cmd": command.vgt_position,
      "nox_pred": self.last.nox_pred,
      "soot_pred": self.last.soot_pred,
      "slack": self.last.slack,
      "empc_status": self.last.status,
    }
    self.rows.append(row)
    self.x_prev = x
    self.fuel_prev = fuel
    self.k += 1
    return PipelineOutput(command, fuel, row)


def controller_pipeline_step(
  pipeline: ControllerPipeline,
  z: AirpathState,
  x: EmissionState,
  engine_speed: float,
  w_trg: float,
) -> PipelineOutput:
  return pipeline.step(z, x, engine_speed, w_trg)
