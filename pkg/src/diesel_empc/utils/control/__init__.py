"""Controller utility modules.

This package contains the hierarchical control stack:
- control_empc: supervisory economic MPC producing adjusted targets
- control_airpath: feedforward and rate-based feedback airpath tracking MPC
- control_pipeline: per-simulation controller state and telemetry
"""

from .control_airpath import (
  FeedbackState,
  FeedforwardState,
  airpath_fb_step,
  airpath_ff_step,
)
from .control_empc import AdjustedTargets, EmpcResult, empc_step, lookup_targets
from .control_pipeline import (
  TELEMETRY_COLUMNS,
  ControllerPipeline,
  PipelineOutput,
  controller_pipeline_step,
)

__all__ = [
  "FeedbackState",
  "FeedforwardState",
  "airpath_fb_step",
  "airpath_ff_step",
  "AdjustedTargets",
  "EmpcResult",
  "empc_step",
  "lookup_targets",
  "TELEMETRY_COLUMNS",
  "ControllerPipeline",
  "PipelineOutput",
  "controller_pipeline_step",
]
