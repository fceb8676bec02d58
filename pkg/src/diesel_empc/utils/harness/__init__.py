"""Scenario harness utility modules.

This package contains the closed-loop experiments:
- harness_cycles: step/ramp and seeded transient drive cycles
- harness_metrics: post-warmup emission metrics and baseline deltas
- harness_runner: closed-loop runs, scenario sweeps and run directories
- harness_report: metrics CSV, comparison table and SVG figures
"""

from .harness_cycles import (
  CYCLE_NAMES,
  DriveCycle,
  make_cycle,
  make_step_ramp_cycle,
  make_transient_cycle,
)
from .harness_metrics import (
  METRIC_NAMES,
  MetricsReport,
  compute_metrics,
  format_delta,
  percent_delta,
  signed_delta,
)
from .harness_report import (
  COMPARISON_MD,
  CSV_COLUMNS,
  METRICS_CSV,
  comparison_markdown,
  metrics_frame,
  render_report,
)
from .harness_runner import (
  ArtifactPaths,
  ClosedLoopModels,
  ScenarioRun,
  load_run,
  resolve_soot_max,
  run_scenario,
  run_sweep,
  simulate_closed_loop,
  write_run,
)

__all__ = [
  "CYCLE_NAMES",
  "DriveCycle",
  "make_cycle",
  "make_step_ramp_cycle",
  "make_transient_cycle",
  "METRIC_NAMES",
  "MetricsReport",
  "compute_metrics",
  "format_delta",
  "percent_delta",
  "signed_delta",
  "COMPARISON_MD",
  "CSV_COLUMNS",
  "METRICS_CSV",
  "comparison_markdown",
  "metrics_frame",
  "render_report",
  "ArtifactPaths",
  "ClosedLoopModels",
  "ScenarioRun",
  "load_run",
  "resolve_soot_max",
  "run_scenario",
  "run_sweep",
  "simulate_closed_loop",
  "write_run",
]
