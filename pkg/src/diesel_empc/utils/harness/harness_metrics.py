"""Post-warmup emission metrics and deltas against a baseline run."""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Optional

import numpy as np
import pandas as pd

from .harness_cycles import DriveCycle

logger = logging.getLogger(__name__)

METRIC_NAMES = ("cumulative_nox", "peak_nox", "average_soot", "peak_soot")
METRIC_LABELS = {
  "cumulative_nox": "Cumulative NOx [ppm·s]",
  "peak_nox": "Peak NOx [ppm]",
  "average_soot": "Average Soot [%]",
  "peak_soot": "Peak Soot [%]",
}


@dataclass(frozen=True)
class MetricsReport:
  """Aggregates over the active part of one cycle run.

  `deltas` holds signed percentages against the baseline run of the same
  cycle; it is empty until `with_deltas` is applied.
  """

  scenario: str
  cycle: str
  seed: Optional[int]
  active_steps: int
  cumulative_nox: float
  peak_nox: float
  average_soot: float
  peak_soot: float
  soot_max: Optional[float] = None
  slack_steps: int = 0
  deltas: Dict[str, float] = field(default_factory=dict)

  def value(self, name: str) -> float:
    return float(getattr(self, name))

  def with_deltas(self, baseline: "MetricsReport") -> "MetricsReport":
    if (baseline.cycle, baseline.seed, baseline.active_steps) != (
      self.cycle,
      self.seed,
      self.active_steps,
    ):
      raise ValueError(
        f"Baseline run ({baseline.cycle}, seed {baseline.seed}) does not match "
        f"({self.cycle}, seed {self.seed})"
      )
    deltas = {n: percent_delta(baseline.value(n), self.value(n)) for n in METRIC_NAMES}
    return replace(self, deltas=deltas)


def percent_delta(baseline: float, value: float) -> float:
  """Signed change of `value` relative to `baseline`, in percent."""
  if baseline == 0:
    if value == 0:
      return 0.0
    raise ValueError("Relative change against a zero baseline is undefined")
  return 100.0 * (value - baseline) / baseline


def format_delta(delta: float) -> str:
  """'↓ 10.000%' for a decrease, '↑' for an increase, bare '0.000%' when unchanged."""
  text = f"{abs(delta):.3f}%"
  if text == "0.000%":
    return text
  return f"{'↓' if delta < 0 else '↑'} {text}"


def signed_delta(delta: float) -> str:
  return f"{delta:+.3f}"


def compute_metrics(
  telemetry: pd.DataFrame,
  cycle: DriveCycle,
  scenario: str,
  baseline: Optional[MetricsReport] = None,
  soot_max: Optional[float] = None,
) -> MetricsReport:
  """Aggregate NOx and Soot after the warmup; rows before it are never read."""
  if len(telemetry) != cycle.n_steps:
    raise ValueError(
      f"Telemetry has {len(telemetry)} rows, cycle '{cycle.name}' has {cycle.n_steps}"
    )
  active = telemetry.iloc[cycle.warmup_steps :]
  nox = active["nox"].to_numpy(dtype=float)
  soot = active["soot"].to_numpy(dtype=float)
  slack = active["slack"].to_numpy(dtype=float)
  report = MetricsReport(
    scenario=scenario,
    cycle=cycle.name,
    seed=cycle.seed,
    active_steps=len(active),
    cumulative_nox=float(np.sum(nox) * cycle.dt),
    peak_nox=float(np.max(nox)),
    average_soot=float(np.mean(soot)),
    peak_soot=float(np.max(soot)),
    soot_max=soot_max,
    slack_steps=int(np.count_nonzero(slack > 0)),
  )
  if baseline is not None:
    report = report.with_deltas(baseline)
  logger.info(
    f"{scenario} on {cycle.name}: cumulative NOx {report.cumulative_nox:.1f} ppm·s, "
    f"peak Soot {report.peak_soot:.3f} %"
  )
  return report
