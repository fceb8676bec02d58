"""Report rendering: metrics CSV, markdown comparison table and SVG figures."""

import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from .harness_metrics import METRIC_LABELS, METRIC_NAMES, format_delta, signed_delta  # noqa: E402
from .harness_runner import ScenarioRun  # noqa: E402

logger = logging.getLogger(__name__)

METRICS_CSV = "metrics.csv"
COMPARISON_MD = "comparison.md"
CSV_COLUMNS = [
  "cycle",
  "scenario",
  "seed",
  *METRIC_NAMES,
  *(f"delta_{n}_pct" for n in METRIC_NAMES),
  "soot_max",
  "slack_steps",
  "active_steps",
]

# stable ids and no timestamp, so identical runs give identical files
plt.rcParams["svg.hashsalt"] = "diesel-empc"
_SVG_METADATA = {"Date": None, "Creator": "diesel-empc"}


def _by_cycle(runs: Sequence[ScenarioRun]) -> Dict[str, List[ScenarioRun]]:
  groups: Dict[str, List[ScenarioRun]] = defaultdict(list)
  for run in runs:
    groups[run.cycle].append(run)
  return dict(groups)


def metrics_frame(runs: Sequence[ScenarioRun]) -> pd.DataFrame:
  """One row per scenario per cycle; deltas as signed percentage strings."""
  rows = []
  for run in runs:
    m = run.metrics
    row = {"cycle": m.cycle, "scenario": m.scenario, "seed": m.seed}
    row.update({n: m.value(n) for n in METRIC_NAMES})
    row.update({f"delta_{n}_pct": signed_delta(m.deltas.get(n, 0.0)) for n in METRIC_NAMES})
    row.update(soot_max=m.soot_max, slack_steps=m.slack_steps, active_steps=m.active_steps)
    rows.append(row)
  return pd.DataFrame(rows, columns=CSV_COLUMNS)


def comparison_markdown(runs: Sequence[ScenarioRun]) -> str:
  lines = ["# Scenario comparison", ""]
  for cycle, group in _by_cycle(runs).items():
    seeds = sorted({str(r.metrics.seed) for r in group})
    lines += [f"## {cycle}", "", f"Seed: {', '.join(seeds)}", ""]
    header = ["Scenario"]
    for n in METRIC_NAMES:
      header += [METRIC_LABELS[n], "vs baseline"]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for run in group:
      m = run.metrics
      cells = [m.scenario]
      for n in METRIC_NAMES:
        cells += [f"{m.value(n):.3f}", format_delta(m.deltas.get(n, 0.0))]
      lines.append("| " + " | ".join(cells) + " |")
    lines.append("")
  return "\n".join(lines)


def _save(fig, path: Path) -> Path:
  fig.savefig(path, format="svg", metadata=_SVG_METADATA)
  plt.close(fig)
  return path


def plot_emissions(cycle: str, group: Sequence[ScenarioRun], out_dir: Path) -> Path:
  """NOx and Soot of every scenario, with the Soot limits of limited scenarios."""
  fig, (ax_nox, ax_soot) = plt.subplots(2, 1, sharex=True, figsize=(10, 6))
  for run in group:
    t = run.telemetry["t"]
    ax_nox.plot(t, run.telemetry["nox"], label=run.scenario.name, linewidth=0.8)
    ax_soot.plot(t, run.telemetry["soot"], label=run.scenario.name, linewidth=0.8)
    if run.metrics.soot_max is not None:
      ax_soot.axhline(
        run.metrics.soot_max, linestyle="--", color="k", linewidth=0.8,
        label=f"Soot_max ({run.scenario.name})", gid=f"soot_max_{run.scenario.name}",
      )
  ax_nox.set_ylabel("NOx [ppm]")
  ax_soot.set_ylabel("Soot [%]")
  ax_soot.set_xlabel("Time [s]")
  ax_nox.legend(loc="upper right", fontsize="small")
  ax_soot.legend(loc="upper right", fontsize="small")
  ax_nox.set_title(f"Emissions on {cycle}")
  return _save(fig, out_dir / f"{cycle}_emissions.svg")


def plot_targets(cycle: str, run: ScenarioRun, out_dir: Path) -> Path:
  """Look-up targets, adjusted targets and measured airpath of one scenario."""
  tel = run.telemetry
  t = tel["t"]
  fig, axes = plt.subplots(3, 1, sharex=True, figsize=(10, 8))
  panels = [
    ("p_im_trg", "p_im_adj", "p_im", "Intake pressure [kPa]"),
    ("chi_egr_trg", "chi_egr_adj", "chi_egr", "EGR rate [-]"),
    ("w_inj_trg", "w_inj_adj", None, "Fuel [mm^3/st]"),
  ]
  for ax, (trg, adj, actual, label) in zip(axes, panels):
    ax.plot(t, tel[trg], label="look-up", linewidth=0.8)
    ax.plot(t, tel[adj], label="adjusted", linewidth=0.8)
    if actual is not None:
      ax.plot(t, tel[actual], label="actual", linewidth=0.8)
    ax.set_ylabel(label)
    ax.legend(loc="upper right", fontsize="small")
  axes[-1].set_xlabel("Time [s]")
  axes[0].set_title(f"{run.scenario.name} targets on {cycle}")
  return _save(fig, out_dir / f"{cycle}_{run.scenario.name}_targets.svg")


def render_report(runs: Sequence[ScenarioRun], out_dir: Path | str) -> List[Path]:
  """Write metrics.csv, comparison.md and the SVG figures; returns the paths."""
  if not runs:
    raise ValueError("render_report needs at least one run")
  out_dir = Path(out_dir)
  out_dir.mkdir(parents=True, exist_ok=True)
  written = []
  csv_path = out_dir / METRICS_CSV
  metrics_frame(runs).to_csv(csv_path, index=False, float_format="%.6f")
  written.append(csv_path)
  md_path = out_dir / COMPARISON_MD
  md_path.write_text(comparison_markdown(runs), encoding="utf-8")
  written.append(md_path)
  for cycle, group in _by_cycle(runs).items():
    written.append(plot_emissions(cycle, group, out_dir))
    for run in group:
      written.append(plot_targets(cycle, run, out_dir))
  logger.info(f"Rendered report for {len(runs)} run(s) into {out_dir}")
  return written
