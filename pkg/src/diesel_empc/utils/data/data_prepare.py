"""End-to-end preparation: select inputs, drop outliers, split and rebalance."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence

import pandas as pd

from ...converters import to_array, to_dict
from ...errors import ModelFormatError, MissingArtifactError
from ...inputs import SCHEMA_VERSION
from .data_dataset import (
  SPLIT_RATIOS,
  TARGET_COLUMNS,
  SampleSet,
  SplitDataset,
  filter_outliers,
  read_samples,
  split_by_kind,
  write_samples,
)
from .data_outliers import (
  DEFAULT_PERCENTILE,
  DatasetStats,
  compute_stats,
  default_threshold,
)
from .data_xcov import DEFAULT_XCOV_THRESHOLD, CorrelationSet, select_inputs, xcov_table

logger = logging.getLogger(__name__)

SPLIT_FILES = {"train": "train.csv", "validation": "val.csv", "test": "test.csv"}
STATS_FILE = "stats.json"
XCOV_FILE = "xcov.csv"


@dataclass
class PreparedDataset:
  split: SplitDataset
  stats: DatasetStats
  eps: float
  channels: List[str]
  xcov: pd.DataFrame
  removed: int = 0


def correlation_set(name: str, samples: SampleSet) -> CorrelationSet:
  return CorrelationSet(
    name=name,
    candidates={c: samples.column(c) for c in samples.channels},
    nox=samples.column(TARGET_COLUMNS[0]),
    soot=samples.column(TARGET_COLUMNS[1]),
  )


def prepare_dataset(
  steady: SampleSet,
  transient: SampleSet,
  threshold: float = DEFAULT_XCOV_THRESHOLD,
  eps: Optional[float] = None,
  percentile: float = DEFAULT_PERCENTILE,
  ratios: Sequence[float] = SPLIT_RATIOS,
  seed: int = 0,
) -> PreparedDataset:
  """Run the full preparation chain on raw candidate-channel logs.

  Args:
      steady: Steady-state samples over the candidate channels.
      transient: Transient samples over the same channels.
      threshold: Cross-covariance threshold for input selection.
      eps: Mahalanobis threshold; defaults to `percentile` of the steady-state
        self-distances.
      ratios: Train/validation/test shares.
      seed: Shuffle seed.

  Returns:
      PreparedDataset: split data over the retained channels with the stats used.
  """
  if len(steady) < 2:
    raise ValueError("At least two steady-state samples are required")
  if steady.channels != transient.channels:
    raise ValueError("Steady and transient logs must share channels")
  sets = [correlation_set("steady_state", steady)]
  if len(transient) >= 2:
    sets.insert(0, correlation_set("transient", transient))
  table = xcov_table(sets)
  channels = select_inputs(sets, threshold)

  steady = steady.select_channels(channels)
  transient = transient.select_channels(channels)
  stats = compute_stats(steady.inputs)
  if eps is None:
    eps = default_threshold(steady.inputs, stats, percentile)
  kept = filter_outliers(transient, stats, eps)
  removed = len(transient) - len(kept)

  pool = SampleSet.concat([steady, kept])
  split = split_by_kind(pool, ratios, seed)
  return PreparedDataset(split, stats, eps, channels, table, removed)


def write_prepared(prepared: PreparedDataset, out_dir: Path | str) -> Path:
  """train.csv / val.csv / test.csv, stats.json and xcov.csv under `out_dir`."""
  out_dir = Path(out_dir)
  out_dir.mkdir(parents=True, exist_ok=True)
  for part, filename in SPLIT_FILES.items():
    write_samples(getattr(prepared.split, part), out_dir / filename)
  stats = {
    "schema_version": SCHEMA_VERSION,
    "channels": prepared.channels,
    "mean": prepared.stats.mean,
    "cov": prepared.stats.cov,
    "ridge": prepared.stats.ridge,
    "eps": prepared.eps,
    "removed_transient": prepared.removed,
    "split_ratio": prepared.split.split_ratio,
  }
  with open(out_dir / STATS_FILE, "w", encoding="utf-8") as f:
    json.dump(to_dict(stats), f, indent=2)
  prepared.xcov.to_csv(out_dir / XCOV_FILE, float_format="%.6f")
  logger.info(f"Prepared dataset written to {out_dir}")
  return out_dir


def read_split(data_dir: Path | str) -> SplitDataset:
  data_dir = Path(data_dir)
  missing = [str(data_dir / f) for f in SPLIT_FILES.values() if not (data_dir / f).exists()]
  if missing:
    raise MissingArtifactError(missing)
  parts = {part: read_samples(data_dir / f) for part, f in SPLIT_FILES.items()}
  return SplitDataset(**parts)


def read_stats(data_dir: Path | str) -> tuple[DatasetStats, float, List[str]]:
  path = Path(data_dir) / STATS_FILE
  if not path.exists():
    raise MissingArtifactError([str(path)])
  with open(path, "r", encoding="utf-8") as f:
    raw = json.load(f)
  if raw.get("schema_version") != SCHEMA_VERSION:
    raise ModelFormatError(f"Unsupported stats schema in {path}")
  try:
    stats = DatasetStats(
      mean=to_array(raw["mean"], 1), cov=to_array(raw["cov"], 2), ridge=float(raw["ridge"])
    )
    eps = float(to_array([raw["eps"]])[0])
  except (KeyError, ValueError) as e:
    raise ModelFormatError(f"Corrupt stats file {path}: {e}") from e
  return stats, eps, list(raw["channels"])
