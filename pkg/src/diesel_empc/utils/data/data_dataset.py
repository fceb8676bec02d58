"""Sample containers, steady-state rebalancing, splitting and CSV storage."""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ...errors import ModelFormatError, MissingArtifactError
from ...inputs import SCHEMA_VERSION
from ..plant.plant_measurements import CHANNEL_UNITS
from .data_outliers import DatasetStats, outlier_mask

logger = logging.getLogger(__name__)

SampleKind = Literal["steady_state", "transient"]
KINDS = ("steady_state", "transient")
TARGET_COLUMNS = ("nox", "soot")
TARGET_UNITS = {"nox": "ppm", "soot": "%"}
SPLIT_RATIOS = (0.70, 0.15, 0.15)
STEADY_DUPLICATION = 7


@dataclass(frozen=True, eq=False)
class Sample:
  inputs: np.ndarray
  targets: np.ndarray
  kind: SampleKind
  timestamp: float = math.nan


class SampleSet:
  """Column-oriented set of samples sharing one input channel layout."""

  def __init__(
    self,
    channels: Sequence[str],
    inputs: np.ndarray,
    targets: np.ndarray,
    kinds: Sequence[str],
    timestamps: Optional[np.ndarray] = None,
  ):
    self.channels = tuple(channels)
    self.inputs = np.asarray(inputs, dtype=float).reshape(-1, len(self.channels))
    self.targets = np.asarray(targets, dtype=float).reshape(-1, len(TARGET_COLUMNS))
    self.kinds = np.asarray(kinds, dtype=object)
    n = self.inputs.shape[0]
    self.timestamps = (
      np.full(n, math.nan) if timestamps is None else np.asarray(timestamps, dtype=float)
    )
    if not (self.targets.shape[0] == self.kinds.shape[0] == self.timestamps.shape[0] == n):
      raise ValueError("Sample columns have inconsistent lengths")
    if n and not set(self.kinds.tolist()) <= set(KINDS):
      raise ValueError(f"Sample kinds must be one of {KINDS}")
    if not np.all(np.isfinite(self.inputs)):
      raise ValueError("Sample inputs must be finite")
    if not np.all(np.isfinite(self.targets)) or np.any(self.targets < 0):
      raise ValueError("Sample targets must be finite and >= 0")

  @classmethod
  def empty(cls, channels: Sequence[str]) -> "SampleSet":
    return cls(channels, np.zeros((0, len(channels))), np.zeros((0, 2)), [])

  def __len__(self) -> int:
    return self.inputs.shape[0]

  def __getitem__(self, i: int) -> Sample:
    return Sample(self.inputs[i], self.targets[i], self.kinds[i], float(self.timestamps[i]))

  def __iter__(self) -> Iterator[Sample]:
    for i in range(len(self)):
      yield self[i]

  def take(self, index) -> "SampleSet":
    index = np.asarray(index)
    return SampleSet(
      self.channels, self.inputs[index], self.targets[index], self.kinds[index],
      self.timestamps[index],
    )

  def of_kind(self, kind: SampleKind) -> "SampleSet":
    return self.take(np.flatnonzero(self.kinds == kind))

  def select_channels(self, channels: Sequence[str]) -> "SampleSet":
    missing = [c for c in channels if c not in self.channels]
    if missing:
      raise ValueError(f"Unknown channels: {missing}")
    cols = [self.channels.index(c) for c in channels]
    return SampleSet(channels, self.inputs[:, cols], self.targets, self.kinds, self.timestamps)

  def column(self, name: str) -> np.ndarray:
    if name in TARGET_COLUMNS:
      return self.targets[:, TARGET_COLUMNS.index(name)]
    return self.inputs[:, self.channels.index(name)]

  @staticmethod
  def concat(sets: Sequence["SampleSet"]) -> "SampleSet":
    if not sets:
      raise ValueError("Nothing to concatenate")
    channels = sets[0].channels
    if any(s.channels != channels for s in sets):
      raise ValueError("Cannot concatenate sets with different channels")
    return SampleSet(
      channels,
      np.concatenate([s.inputs for s in sets]),
      np.concatenate([s.targets for s in sets]),
      np.concatenate([s.kinds for s in sets]),
      np.concatenate([s.timestamps for s in sets]),
    )


@dataclass
class SplitDataset:
  train: SampleSet
  validation: SampleSet
  test: SampleSet
  split_ratio: Tuple[float, float, float] = SPLIT_RATIOS


def filter_outliers(samples: SampleSet, stats: DatasetStats, eps: float) -> SampleSet:
  """Drop transient samples farther than `eps` from the steady-state distribution.

  Steady-state samples are always kept.
  """
  if len(samples) == 0:
    return samples
  far = outlier_mask(samples.inputs, stats, eps)
  keep = ~(far & (samples.kinds == "transient"))
  removed = int(np.count_nonzero(~keep))
  logger.info(f"Outlier filter (eps={eps:.4g}) removed {removed} of {len(samples)} samples")
  return samples.take(np.flatnonzero(keep))


def balance(steady: SampleSet, transient_filtered: SampleSet) -> SampleSet:
  """Transient samples followed by seven copies of the steady-state samples."""
  if len(steady) == 0:
    return transient_filtered
  copies = [steady] * STEADY_DUPLICATION
  if len(transient_filtered) == 0:
    return SampleSet.concat(copies)
  return SampleSet.concat([transient_filtered, *copies])


def split_sizes(n: int, ratios: Sequence[float] = SPLIT_RATIOS) -> Tuple[int, int, int]:
  """Floor the train and validation shares; the remainder goes to test."""
  n_train = math.floor(ratios[0] * n + 1e-9)
  n_val = math.floor(ratios[1] * n + 1e-9)
  return n_train, n_val, n - n_train - n_val


def split(
  samples: SampleSet, ratios: Sequence[float] = SPLIT_RATIOS, seed: int = 0
) -> SplitDataset:
  """Seeded shuffle followed by a contiguous train/validation/test partition."""
  if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
    raise ValueError(f"Split ratios must be three nonnegative values summing to 1, got {ratios}")
  if len(samples) == 0:
    raise ValueError("Cannot split an empty sample set")
  order = np.random.default_rng(seed).permutation(len(samples))
  n_train, n_val, _ = split_sizes(len(samples), ratios)
  return SplitDataset(
    train=samples.take(order[:n_train]),
    validation=samples.take(order[n_train : n_train + n_val]),
    test=samples.take(order[n_train + n_val :]),
    split_ratio=tuple(ratios),
  )


def split_by_kind(
  samples: SampleSet, ratios: Sequence[float] = SPLIT_RATIOS, seed: int = 0
) -> SplitDataset:
  """Split each kind separately, then duplicate steady samples in train only."""
  parts: Dict[str, SplitDataset] = {}
  for offset, kind in enumerate(KINDS):
    subset = samples.of_kind(kind)
    if len(subset):
      parts[kind] = split(subset, ratios, seed + offset)
  if not parts:
    raise ValueError("Cannot split an empty sample set")
  empty = SampleSet.empty(samples.channels)

  def _part(kind: str, name: str) -> SampleSet:
    return getattr(parts[kind], name) if kind in parts else empty

  train = balance(_part("steady_state", "train"), _part("transient", "train"))
  validation = SampleSet.concat([_part("transient", "validation"), _part("steady_state", "validation")])
  test = SampleSet.concat([_part("transient", "test"), _part("steady_state", "test")])
  logger.info(
    f"Split sizes: train={len(train)} validation={len(validation)} test={len(test)}"
  )
  return SplitDataset(train, validation, test, tuple(ratios))


# --- CSV + JSON sidecar ---


def _sidecar_path(path: Path) -> Path:
  return path.with_suffix(".json")


def write_samples(samples: SampleSet, path: Path | str) -> Path:
  """CSV with declared column order plus a JSON sidecar of units and kinds."""
  path = Path(path)
  path.parent.mkdir(parents=True, exist_ok=True)
  frame = pd.DataFrame(samples.inputs, columns=list(samples.channels))
  frame.insert(0, "timestamp", samples.timestamps)
  frame.insert(0, "kind", samples.kinds)
  for i, name in enumerate(TARGET_COLUMNS):
    frame[name] = samples.targets[:, i]
  frame.to_csv(path, index=False, float_format="%.17g")
  sidecar = {
    "schema_version": SCHEMA_VERSION,
    "columns": list(frame.columns),
    "channels": list(samples.channels),
    "targets": list(TARGET_COLUMNS),
    "units": {**{c: CHANNEL_UNITS.get(c, "") for c in samples.channels}, **TARGET_UNITS},
    "kinds": sorted(set(samples.kinds.tolist())),
    "rows": len(samples),
  }
  with open(_sidecar_path(path), "w", encoding="utf-8") as f:
    json.dump(sidecar, f, indent=2)
  logger.info(f"Wrote {len(samples)} samples to {path}")
  return path


def read_samples(path: Path | str) -> SampleSet:
  path = Path(path)
  sidecar_path = _sidecar_path(path)
  missing = [str(p) for p in (path, sidecar_path) if not p.exists()]
  if missing:
    raise MissingArtifactError(missing)
  with open(sidecar_path, "r", encoding="utf-8") as f:
    sidecar = json.load(f)
  if sidecar.get("schema_version") != SCHEMA_VERSION:
    raise ModelFormatError(f"Unsupported dataset schema in {sidecar_path}")
  frame = pd.read_csv(path, keep_default_na=True, float_precision="round_trip")
  if list(frame.columns) != sidecar["columns"]:
    raise ModelFormatError(f"Column order of {path} does not match its sidecar")
  channels: List[str] = sidecar["channels"]
  return SampleSet(
    channels,
    frame[channels].to_numpy(dtype=float),
    frame[list(TARGET_COLUMNS)].to_numpy(dtype=float),
    frame["kind"].to_numpy(dtype=object),
    frame["timestamp"].to_numpy(dtype=float),
  )
