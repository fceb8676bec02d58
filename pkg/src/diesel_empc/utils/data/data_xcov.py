"""Zero-lag cross-covariance analysis and input selection."""

import logging
from dataclasses import dataclass
from typing import List, Mapping, Sequence, Union

import numpy as np
import pandas as pd

from ...errors import ZeroVarianceError

logger = logging.getLogger(__name__)

DEFAULT_XCOV_THRESHOLD = 0.05


def normalized_xcov(signal_a, signal_b) -> float:
  """Zero-lag cross-covariance of mean-removed signals over the product of stds."""
  a = np.asarray(signal_a, dtype=float)
  b = np.asarray(signal_b, dtype=float)
  if a.ndim != 1 or a.shape != b.shape:
    raise ValueError(f"Signals must be 1-d and of equal length, got {a.shape} and {b.shape}")
  if a.size < 2:
    raise ValueError("Signals need at least 2 samples")
  da = a - a.mean()
  db = b - b.mean()
  sa = np.sqrt(np.mean(da * da))
  sb = np.sqrt(np.mean(db * db))
  if sa == 0.0 or sb == 0.0:
    raise ZeroVarianceError("Cross-covariance is undefined for a constant signal")
  value = float(np.mean(da * db) / (sa * sb))
  return min(1.0, max(-1.0, value))


@dataclass
class CorrelationSet:
  """Candidate and target series from one data set (steady state or transient)."""

  name: str
  candidates: Mapping[str, np.ndarray]
  nox: np.ndarray
  soot: np.ndarray

  def xcov(self, channel: str, target: str) -> float:
    """Like normalized_xcov, but a constant series counts as uncorrelated."""
    series = self.nox if target == "nox" else self.soot
    try:
      return normalized_xcov(self.candidates[channel], series)
    except ZeroVarianceError:
      logger.warning(
        f"Constant series in '{self.name}' set for {channel}/{target}; "
        "treating cross-covariance as 0"
      )
      return 0.0


def _as_sets(sets: Union[CorrelationSet, Sequence[CorrelationSet]]) -> List[CorrelationSet]:
  if isinstance(sets, CorrelationSet):
    return [sets]
  return list(sets)


def xcov_table(sets: Union[CorrelationSet, Sequence[CorrelationSet]]) -> pd.DataFrame:
  """One row per candidate, one column per (set, target) pair."""
  sets = _as_sets(sets)
  if not sets:
    raise ValueError("At least one correlation set is required")
  channels = list(sets[0].candidates)
  table = {
    f"{s.name}_{target}": [s.xcov(c, target) for c in channels]
    for s in sets
    for target in ("nox", "soot")
  }
  return pd.DataFrame(table, index=pd.Index(channels, name="channel"))


def select_inputs(
  sets: Union[CorrelationSet, Sequence[CorrelationSet]],
  threshold: float = DEFAULT_XCOV_THRESHOLD,
) -> List[str]:
  """Names of candidates kept as network inputs.

  A candidate is dropped only when |xcov| with both NOx and Soot is below
  `threshold` in every supplied set.
  """
  if not threshold > 0:
    raise ValueError("threshold must be > 0")
  sets = _as_sets(sets)
  if not sets or not sets[0].candidates:
    raise ValueError("select_inputs requires nonempty candidates")
  table = xcov_table(sets)
  weak = (table.abs() < threshold).all(axis=1)
  dropped = [name for name, is_weak in weak.items() if is_weak]
  retained = [name for name, is_weak in weak.items() if not is_weak]
  if dropped:
    logger.info(f"Dropping weakly correlated inputs: {', '.join(dropped)}")
  logger.info(f"Retained {len(retained)} of {len(weak)} candidate inputs")
  return retained
