"""Dataset utility modules.

This package contains the data pipeline feeding the emissions network:
- data_generator: steady-state and transient logs from the reference plant
- data_xcov: cross-covariance analysis and input selection
- data_outliers: steady-state statistics and Mahalanobis distances
- data_dataset: sample sets, rebalancing, splitting and CSV storage
- data_prepare: the select/filter/split chain and its output files
"""

from .data_dataset import (
  KINDS,
  SPLIT_RATIOS,
  STEADY_DUPLICATION,
  TARGET_COLUMNS,
  Sample,
  SampleSet,
  SplitDataset,
  balance,
  filter_outliers,
  read_samples,
  split,
  split_by_kind,
  split_sizes,
  write_samples,
)
from .data_generator import (
  SENSOR_CHANNELS,
  excitation_profile,
  generate_steady,
  generate_transient,
)
from .data_outliers import (
  DEFAULT_PERCENTILE,
  DatasetStats,
  compute_stats,
  default_threshold,
  mahalanobis,
  mahalanobis_batch,
  outlier_mask,
)
from .data_prepare import (
  PreparedDataset,
  correlation_set,
  prepare_dataset,
  read_split,
  read_stats,
  write_prepared,
)
from .data_xcov import (
  DEFAULT_XCOV_THRESHOLD,
  CorrelationSet,
  normalized_xcov,
  select_inputs,
  xcov_table,
)

__all__ = [
  "KINDS",
  "SPLIT_RATIOS",
  "STEADY_DUPLICATION",
  "TARGET_COLUMNS",
  "Sample",
  "SampleSet",
  "SplitDataset",
  "balance",
  "filter_outliers",
  "read_samples",
  "split",
  "split_by_kind",
  "split_sizes",
  "write_samples",
  "SENSOR_CHANNELS",
  "excitation_profile",
  "generate_steady",
  "generate_transient",
  "DEFAULT_PERCENTILE",
  "DatasetStats",
  "compute_stats",
  "default_threshold",
  "mahalanobis",
  "mahalanobis_batch",
  "outlier_mask",
  "PreparedDataset",
  "correlation_set",
  "prepare_dataset",
  "read_split",
  "read_stats",
  "write_prepared",
  "DEFAULT_XCOV_THRESHOLD",
  "CorrelationSet",
  "normalized_xcov",
  "select_inputs",
  "xcov_table",
]
