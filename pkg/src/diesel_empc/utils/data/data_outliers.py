"""Mahalanobis distance to the steady-state input distribution."""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ...errors import SingularCovarianceError

logger = logging.getLogger(__name__)

DEFAULT_PERCENTILE = 97.5


@dataclass(frozen=True, eq=False)
class DatasetStats:
  """Mean and covariance of steady-state inputs, with the ridge used to invert."""

  mean: np.ndarray
  cov: np.ndarray
  ridge: float = 0.0
  _factor: tuple = field(init=False, repr=False, compare=False)

  def __post_init__(self):
    mean = np.asarray(self.mean, dtype=float)
    cov = np.asarray(self.cov, dtype=float)
    d = mean.shape[0]
    if cov.shape != (d, d):
      raise ValueError(f"Covariance shape {cov.shape} does not match mean of size {d}")
    if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-10 * max(1.0, np.abs(cov).max())):
      raise ValueError("Covariance must be symmetric")
    object.__setattr__(self, "mean", mean)
    object.__setattr__(self, "cov", cov)
    try:
      factor = cho_factor(cov + self.ridge * np.eye(d), lower=True)
    except LinAlgError as e:
      raise SingularCovarianceError(
        f"Covariance is singular after regularization (ridge={self.ridge:.3e})"
      ) from e
    if not np.all(np.isfinite(factor[0])) or np.min(np.abs(np.diag(factor[0]))) == 0.0:
      raise SingularCovarianceError("Covariance factor is degenerate")
    object.__setattr__(self, "_factor", factor)

  @property
  def dim(self) -> int:
    return self.mean.shape[0]


def compute_stats(steady_inputs: np.ndarray, ridge: Optional[float] = None) -> DatasetStats:
  """Stats of steady-state inputs; default ridge is 1e-8 * trace(cov) / d."""
  y = np.asarray(steady_inputs, dtype=float)
  if y.ndim != 2 or y.shape[0] < 2:
    raise ValueError("compute_stats needs a 2-d array with at least 2 rows")
  mean = y.mean(axis=0)
  cov = np.cov(y, rowvar=False)
  cov = 0.5 * (cov + cov.T)
  if ridge is None:
    ridge = 1e-8 * float(np.trace(cov)) / y.shape[1]
  logger.debug(f"Steady-state stats from {y.shape[0]} samples, ridge={ridge:.3e}")
  return DatasetStats(mean=mean, cov=cov, ridge=ridge)


def mahalanobis_batch(y: np.ndarray, stats: DatasetStats) -> np.ndarray:
  y = np.atleast_2d(np.asarray(y, dtype=float))
  if y.shape[1] != stats.dim:
    raise ValueError(f"Expected {stats.dim} input channels, got {y.shape[1]}")
  diff = (y - stats.mean).T
  solved = cho_solve(stats._factor, diff)
  r2 = np.sum(diff * solved, axis=0)
  return np.sqrt(np.maximum(r2, 0.0))


def mahalanobis(y, stats: DatasetStats) -> float:
  """r = ((y - mu)^T Sigma^-1 (y - mu))^(1/2)."""
  return float(mahalanobis_batch(np.asarray(y, dtype=float)[None, :], stats)[0])


def default_threshold(
  steady_inputs: np.ndarray, stats: DatasetStats, percentile: float = DEFAULT_PERCENTILE
) -> float:
  """Percentile of the steady-state samples' own distances."""
  distances = mahalanobis_batch(steady_inputs, stats)
  eps = float(np.percentile(distances, percentile))
  logger.info(f"Outlier threshold eps={eps:.4f} ({percentile}th steady-state percentile)")
  return eps


def outlier_mask(y: np.ndarray, stats: DatasetStats, eps: float) -> np.ndarray:
  """True for rows farther than `eps` from the steady-state distribution."""
  if np.isnan(eps) or eps < 0:
    raise ValueError("eps must be >= 0")
  return mahalanobis_batch(y, stats) > eps
