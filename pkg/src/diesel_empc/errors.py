"""Exception hierarchy for diesel-empc.

Every error carries the process exit code the CLI returns for it.
"""


class DieselEmpcError(Exception):
  """Base class for all package errors."""

  exit_code = 1


class ConfigError(DieselEmpcError):
  """Bad or unsupported configuration file / value."""

  exit_code = 2


class MissingArtifactError(DieselEmpcError):
  """One or more required artifact files are absent."""

  exit_code = 3

  def __init__(self, missing):
    self.missing = [str(m) for m in missing]
    super().__init__(f"Missing artifact(s): {', '.join(self.missing)}")


class ModelFormatError(DieselEmpcError):
  """Artifact exists but is truncated, corrupt or has inconsistent shapes."""

  exit_code = 3


class UnsupportedVersionError(ModelFormatError):
  """Artifact was written by an unsupported format version."""


class NumericalError(DieselEmpcError):
  """Numerical failure: the computation cannot produce a valid result."""

  exit_code = 4


class UndefinedRatioError(NumericalError):
  """A ratio with zero denominator was requested."""


class NonFiniteStateError(NumericalError):
  """A simulation state contains NaN or inf."""


class SettleError(NumericalError):
  """The plant failed to settle at an equilibrium."""


class ZeroVarianceError(NumericalError):
  """A signal or scale factor has zero variance."""


class SingularCovarianceError(NumericalError):
  """Covariance is singular even after regularization."""


class RankDeficientError(NumericalError):
  """Least-squares regressor lacks excitation in a named channel."""

  def __init__(self, channel: str, message: str | None = None):
    self.channel = channel
    super().__init__(message or f"Regressor is rank deficient in channel '{channel}'")


class ModelQualityError(NumericalError):
  """An identified model fails its rollout quality gate."""


class TrainingDivergedError(NumericalError):
  """Training loss became non-finite."""

  def __init__(self, epoch: int):
    self.epoch = epoch
    super().__init__(f"Training diverged (non-finite loss) at epoch {epoch}")


class QpFailure(NumericalError):
  """A QP could not be solved to optimality."""

  def __init__(self, status: str, problem=None):
    self.status = status
    self.problem = problem
    super().__init__(f"QP solve failed with status '{status}'")
