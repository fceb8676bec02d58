"""Plant state container and the EGR-rate definition."""

import math
from dataclasses import dataclass, replace

import numpy as np

from ...errors import NonFiniteStateError, UndefinedRatioError
from ...inputs import AirpathState, EmissionState


def egr_rate(w_egr: float, w_c: float) -> float:
  """Fraction of recirculated gas in the total intake flow.

  Args:
      w_egr: EGR mass flow [g/s], >= 0
      w_c: Compressor (fresh air) mass flow [g/s], >= 0

  Returns:
      float: w_egr / (w_egr + w_c), within [0, 1]
  """
  if w_egr < 0 or w_c < 0:
    raise ValueError(f"Flows must be >= 0 (w_egr={w_egr}, w_c={w_c})")
  total = w_egr + w_c
  if total <= 0:
    raise UndefinedRatioError("EGR rate is undefined for zero total intake flow")
  return w_egr / total


@dataclass(frozen=True)
class PlantState:
  """Mean-value airpath states, algebraic flows and lagged emissions."""

  intake_pressure: float  # kPa
  exhaust_pressure: float  # kPa
  turbo_speed: float  # normalized
  compressor_flow: float  # g/s
  egr_flow: float  # g/s
  nox: float  # ppm
  soot: float  # % opacity

  def __post_init__(self):
    values = self.as_array()
    if not np.all(np.isfinite(values)):
      raise NonFiniteStateError(f"Plant state is not finite: {values.tolist()}")
    if self.intake_pressure <= 0 or self.exhaust_pressure <= 0:
      raise ValueError("Manifold pressures must be > 0")
    if self.compressor_flow < 0 or self.egr_flow < 0 or self.turbo_speed < 0:
      raise ValueError("Flows and turbo speed must be >= 0")

  @property
  def egr_rate(self) -> float:
    return egr_rate(self.egr_flow, self.compressor_flow)

  def airpath(self) -> AirpathState:
    return AirpathState(intake_pressure=self.intake_pressure, egr_rate=self.egr_rate)

  def emissions(self) -> EmissionState:
    return EmissionState(nox=max(self.nox, 0.0), soot=max(self.soot, 0.0))

  def as_array(self) -> np.ndarray:
    return np.array(
      [
        self.intake_pressure,
        self.exhaust_pressure,
        self.turbo_speed,
        self.compressor_flow,
        self.egr_flow,
        self.nox,
        self.soot,
      ]
    )

  def with_emissions(self, nox: float, soot: float) -> "PlantState":
    return replace(self, nox=nox, soot=soot)

  def distance(self, other: "PlantState") -> float:
    """Max-norm distance, used for settling checks."""
    return float(np.max(np.abs(self.as_array() - other.as_array())))


def is_finite(*values: float) -> bool:
  return all(math.isfinite(v) for v in values)
