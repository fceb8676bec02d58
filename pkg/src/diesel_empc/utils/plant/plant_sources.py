"""Emission measurement sources used in closed loop and identification."""

from typing import Protocol, runtime_checkable

from ...inputs import ActuatorInput, EmissionState, OperatingPoint
from .plant_state import PlantState


@runtime_checkable
class EmissionSource(Protocol):
  """Anything that reports feedgas emissions for a plant state."""

  name: str

  def measure(
    self, state: PlantState, v: ActuatorInput, rho: OperatingPoint
  ) -> EmissionState: ...


class TruthEmissionSource:
  """Reports the plant's own lagged emission states."""

  name = "truth"

  def measure(
    self, state: PlantState, v: ActuatorInput, rho: OperatingPoint
  ) -> EmissionState:
    return state.emissions()
