"""Emission source backed by the trained network."""

import logging

import numpy as np

from ...inputs import ActuatorInput, EmissionState, OperatingPoint, PlantParams
from ..plant.plant_emissions import REFERENCE_PLANT
from ..plant.plant_measurements import CANDIDATE_CHANNELS, candidate_measurements
from ..plant.plant_state import PlantState
from .nn_model import MlpModel, predict

logger = logging.getLogger(__name__)


class NnEmissionSource:
  """Predicts emissions from the plant's measured channels, like a virtual sensor."""

  name = "nn"

  def __init__(self, model: MlpModel, params: PlantParams = REFERENCE_PLANT):
    unknown = [c for c in model.channels if c not in CANDIDATE_CHANNELS]
    if unknown:
      raise ValueError(f"Model expects unknown channels: {unknown}")
    self.model = model
    self.params = params

  def measure(
    self, state: PlantState, v: ActuatorInput, rho: OperatingPoint
  ) -> EmissionState:
    values = candidate_measurements(state, v, rho, params=self.params)
    y0 = np.array([values[c] for c in self.model.channels])
    nox, soot = predict(self.model, y0)
    return EmissionState(nox=max(float(nox), 0.0), soot=max(float(soot), 0.0))
