"""Multilayer ReLU network for feedgas NOx/Soot prediction.

Every layer, the output layer included, computes y_i = relu(W_i y_{i-1} + b_i)
with W_i shaped (out, in). Inputs are standardized with train-partition
statistics; targets are divided by a per-output scale only, so the network
output stays nonnegative in physical units.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..plant.plant_measurements import MEASUREMENT_CHANNELS

logger = logging.getLogger(__name__)

DEFAULT_LAYER_SIZES = (len(MEASUREMENT_CHANNELS), 1024, 512, 32, 2)


def relu(z: np.ndarray) -> np.ndarray:
  return np.maximum(z, 0.0)


@dataclass(eq=False)
class MlpModel:
  weights: List[np.ndarray]
  biases: List[np.ndarray]
  channels: Tuple[str, ...] = MEASUREMENT_CHANNELS
  input_mean: Optional[np.ndarray] = None
  input_scale: Optional[np.ndarray] = None
  target_scale: Optional[np.ndarray] = None
  metadata: dict = field(default_factory=dict)

  def __post_init__(self):
    if len(self.weights) != len(self.biases) or not self.weights:
      raise ValueError("weights and biases must be nonempty lists of equal length")
    self.weights = [np.asarray(w, dtype=float) for w in self.weights]
    self.biases = [np.asarray(b, dtype=float) for b in self.biases]
    for i, (w, b) in enumerate(zip(self.weights, self.biases)):
      if w.ndim != 2 or b.shape != (w.shape[0],):
        raise ValueError(f"Layer {i + 1}: weight {w.shape} and bias {b.shape} do not match")
      if i and w.shape[1] != self.weights[i - 1].shape[0]:
        raise ValueError(f"Layer {i + 1} expects {w.shape[1]} inputs, got {self.weights[i - 1].shape[0]}")
      if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
        raise ValueError(f"Layer {i + 1} has non-finite parameters")
    self.channels = tuple(self.channels)
    if len(self.channels) != self.n_inputs:
      raise ValueError(f"{len(self.channels)} channel names for {self.n_inputs} inputs")
    n_in, n_out = self.n_inputs, self.n_outputs
    self.input_mean = np.zeros(n_in) if self.input_mean is None else np.asarray(self.input_mean, float)
    self.input_scale = np.ones(n_in) if self.input_scale is None else np.asarray(self.input_scale, float)
    self.target_scale = (
      np.ones(n_out) if self.target_scale is None else np.asarray(self.target_scale, float)
    )
    if self.input_mean.shape != (n_in,) or self.input_scale.shape != (n_in,):
      raise ValueError("Input standardization constants do not match the input size")
    if self.target_scale.shape != (n_out,):
      raise ValueError("Target scale does not match the output size")
    if np.any(self.input_scale <= 0) or np.any(self.target_scale <= 0):
      raise ValueError("Standardization scales must be > 0")

  @property
  def layer_sizes(self) -> Tuple[int, ...]:
    return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

  @property
  def n_inputs(self) -> int:
    return self.weights[0].shape[1]

  @property
  def n_outputs(self) -> int:
    return self.weights[-1].shape[0]

  @property
  def param_count(self) -> int:
    return int(sum(w.size + b.size for w, b in zip(self.weights, self.biases)))

  def parameters(self) -> List[np.ndarray]:
    """Flat parameter order: W_1, b_1, W_2, b_2, ..."""
    out = []
    for w, b in zip(self.weights, self.biases):
      out += [w, b]
    return out

  def copy(self) -> "MlpModel":
    return MlpModel(
      [w.copy() for w in self.weights],
      [b.copy() for b in self.biases],
      self.channels,
      self.input_mean.copy(),
      self.input_scale.copy(),
      self.target_scale.copy(),
      dict(self.metadata),
    )


def param_count(layer_sizes: Sequence[int]) -> int:
  return int(sum(n_in * n_out + n_out for n_in, n_out in zip(layer_sizes, layer_sizes[1:])))


def init_mlp(
  layer_sizes: Sequence[int] = DEFAULT_LAYER_SIZES,
  seed: int = 0,
  channels: Optional[Sequence[str]] = None,
) -> MlpModel:
  """He-uniform weights (bound sqrt(6 / fan_in)) and zero biases."""
  if len(layer_sizes) < 2 or any(n <= 0 for n in layer_sizes):
    raise ValueError("layer_sizes needs at least two positive entries")
  rng = np.random.default_rng(seed)
  weights, biases = [], []
  for n_in, n_out in zip(layer_sizes, layer_sizes[1:]):
    bound = np.sqrt(6.0 / n_in)
    weights.append(rng.uniform(-bound, bound, size=(n_out, n_in)))
    biases.append(np.zeros(n_out))
  if channels is None:
    channels = (
      MEASUREMENT_CHANNELS
      if layer_sizes[0] == len(MEASUREMENT_CHANNELS)
      else tuple(f"in{i}" for i in range(layer_sizes[0]))
    )
  model = MlpModel(weights, biases, tuple(channels))
  logger.debug(f"Initialized MLP {model.layer_sizes} with {model.param_count} parameters")
  return model


def forward_layers(model: MlpModel, y0: np.ndarray) -> Tuple[List[np.ndarray], List[np.ndarray]]:
  """Pre-activations z_i and activations y_i (y_0 first) for a batch of rows."""
  y = np.atleast_2d(np.asarray(y0, dtype=float))
  if y.shape[1] != model.n_inputs:
    raise ValueError(f"Expected {model.n_inputs} inputs, got {y.shape[1]}")
  if not np.all(np.isfinite(y)):
    raise ValueError("Network input must be finite")
  pre, act = [], [y]
  for w, b in zip(model.weights, model.biases):
    z = y @ w.T + b
    y = relu(z)
    pre.append(z)
    act.append(y)
  return pre, act


def forward(model: MlpModel, y0: np.ndarray) -> np.ndarray:
  """Network output in standardized units; a 1-d input gives a 1-d output."""
  out = forward_layers(model, y0)[1][-1]
  return out[0] if np.ndim(y0) == 1 else out


def standardize(model: MlpModel, y0: np.ndarray) -> np.ndarray:
  return (np.asarray(y0, dtype=float) - model.input_mean) / model.input_scale


def predict(model: MlpModel, y0: np.ndarray) -> np.ndarray:
  """(NOx ppm, Soot %) from raw measurement rows."""
  return forward(model, standardize(model, y0)) * model.target_scale
