"""Mean-squared-error loss and its backpropagated gradient."""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .nn_model import MlpModel, forward_layers


@dataclass
class Gradient:
  weights: List[np.ndarray]
  biases: List[np.ndarray]

  def parameters(self) -> List[np.ndarray]:
    out = []
    for w, b in zip(self.weights, self.biases):
      out += [w, b]
    return out


def mse_loss(model: MlpModel, inputs: np.ndarray, targets: np.ndarray) -> float:
  """Mean of squared errors over the batch and both outputs."""
  out = forward_layers(model, inputs)[1][-1]
  return float(np.mean((out - np.atleast_2d(targets)) ** 2))


def loss_and_grad(
  model: MlpModel, inputs: np.ndarray, targets: np.ndarray
) -> Tuple[float, Gradient]:
  targets = np.atleast_2d(np.asarray(targets, dtype=float))
  pre, act = forward_layers(model, inputs)
  if targets.shape != act[-1].shape:
    raise ValueError(f"Targets {targets.shape} do not match outputs {act[-1].shape}")
  if targets.shape[0] == 0:
    raise ValueError("Gradient of an empty batch is undefined")
  residual = act[-1] - targets
  loss = float(np.mean(residual**2))

  delta = 2.0 * residual / residual.size
  grads_w: List[np.ndarray] = [None] * len(model.weights)  # type: ignore[list-item]
  grads_b: List[np.ndarray] = [None] * len(model.weights)  # type: ignore[list-item]
  for i in reversed(range(len(model.weights))):
    # relu subgradient is 0 at the kink
    delta = delta * (pre[i] > 0)
    grads_w[i] = delta.T @ act[i]
    grads_b[i] = delta.sum(axis=0)
    if i:
      delta = delta @ model.weights[i]
  return loss, Gradient(grads_w, grads_b)


def grad(model: MlpModel, inputs: np.ndarray, targets: np.ndarray) -> Gradient:
  """Gradient of the batch-mean MSE with respect to every W_i and b_i."""
  return loss_and_grad(model, inputs, targets)[1]
