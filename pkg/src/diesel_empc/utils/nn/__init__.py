"""Emissions network utility modules.

This package contains the multilayer ReLU emissions model:
- nn_model: parameters, initialization, forward pass and prediction
- nn_backprop: MSE loss and backpropagated gradients
- nn_train: momentum SGD training, learning-rate schedule and evaluation
- nn_io: versioned binary model files
- nn_source: network-backed emission source
"""

from .nn_backprop import Gradient, grad, loss_and_grad, mse_loss
from .nn_io import FORMAT_VERSION, MAGIC, load_model, save_model
from .nn_model import (
  DEFAULT_LAYER_SIZES,
  MlpModel,
  forward,
  forward_layers,
  init_mlp,
  param_count,
  predict,
  relu,
  standardize,
)
from .nn_source import NnEmissionSource
from .nn_train import TrainReport, evaluate, learning_rate, train

__all__ = [
  "Gradient",
  "grad",
  "loss_and_grad",
  "mse_loss",
  "FORMAT_VERSION",
  "MAGIC",
  "load_model",
  "save_model",
  "DEFAULT_LAYER_SIZES",
  "MlpModel",
  "forward",
  "forward_layers",
  "init_mlp",
  "param_count",
  "predict",
  "relu",
  "standardize",
  "NnEmissionSource",
  "TrainReport",
  "evaluate",
  "learning_rate",
  "train",
]
