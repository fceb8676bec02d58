"""Mini-batch SGD with momentum and a step learning-rate schedule."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ...errors import TrainingDivergedError
from ...inputs import TrainConfig
from ..data.data_dataset import KINDS, TARGET_COLUMNS, SampleSet, SplitDataset
from .nn_backprop import loss_and_grad, mse_loss
from .nn_model import MlpModel, init_mlp, predict, standardize

logger = logging.getLogger(__name__)


@dataclass
class TrainReport:
  train_loss: List[float] = field(default_factory=list)
  val_loss: List[float] = field(default_factory=list)
  learning_rates: List[float] = field(default_factory=list)
  initial_val_loss: float = math.nan
  best_epoch: int = -1
  best_val_loss: float = math.inf
  test_metrics: Dict[str, Dict[str, float]] = field(default_factory=dict)


def learning_rate(cfg: TrainConfig, epoch: int) -> float:
  """lr0 scaled by `decay` once every `decay_every` epochs."""
  if epoch < 0:
    raise ValueError("epoch must be >= 0")
  return cfg.lr0 * cfg.decay ** (epoch // cfg.decay_every)


def _scales(values: np.ndarray, rms: bool) -> np.ndarray:
  scale = np.sqrt(np.mean(values**2, axis=0)) if rms else values.std(axis=0)
  return np.where(scale > 0, scale, 1.0)


def evaluate(model: MlpModel, samples: SampleSet) -> Dict[str, Dict[str, float]]:
  """Mean absolute NOx/Soot errors in physical units, per sample kind and overall."""
  if samples.channels != model.channels:
    raise ValueError(f"Sample channels {samples.channels} differ from model {model.channels}")
  metrics: Dict[str, Dict[str, float]] = {}
  groups = {kind: samples.of_kind(kind) for kind in KINDS}
  groups["all"] = samples
  for name, group in groups.items():
    if len(group) == 0:
      continue
    err = np.abs(predict(model, group.inputs) - group.targets).mean(axis=0)
    metrics[name] = {
      f"{TARGET_COLUMNS[0]}_mae": float(err[0]),
      f"{TARGET_COLUMNS[1]}_mae": float(err[1]),
      "count": float(len(group)),
    }
  return metrics


def train(
  data: SplitDataset, cfg: TrainConfig = TrainConfig(), init_model: Optional[MlpModel] = None
) -> tuple[MlpModel, TrainReport]:
  """Train on `data.train` and keep the parameters with the lowest validation loss.

  Standardization constants are taken from the training partition. Batches are
  drawn in a seeded shuffled order, so equal seeds give identical parameters.
  """
  train_set = data.train
  if len(train_set) == 0:
    raise ValueError("Training partition is empty")
  valid_set = data.validation if len(data.validation) else train_set

  if init_model is None:
    layer_sizes = (len(train_set.channels), *cfg.hidden_sizes, len(TARGET_COLUMNS))
    model = init_mlp(layer_sizes, cfg.seed, train_set.channels)
  else:
    if init_model.n_inputs != len(train_set.channels):
      raise ValueError("Initial model input size does not match the dataset")
    model = init_model.copy()
    model.channels = train_set.channels
  model.input_mean = train_set.inputs.mean(axis=0)
  model.input_scale = _scales(train_set.inputs, rms=False)
  model.target_scale = _scales(train_set.targets, rms=True)

  x_train = standardize(model, train_set.inputs)
  t_train = train_set.targets / model.target_scale
  x_valid = standardize(model, valid_set.inputs)
  t_valid = valid_set.targets / model.target_scale

  params = model.parameters()
  velocity = [np.zeros_like(p) for p in params]
  rng = np.random.default_rng(cfg.seed)
  report = TrainReport(initial_val_loss=mse_loss(model, x_valid, t_valid))
  best = model.copy()
  report.best_val_loss = report.initial_val_loss
  n = len(train_set)
  logger.info(
    f"Training {model.layer_sizes} on {n} samples for {cfg.epochs} epochs "
    f"(batch {cfg.batch_size}, lr0 {cfg.lr0:g})"
  )

  with np.errstate(over="ignore", invalid="ignore"):
    for epoch in range(cfg.epochs):
      lr = learning_rate(cfg, epoch)
      order = rng.permutation(n)
      total = 0.0
      for start in range(0, n, cfg.batch_size):
        idx = order[start : start + cfg.batch_size]
        loss, g = loss_and_grad(model, x_train[idx], t_train[idx])
        if not math.isfinite(loss):
          raise TrainingDivergedError(epoch)
        total += loss * len(idx)
        for p, v, dp in zip(params, velocity, g.parameters()):
          v *= cfg.momentum
          v -= lr * dp
          p += v
      val = mse_loss(model, x_valid, t_valid)
      if not math.isfinite(val):
        raise TrainingDivergedError(epoch)
      report.train_loss.append(total / n)
      report.val_loss.append(val)
      report.learning_rates.append(lr)
      if val < report.best_val_loss:
        report.best_val_loss = val
        report.best_epoch = epoch
        best = model.copy()
      logger.debug(f"Epoch {epoch}: train {total / n:.6g}, validation {val:.6g}, lr {lr:g}")
      if (epoch + 1) % 100 == 0:
        logger.info(f"Epoch {epoch + 1}/{cfg.epochs}: validation loss {val:.6g}")

  best.metadata.update(
    {"best_epoch": report.best_epoch, "epochs": cfg.epochs, "seed": cfg.seed}
  )
  if len(data.test):
    report.test_metrics = evaluate(best, data.test)
    logger.info(f"Test metrics: {report.test_metrics}")
  return best, report
