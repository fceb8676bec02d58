import math
from unittest.mock import patch

import numpy as np
import pytest

from diesel_empc.errors import (
  MissingArtifactError,
  ModelFormatError,
  TrainingDivergedError,
  UnsupportedVersionError,
)
from diesel_empc.inputs import ActuatorInput, DataGenConfig, OperatingPoint, TrainConfig
from diesel_empc.utils.data import SampleSet, SplitDataset
from diesel_empc.utils.nn import (
  MlpModel,
  NnEmissionSource,
  evaluate,
  forward,
  forward_layers,
  grad,
  init_mlp,
  learning_rate,
  load_model,
  loss_and_grad,
  mse_loss,
  param_count,
  predict,
  save_model,
  train,
)
from diesel_empc.utils.plant import MEASUREMENT_CHANNELS, plant_equilibrium


def _zero_model(sizes, last_bias=None, bias=0.0):
  weights = [np.zeros((n_out, n_in)) for n_in, n_out in zip(sizes, sizes[1:])]
  biases = [np.full(n_out, bias) for n_out in sizes[1:]]
  if last_bias is not None:
    biases[-1] = np.asarray(last_bias, dtype=float)
  return MlpModel(weights, biases, tuple(f"in{i}" for i in range(sizes[0])))


def _set(inputs, targets, kind="transient"):
  inputs = np.atleast_2d(inputs)
  channels = tuple(f"in{i}" for i in range(inputs.shape[1]))
  return SampleSet(channels, inputs, targets, [kind] * inputs.shape[0])


class TestForward:
  def test_parameter_count(self):
    assert param_count((10, 1024, 512, 32, 2)) == 552546
    assert init_mlp().param_count == 552546

  def test_relu_of_bias(self):
    model = _zero_model((10, 4, 4, 3, 2), last_bias=(3.0, -1.0))
    out = forward(model, np.ones(10))
    np.testing.assert_array_equal(out, [3.0, 0.0])

  def test_miniature_network_by_hand(self):
    weights = [
      [[1.0, 2.0], [3.0, -1.0]],
      [[1.0, -1.0], [0.5, 0.5]],
      [[-1.0, 1.0], [2.0, 0.0]],
      [[1.0, 1.0], [-1.0, 0.0]],
    ]
    biases = [[0.0, 1.0], [1.0, 0.0], [0.0, -1.0], [0.5, 0.5]]
    model = MlpModel(weights, biases, ("a", "b"))
    # layer outputs: (3, 3) -> (1, 3) -> (2, 1) -> (3.5, 0)
    out = forward(model, np.array([1.0, 1.0]))
    np.testing.assert_allclose(out, [3.5, 0.0], atol=1e-12)

  def test_batch_matches_rows(self):
    model = init_mlp((3, 5, 4, 2), seed=2)
    x = np.random.default_rng(0).standard_normal((6, 3))
    batch = forward(model, x)
    for row, expected in zip(x, batch):
      np.testing.assert_allclose(forward(model, row), expected, rtol=1e-12)

  def test_nonfinite_input(self):
    model = init_mlp((3, 4, 2))
    with pytest.raises(ValueError):
      forward(model, np.array([1.0, math.nan, 0.0]))

  def test_shape_chain_checked(self):
    with pytest.raises(ValueError):
      MlpModel([np.zeros((4, 3)), np.zeros((2, 5))], [np.zeros(4), np.zeros(2)], ("a", "b", "c"))

  def test_piecewise_affine_along_segment(self):
    model = init_mlp((3, 6, 6, 2), seed=5)
    rng = np.random.default_rng(1)
    a, b = rng.standard_normal((2, 3))
    s = np.linspace(0.0, 1.0, 2001)
    pre, act = forward_layers(model, a + s[:, None] * (b - a))
    pattern = np.hstack([z > 0 for z in pre])
    second = np.abs(np.diff(act[-1], n=2, axis=0)).max(axis=1)
    same = np.all(pattern[:-2] == pattern[1:-1], axis=1) & np.all(
      pattern[1:-1] == pattern[2:], axis=1
    )
    assert same.sum() > 1800
    assert np.all(second[same] < 1e-9)


class TestGrad:
  def test_zero_residual(self):
    model = init_mlp((3, 4, 4, 2), seed=0)
    x = np.random.default_rng(0).standard_normal((5, 3))
    g = grad(model, x, forward(model, x))
    for p in g.parameters():
      np.testing.assert_array_equal(p, 0.0)

  @pytest.mark.parametrize("seed", range(10))
  def test_matches_central_differences(self, seed):
    rng = np.random.default_rng(seed)
    model = init_mlp((3, 4, 4, 3, 2), seed=seed)
    for b in model.biases:
      b[:] = rng.uniform(0.05, 0.2, size=b.shape)
    x = rng.standard_normal((5, 3))
    t = rng.uniform(0.0, 2.0, size=(5, 2))
    g = grad(model, x, t)
    h = 1e-5
    for p, gp in zip(model.parameters(), g.parameters()):
      fd = np.zeros_like(p)
      for idx in np.ndindex(p.shape):
        saved = p[idx]
        p[idx] = saved + h
        up = mse_loss(model, x, t)
        p[idx] = saved - h
        down = mse_loss(model, x, t)
        p[idx] = saved
        fd[idx] = (up - down) / (2 * h)
      assert np.all(np.abs(gp - fd) <= 1e-4 * np.abs(fd) + 1e-8)

  def test_linear_in_residual(self):
    model = init_mlp((3, 4, 2), seed=3)
    x = np.random.default_rng(3).standard_normal((4, 3))
    y = forward(model, x)
    t = y + 0.5
    g1 = grad(model, x, t)
    g2 = grad(model, x, y - 2.0 * (y - t))
    for a, b in zip(g1.parameters(), g2.parameters()):
      np.testing.assert_allclose(b, 2.0 * a, rtol=1e-12, atol=1e-15)

  def test_empty_batch(self):
    model = init_mlp((3, 4, 2))
    with pytest.raises(ValueError):
      loss_and_grad(model, np.zeros((0, 3)), np.zeros((0, 2)))


class TestTraining:
  def test_learning_rate_schedule(self):
    cfg = TrainConfig()
    assert learning_rate(cfg, 0) == 1e-4
    assert learning_rate(cfg, 99) == 1e-4
    assert learning_rate(cfg, 100) == 5e-5
    assert learning_rate(cfg, 200) == 2.5e-5
    assert learning_rate(cfg, 250) == 2.5e-5

  def test_fits_single_sample(self):
    sample = _set([[1.0, 2.0]], [[2.0, 1.0]])
    data = SplitDataset(sample, sample, _set(np.zeros((0, 2)), np.zeros((0, 2))))
    cfg = TrainConfig(epochs=1000, batch_size=1, lr0=0.01, decay=1.0)
    model, report = train(data, cfg, init_model=_zero_model((2, 3, 3, 3, 2), bias=0.1))
    assert report.best_val_loss < 1e-6
    np.testing.assert_allclose(predict(model, np.array([1.0, 2.0])), [2.0, 1.0], atol=1e-2)
    assert len(report.learning_rates) == 1000

  def test_deterministic(self):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((50, 3))
    t = np.abs(x[:, :2]) + 0.1
    data = SplitDataset(_set(x[:40], t[:40]), _set(x[40:], t[40:]), _set(x[40:], t[40:]))
    cfg = TrainConfig(epochs=3, batch_size=10, hidden_sizes=(8, 4), lr0=1e-3, seed=4)
    a, _ = train(data, cfg)
    b, _ = train(data, cfg)
    for pa, pb in zip(a.parameters(), b.parameters()):
      np.testing.assert_array_equal(pa, pb)

  def test_divergence_reports_epoch(self):
    x = np.random.default_rng(1).standard_normal((8, 2))
    data = SplitDataset(_set(x, np.ones((8, 2))), _set(x, np.ones((8, 2))), _set(x, np.ones((8, 2))))
    cfg = TrainConfig(epochs=5, hidden_sizes=(3,))
    model = init_mlp((2, 3, 2))
    _, g = loss_and_grad(model, x, np.ones((8, 2)))
    with patch("diesel_empc.utils.nn.nn_train.loss_and_grad", return_value=(math.nan, g)):
      with pytest.raises(TrainingDivergedError) as excinfo:
        train(data, cfg)
    assert excinfo.value.epoch == 0

  def test_empty_train_partition(self):
    empty = _set(np.zeros((0, 2)), np.zeros((0, 2)))
    with pytest.raises(ValueError):
      train(SplitDataset(empty, empty, empty), TrainConfig(epochs=1))

  def test_evaluate_by_kind(self):
    model = _zero_model((2, 2, 2), last_bias=(1.0, 1.0))
    samples = SampleSet.concat(
      [_set([[0.0, 0.0]], [[3.0, 1.0]], "steady_state"), _set([[1.0, 1.0]], [[1.0, 2.0]])]
    )
    metrics = evaluate(model, samples)
    assert metrics["steady_state"]["nox_mae"] == pytest.approx(2.0)
    assert metrics["transient"]["soot_mae"] == pytest.approx(1.0)
    assert metrics["all"]["count"] == 2

  @pytest.mark.slow
  def test_reduces_validation_loss_on_plant_data(self):
    from diesel_empc.utils.data import generate_steady, generate_transient, prepare_dataset

    gen = DataGenConfig(n_steady=80, n_transient=3000, seed=3)
    prepared = prepare_dataset(generate_steady(gen), generate_transient(gen), seed=3)
    cfg = TrainConfig(epochs=300, hidden_sizes=(64, 32, 8), lr0=1e-3, seed=3)
    model, report = train(prepared.split, cfg)
    assert report.best_val_loss * 10 <= report.initial_val_loss
    grid = np.linspace(prepared.split.train.inputs.min(0), prepared.split.train.inputs.max(0), 50)
    assert np.all(np.isfinite(predict(model, grid)))


class TestModelIo:
  def test_round_trip_is_exact(self, tmp_path):
    model = init_mlp((10, 16, 8, 4, 2), seed=1)
    model.input_mean = np.linspace(0.0, 1.0, 10)
    model.input_scale = np.linspace(1.0, 2.0, 10)
    model.target_scale = np.array([300.0, 2.5])
    path = save_model(model, tmp_path / "model.bin")
    loaded = load_model(path)
    assert loaded.channels == MEASUREMENT_CHANNELS
    x = np.random.default_rng(0).standard_normal((7, 10))
    np.testing.assert_array_equal(predict(loaded, x), predict(model, x))

  def test_truncated(self, tmp_path):
    path = save_model(init_mlp((3, 4, 2)), tmp_path / "model.bin")
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(ModelFormatError):
      load_model(path)

  def test_version_mismatch(self, tmp_path):
    path = save_model(init_mlp((3, 4, 2)), tmp_path / "model.bin")
    raw = bytearray(path.read_bytes())
    raw[5:7] = (99).to_bytes(2, "little")
    path.write_bytes(bytes(raw))
    with pytest.raises(UnsupportedVersionError):
      load_model(path)

  def test_bad_magic(self, tmp_path):
    path = tmp_path / "model.bin"
    path.write_bytes(b"NOTAMODEL" + bytes(16))
    with pytest.raises(ModelFormatError):
      load_model(path)

  def test_missing(self, tmp_path):
    with pytest.raises(MissingArtifactError):
      load_model(tmp_path / "absent.bin")


class TestNnEmissionSource:
  def test_measure_uses_scaled_output(self):
    sizes = (len(MEASUREMENT_CHANNELS), 4, 2)
    weights = [np.zeros((4, sizes[0])), np.zeros((2, 4))]
    biases = [np.zeros(4), np.array([3.0, -1.0])]
    model = MlpModel(weights, biases, MEASUREMENT_CHANNELS, target_scale=np.array([100.0, 1.0]))
    source = NnEmissionSource(model)
    v = ActuatorInput(egr_valve=30.0, vgt_position=50.0)
    rho = OperatingPoint(engine_speed=1600.0, fuel_rate=50.0)
    e = source.measure(plant_equilibrium(v, rho), v, rho)
    assert e.nox == pytest.approx(300.0)
    assert e.soot == 0.0

  def test_unknown_channel(self):
    with pytest.raises(ValueError):
      NnEmissionSource(init_mlp((3, 4, 2)))
