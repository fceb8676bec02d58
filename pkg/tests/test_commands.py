"""Tests for the command layer behind the CLI subcommands."""

import json
from pathlib import Path
from unittest.mock import MagicMock, patch

import numpy as np
import pandas as pd
import pytest

from diesel_empc import commands
from diesel_empc.errors import (
  ConfigError,
  MissingArtifactError,
  QpFailure,
  SettleError,
)
from diesel_empc.inputs import PlantParams, Scenario
from diesel_empc.utils.control import TELEMETRY_COLUMNS
from diesel_empc.utils.harness import DriveCycle, ScenarioRun, compute_metrics, write_run


def _run(name, cycle="step_ramp", nox=100.0, baseline=None):
  c = DriveCycle(cycle, np.full(30, 1600.0), np.full(30, 40.0), 1.0, 0.1, 5)
  frame = pd.DataFrame(0.0, index=range(30), columns=TELEMETRY_COLUMNS)
  frame["t"] = np.arange(30) * 0.1
  frame["nox"] = nox
  frame["soot"] = 1.0
  frame["empc_status"] = "optimal"
  metrics = compute_metrics(frame, c, name)
  metrics = metrics.with_deltas(baseline or metrics)
  return ScenarioRun(Scenario(name=name), cycle, frame, metrics)


class TestGenerateData:
  def test_writes_both_logs(self, tmp_path):
    summary = commands.generate_data(tmp_path, seed=11, params=PlantParams(), n_steady=4, n_transient=60)
    assert summary["steady"] == 4
    assert summary["transient"] == 60
    assert (tmp_path / commands.STEADY_FILE).exists()
    assert (tmp_path / commands.TRANSIENT_FILE).exists()

  def test_invalid_counts(self, tmp_path):
    with pytest.raises(ValueError):
      commands.generate_data(tmp_path, seed=0, params=PlantParams(), n_steady=-1)


class TestPrepareData:
  def test_missing_logs_listed(self, tmp_path):
    with pytest.raises(MissingArtifactError) as exc:
      commands.prepare_data(tmp_path, tmp_path / "prepared", seed=0)
    assert len(exc.value.missing) == 2
    assert exc.value.exit_code == 3


class TestTrainNn:
  @patch("diesel_empc.commands.save_model")
  @patch("diesel_empc.commands.train")
  @patch("diesel_empc.commands.read_split")
  def test_overrides_and_report(self, mock_read, mock_train, mock_save, tmp_path):
    model = MagicMock(layer_sizes=[10, 8, 2])
    history = MagicMock(
      initial_val_loss=2.0, best_val_loss=0.5, best_epoch=3, test_metrics={"steady": [1.0, 0.1]}
    )
    mock_train.return_value = (model, history)

    out = tmp_path / "model.bin"
    summary = commands.train_nn(tmp_path, out, seed=4, epochs=5, hidden_sizes=[8])

    cfg = mock_train.call_args.args[1]
    assert (cfg.epochs, cfg.hidden_sizes, cfg.seed) == (5, (8,), 4)
    assert cfg.batch_size == 40
    mock_save.assert_called_once_with(model, out)
    assert summary["best_epoch"] == 3
    sidecar = json.loads((tmp_path / "model.report.json").read_text(encoding="utf-8"))
    assert sidecar["config"]["hidden_sizes"] == [8]
    assert sidecar["best_val_loss"] == 0.5


class TestSimulate:
  def test_unknown_scenario(self, tmp_path):
    with pytest.raises(ConfigError, match="Unknown scenario"):
      commands.simulate("step_ramp", "EMPC-Q", tmp_path, tmp_path, 0, PlantParams())

  def test_unknown_cycle(self, tmp_path):
    with pytest.raises(ConfigError, match="cycle"):
      commands.simulate("nedc", "all", tmp_path, tmp_path, 0, PlantParams())

  def test_missing_artifacts(self, tmp_path):
    with pytest.raises(MissingArtifactError):
      commands.simulate("step_ramp", "all", tmp_path, tmp_path, 0, PlantParams())

  @patch("diesel_empc.commands.render_report")
  @patch("diesel_empc.commands.run_sweep")
  @patch("diesel_empc.commands.ArtifactPaths")
  def test_single_scenario_runs_with_baseline(self, mock_paths, mock_sweep, mock_render, tmp_path):
    base = _run("baseline")
    mock_sweep.return_value = {"baseline": base, "EMPC-B": _run("EMPC-B", baseline=base.metrics)}

    summary = commands.simulate("step_ramp", "EMPC-B", tmp_path, tmp_path, 5, PlantParams(), source="truth")

    mock_paths.in_dir.return_value.load.assert_called_once_with("truth", PlantParams())
    scenarios = mock_sweep.call_args.args[1]
    assert [s.name for s in scenarios] == ["baseline", "EMPC-B"]
    assert mock_render.call_args.args[1] == Path(tmp_path) / "step_ramp"
    assert summary["seed"] == 5
    assert list(summary["metrics"]) == ["baseline", "EMPC-B"]

  @patch("diesel_empc.commands.render_report")
  @patch("diesel_empc.commands.run_sweep", return_value={})
  @patch("diesel_empc.commands.ArtifactPaths")
  def test_all_runs_every_scenario(self, mock_paths, mock_sweep, mock_render, tmp_path):
    commands.simulate("ftp_like", "all", tmp_path, tmp_path, 0, PlantParams(), workers=3)
    scenarios = mock_sweep.call_args.args[1]
    assert [s.name for s in scenarios] == ["baseline", "EMPC-A", "EMPC-B", "EMPC-C", "EMPC-D"]
    assert mock_sweep.call_args.kwargs["workers"] == 3


class TestReport:
  def test_collects_saved_runs(self, tmp_path):
    base = _run("baseline")
    write_run(base, tmp_path / "runs" / "step_ramp" / "baseline")
    write_run(_run("EMPC-A", nox=80.0, baseline=base.metrics), tmp_path / "runs" / "step_ramp" / "EMPC-A")

    summary = commands.report([tmp_path / "runs"], tmp_path / "report")

    assert summary["runs"] == 2
    frame = pd.read_csv(tmp_path / "report" / "metrics.csv")
    assert sorted(frame["scenario"]) == ["EMPC-A", "baseline"]
    row = frame.set_index("scenario").loc["EMPC-A"]
    assert row["delta_cumulative_nox_pct"] == pytest.approx(-20.0)

  def test_missing_root(self, tmp_path):
    with pytest.raises(MissingArtifactError):
      commands.report([tmp_path / "absent"], tmp_path / "report")

  def test_no_runs_found(self, tmp_path):
    with pytest.raises(MissingArtifactError, match="metrics.json"):
      commands.report([tmp_path], tmp_path / "report")


class TestRunCommand:
  @pytest.mark.parametrize(
    "error, code",
    [
      (ConfigError("bad"), 2),
      (MissingArtifactError(["a.json"]), 3),
      (SettleError("no equilibrium"), 4),
      (QpFailure("infeasible"), 4),
      (ValueError("bad input"), 2),
    ],
  )
  def test_errors_map_to_exit_codes(self, error, code):
    failing = MagicMock(side_effect=error)
    with patch.dict(commands.COMMANDS, {"report": failing}):
      assert commands.run_command("report", dirs=[], out_dir="x") == code
    failing.assert_called_once_with(dirs=[], out_dir="x")

  def test_success(self):
    ok = MagicMock(return_value={"runs": 1})
    with patch.dict(commands.COMMANDS, {"report": ok}):
      assert commands.run_command("report") == 0

  def test_unknown_command(self):
    assert commands.run_command("deploy") == 2

  def test_unexpected_errors_propagate(self):
    with patch.dict(commands.COMMANDS, {"report": MagicMock(side_effect=RuntimeError("bug"))}):
      with pytest.raises(RuntimeError):
        commands.run_command("report")
