"""Unit tests for main_entry.py module.

Covers argument parsing, settings resolution and dispatch to the command layer.
"""

import json
import os
from pathlib import Path
from unittest.mock import patch

import pytest

from diesel_empc import main_entry
from diesel_empc.inputs import PlantParams


@pytest.fixture(autouse=True)
def isolated(tmp_path):
  """No DIESEL_EMPC_* leakage, no log file in the repo, no real logging setup."""
  with patch.dict(os.environ, {}):
    for key in list(os.environ):
      if key.startswith("DIESEL_EMPC_"):
        del os.environ[key]
    with patch("diesel_empc.main_entry.setup_logging") as mock_setup:
      yield mock_setup


@pytest.fixture
def mock_run():
  with patch("diesel_empc.main_entry.run_command", return_value=0) as mock:
    yield mock


class TestParseArgs:
  def test_global_flags_before_and_after_subcommand(self):
    before = main_entry._parse_args(["--seed", "3", "--out", "o", "report", "a"])
    after = main_entry._parse_args(["report", "a", "--seed", "3", "--out", "o"])
    for args in (before, after):
      assert args.seed == 3
      assert args.out == "o"
      assert args.dirs == ["a"]

  def test_unset_flags_are_absent(self):
    args = main_entry._parse_args(["report", "a"])
    assert not hasattr(args, "seed")
    assert not hasattr(args, "plant")

  def test_simulate_defaults(self):
    args = main_entry._parse_args(["simulate", "--cycle", "whtc_like", "--artifacts", "art"])
    assert args.scenario == "all"
    assert args.source == "nn"

  def test_unknown_cycle_rejected(self):
    with pytest.raises(SystemExit) as exc:
      main_entry._parse_args(["simulate", "--cycle", "nedc", "--artifacts", "art"])
    assert exc.value.code == 2


class TestLoggingSetup:
  def test_log_level_flag_passed_to_setup(self, mock_run, isolated):
    main_entry.main(["report", "a", "--log-level", "DEBUG"])
    isolated.assert_called_once_with(level="DEBUG")

  def test_no_flag_keeps_environment_level(self, mock_run, isolated):
    main_entry.main(["report", "a"])
    isolated.assert_called_once_with(level=None)


class TestMain:
  def test_version(self, capsys, mock_run):
    with patch("diesel_empc.main_entry.get_package_version", return_value="9.9.9"):
      assert main_entry.main(["--version"]) == 0
    assert capsys.readouterr().out.strip() == "9.9.9"
    mock_run.assert_not_called()

  def test_no_command_prints_help(self, capsys, mock_run):
    assert main_entry.main([]) == 2
    assert "COMMAND" in capsys.readouterr().err
    mock_run.assert_not_called()

  def test_generate_data(self, mock_run, isolated):
    code = main_entry.main(["--seed", "7", "--out", "raw", "generate-data", "--n-steady", "10"])
    assert code == 0
    isolated.assert_called_once()
    mock_run.assert_called_once_with(
      "generate-data",
      out_dir=Path("raw"),
      seed=7,
      params=PlantParams(),
      n_steady=10,
      n_transient=None,
    )

  def test_prepare_data_needs_no_plant(self, mock_run):
    with patch("diesel_empc.main_entry.load_plant_params") as mock_plant:
      main_entry.main(["prepare-data", "--data", "raw", "--eps", "12.5"])
    mock_plant.assert_not_called()
    mock_run.assert_called_once_with(
      "prepare-data", data_dir=Path("raw"), out_dir=Path("out"), seed=0, eps=12.5
    )

  def test_train_nn_writes_into_out(self, mock_run):
    main_entry.main(["--out", "art", "train-nn", "--data", "prep", "--epochs", "2", "--hidden", "16", "8"])
    kwargs = mock_run.call_args.kwargs
    assert kwargs["out_path"] == Path("art") / "emissions_nn.bin"
    assert kwargs["hidden_sizes"] == [16, 8]
    assert kwargs["epochs"] == 2
    assert kwargs["config_path"] is None

  def test_identify_lpv(self, mock_run):
    main_entry.main(["identify-lpv", "--nn", "art/emissions_nn.bin", "--workers", "2", "--no-validate"])
    kwargs = mock_run.call_args.kwargs
    assert kwargs["nn_path"] == Path("art/emissions_nn.bin")
    assert kwargs["workers"] == 2
    assert kwargs["validate"] is False

  def test_simulate_with_dump_dir(self, mock_run):
    main_entry.main(
      [
        "--dump-qp-on-error", "dumps",
        "simulate", "--cycle", "step_ramp", "--scenario", "EMPC-C",
        "--artifacts", "art", "--source", "truth",
      ]
    )
    kwargs = mock_run.call_args.kwargs
    assert kwargs["cycle_name"] == "step_ramp"
    assert kwargs["scenario_name"] == "EMPC-C"
    assert kwargs["dump_dir"] == Path("dumps")
    assert kwargs["source"] == "truth"
    assert kwargs["scenarios_file"] is None

  def test_report(self, mock_run):
    main_entry.main(["--out", "rep", "report", "runs/a", "runs/b"])
    mock_run.assert_called_once_with(
      "report", dirs=[Path("runs/a"), Path("runs/b")], out_dir=Path("rep")
    )

  def test_env_defaults(self, mock_run):
    with patch.dict(os.environ, {"DIESEL_EMPC_SEED": "42", "DIESEL_EMPC_OUT": "envout"}):
      main_entry.main(["prepare-data", "--data", "raw"])
    kwargs = mock_run.call_args.kwargs
    assert kwargs["seed"] == 42
    assert kwargs["out_dir"] == Path("envout")

  def test_exit_code_is_passed_through(self, mock_run):
    mock_run.return_value = 4
    assert main_entry.main(["report", "runs"]) == 4

  def test_custom_plant_file(self, mock_run, tmp_path):
    plant = tmp_path / "plant.json"
    plant.write_text(json.dumps({"schema_version": 1, "tau_soot": 0.6}), encoding="utf-8")
    main_entry.main(["--plant", str(plant), "generate-data"])
    assert mock_run.call_args.kwargs["params"].tau_soot == 0.6

  def test_missing_plant_file(self, mock_run, tmp_path):
    code = main_entry.main(["--plant", str(tmp_path / "absent.json"), "generate-data"])
    assert code == 3
    mock_run.assert_not_called()

  def test_bad_plant_schema(self, mock_run, tmp_path):
    plant = tmp_path / "plant.json"
    plant.write_text(json.dumps({"schema_version": 5}), encoding="utf-8")
    assert main_entry.main(["--plant", str(plant), "simulate", "--cycle", "step_ramp", "--artifacts", "a"]) == 2
    mock_run.assert_not_called()

  def test_bad_env_value(self, mock_run):
    with patch.dict(os.environ, {"DIESEL_EMPC_WORKERS": "many"}):
      assert main_entry.main(["report", "runs"]) == 2
    mock_run.assert_not_called()
