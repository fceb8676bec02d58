import json
import os
from unittest.mock import patch

import pytest

from diesel_empc.errors import ConfigError
from diesel_empc.scenarios import ScenarioLoader


def _write(tmp_path, data, name="scenarios.json"):
  path = tmp_path / name
  path.write_text(data if isinstance(data, str) else json.dumps(data), encoding="utf-8")
  return str(path)


class TestScenarioLoader:
  """Test cases for ScenarioLoader class."""

  def test_init_with_file_path(self):
    loader = ScenarioLoader("/path/to/scenarios.json")
    assert loader.scenarios_file == "/path/to/scenarios.json"
    assert loader.scenarios == {}

  @patch.dict(os.environ, {"DIESEL_EMPC_SCENARIOS": "/env/scenarios.json"})
  def test_init_with_env_var(self):
    loader = ScenarioLoader()
    assert loader.scenarios_file == "/env/scenarios.json"

  def test_init_falls_back_to_packaged_default(self):
    with patch.dict(os.environ, {}, clear=True):
      loader = ScenarioLoader()
    assert loader.scenarios_file.endswith(os.path.join("data", "scenarios.json"))

  def test_packaged_scenarios(self):
    with patch.dict(os.environ, {}, clear=True):
      scenarios = ScenarioLoader().load_scenarios()
    assert list(scenarios) == ["baseline", "EMPC-A", "EMPC-B", "EMPC-C", "EMPC-D"]
    assert not scenarios["baseline"].empc_enabled
    assert scenarios["EMPC-A"].nox_penalty == "low"
    assert scenarios["EMPC-B"].nox_penalty == "high"
    assert scenarios["EMPC-C"].nox_penalty == "none"
    assert scenarios["EMPC-C"].soot_limit_enabled
    assert scenarios["EMPC-C"].soot_max_ratio < scenarios["EMPC-D"].soot_max_ratio
    assert scenarios["EMPC-D"].soot_limit_enabled
    assert scenarios["EMPC-D"].nox_penalty == "high"
    assert scenarios["EMPC-B"].weights.eta > scenarios["EMPC-A"].weights.eta

  def test_load_scenarios_file_not_found(self):
    loader = ScenarioLoader("/nonexistent/file.json")
    with pytest.raises(ConfigError, match="not found"):
      loader.load_scenarios()

  def test_load_scenarios_invalid_json(self, tmp_path):
    loader = ScenarioLoader(_write(tmp_path, "invalid json content"))
    with pytest.raises(ConfigError, match="Failed to parse"):
      loader.load_scenarios()

  def test_load_scenarios_missing_key(self, tmp_path):
    loader = ScenarioLoader(_write(tmp_path, {"schema_version": 1, "other_key": []}))
    with pytest.raises(ConfigError, match="'scenarios' key"):
      loader.load_scenarios()

  def test_load_scenarios_not_list(self, tmp_path):
    loader = ScenarioLoader(_write(tmp_path, {"schema_version": 1, "scenarios": "x"}))
    with pytest.raises(ConfigError, match="to be a list"):
      loader.load_scenarios()

  def test_load_scenarios_wrong_schema_version(self, tmp_path):
    loader = ScenarioLoader(_write(tmp_path, {"schema_version": 2, "scenarios": []}))
    with pytest.raises(ConfigError, match="schema_version"):
      loader.load_scenarios()

  def test_load_scenarios_valid_data(self, tmp_path):
    data = {
      "schema_version": 1,
      "scenarios": [
        {"name": "baseline", "nox_penalty": "none"},
        {
          "name": "EMPC-D",
          "nox_penalty": "high",
          "soot_limit_enabled": True,
          "soot_max_ratio": 0.7,
          "weights": {"eta": 2.0, "horizon": 6},
        },
      ],
    }
    result = ScenarioLoader(_write(tmp_path, data)).load_scenarios()
    assert list(result) == ["baseline", "EMPC-D"]
    d = result["EMPC-D"]
    assert d.soot_max_ratio == 0.7
    assert d.weights.eta == 2.0
    assert d.weights.horizon == 6
    assert d.weights.soot_max is None

  def test_load_scenarios_skip_invalid(self, tmp_path):
    data = {
      "schema_version": 1,
      "scenarios": [
        {"name": "baseline", "soot_limit_enabled": True},
        {"name": "EMPC-X"},
        {"name": "EMPC-A", "weights": {"eta": -1.0}},
        "not an object",
        {"name": "EMPC-B", "nox_penalty": "high"},
      ],
    }
    result = ScenarioLoader(_write(tmp_path, data)).load_scenarios()
    assert list(result) == ["EMPC-B"]

  def test_duplicate_scenario_keeps_first(self, tmp_path):
    data = {
      "schema_version": 1,
      "scenarios": [
        {"name": "EMPC-A", "weights": {"eta": 0.1}},
        {"name": "EMPC-A", "weights": {"eta": 0.9}},
      ],
    }
    result = ScenarioLoader(_write(tmp_path, data)).load_scenarios()
    assert result["EMPC-A"].weights.eta == 0.1

  def test_get_scenario_loads_lazily(self, tmp_path):
    data = {"schema_version": 1, "scenarios": [{"name": "EMPC-C", "nox_penalty": "none"}]}
    loader = ScenarioLoader(_write(tmp_path, data))
    assert loader.get_scenario("EMPC-C").name == "EMPC-C"
    assert loader.get_scenario("EMPC-A") is None

  def test_list_scenarios(self, tmp_path):
    data = {
      "schema_version": 1,
      "scenarios": [{"name": "baseline", "nox_penalty": "none"}, {"name": "EMPC-A"}],
    }
    assert ScenarioLoader(_write(tmp_path, data)).list_scenarios() == ["baseline", "EMPC-A"]
