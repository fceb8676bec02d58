import json
import logging
import os
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from .errors import ConfigError
from .inputs import SCHEMA_VERSION, Scenario
from .settings import default_config_path

logger = logging.getLogger(__name__)


class ScenarioLoader:
  """Loads and validates the named controller tunings from a JSON file."""

  def __init__(self, scenarios_file: Optional[str] = None):
    """
    Initialize the ScenarioLoader.

    Args:
        scenarios_file: Path to the scenarios JSON file. If None, uses the
          DIESEL_EMPC_SCENARIOS env var, then the packaged default.
    """
    self.scenarios_file = (
      scenarios_file
      or os.getenv("DIESEL_EMPC_SCENARIOS")
      or str(default_config_path("scenarios.json"))
    )
    self.scenarios: Dict[str, Scenario] = {}

  def load_scenarios(self) -> Dict[str, Scenario]:
    """
    Load scenarios from the JSON file.

    Returns:
        Dictionary of validated scenarios in file order. Invalid entries are
        skipped with a warning.

    Raises:
        ConfigError: if the file is missing, unparsable, malformed or written
          for another schema version.
    """
    if not os.path.exists(self.scenarios_file):
      raise ConfigError(f"Scenarios file not found: {self.scenarios_file}")

    try:
      with open(self.scenarios_file, "r", encoding="utf-8") as f:
        data = json.load(f)
    except json.JSONDecodeError as e:
      raise ConfigError(f"Failed to parse scenarios file {self.scenarios_file}: {e}") from e

    if not isinstance(data, dict) or "scenarios" not in data:
      raise ConfigError("Invalid scenarios file format. Expected JSON with 'scenarios' key.")
    if data.get("schema_version") != SCHEMA_VERSION:
      raise ConfigError(
        f"Scenarios file {self.scenarios_file} has schema_version "
        f"{data.get('schema_version')}, expected {SCHEMA_VERSION}"
      )
    entries = data["scenarios"]
    if not isinstance(entries, list):
      raise ConfigError("Invalid scenarios format. Expected 'scenarios' to be a list.")

    loaded: Dict[str, Scenario] = {}
    for entry in entries:
      scenario = self._validate_scenario(entry)
      if scenario is None:
        name = entry.get("name", "unknown") if isinstance(entry, dict) else "unknown"
        logger.warning(f"Skipping invalid scenario: {name}")
      elif scenario.name in loaded:
        logger.warning(f"Duplicate scenario '{scenario.name}' ignored")
      else:
        loaded[scenario.name] = scenario

    self.scenarios = loaded
    logger.info(f"Loaded {len(loaded)} scenarios from {self.scenarios_file}")
    return loaded

  def _validate_scenario(self, entry: Any) -> Optional[Scenario]:
    if not isinstance(entry, dict):
      logger.error("Scenario entries must be JSON objects")
      return None
    try:
      return Scenario.model_validate(entry)
    except ValidationError as e:
      logger.error(f"Scenario {entry.get('name', 'unknown')} is invalid: {e}")
      return None

  def get_scenario(self, name: str) -> Optional[Scenario]:
    """
    Get a specific scenario by name, loading the file on first use.

    Args:
        name: Name of the scenario, e.g. "EMPC-B".

    Returns:
        Scenario or None if not found.
    """
    if not self.scenarios:
      self.load_scenarios()
    return self.scenarios.get(name)

  def list_scenarios(self) -> List[str]:
    """
    Get a list of all scenario names.

    Returns:
        List of scenario names.
    """
    if not self.scenarios:
      self.load_scenarios()
    return list(self.scenarios.keys())
