"""Process setup: environment loading, package version and resolved settings.

This module loads `.env` once, exposes the package version and resolves the
CLI defaults (seed, output directory, plant file, worker count) from the
environment.
"""

import json
import logging
import os
from importlib.metadata import PackageNotFoundError, version
from importlib.resources import files
from pathlib import Path
from typing import Any, Dict, Optional, Type, TypeVar

from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError

from .errors import ConfigError, MissingArtifactError
from .inputs import SCHEMA_VERSION, PlantParams, Settings

logger = logging.getLogger(__name__)

# Load environment variables
load_dotenv()

ModelT = TypeVar("ModelT", bound=BaseModel)


def get_package_version() -> str:
  """Get the package version using importlib.metadata.

  Returns:
      str: Package version string or fallback if not found
  """
  try:
    package_version = version("diesel-empc")
    logger.debug(f"Loaded package version: {package_version}")
    return package_version
  except PackageNotFoundError:
    logger.warning(
      "Could not determine package version using importlib.metadata. "
      "Is the package installed correctly? Falling back to '?.?.?'."
    )
    return "?.?.?"


def _env_int(name: str, default: int) -> int:
  raw = os.environ.get(name)
  if raw is None or raw == "":
    return default
  try:
    return int(raw)
  except ValueError:
    raise ConfigError(f"Environment variable {name} must be an integer, got '{raw}'")


def load_settings(**overrides: Any) -> Settings:
  """Resolve settings from DIESEL_EMPC_* environment variables and overrides.

  Overrides whose value is None are ignored so argparse defaults can be passed
  straight through.
  """
  values: Dict[str, Any] = {
    "seed": _env_int("DIESEL_EMPC_SEED", 0),
    "out_dir": os.environ.get("DIESEL_EMPC_OUT", "out"),
    "plant_path": os.environ.get("DIESEL_EMPC_PLANT") or None,
    "workers": _env_int("DIESEL_EMPC_WORKERS", 1),
  }
  values.update({k: v for k, v in overrides.items() if v is not None})
  try:
    settings = Settings(**values)
  except ValidationError as e:
    raise ConfigError(f"Invalid settings: {e}") from e
  logger.debug(f"Resolved settings: {settings.model_dump()}")
  return settings


def default_config_path(name: str) -> Path:
  """Path of a JSON default shipped inside the package (data/<name>)."""
  return Path(str(files("diesel_empc").joinpath("data", name)))


def read_json(path: Path | str) -> Dict[str, Any]:
  path = Path(path)
  if not path.exists():
    raise MissingArtifactError([str(path)])
  try:
    with open(path, "r", encoding="utf-8") as f:
      data = json.load(f)
  except json.JSONDecodeError as e:
    raise ConfigError(f"Failed to parse {path}: {e}") from e
  if not isinstance(data, dict):
    raise ConfigError(f"Expected a JSON object in {path}")
  return data


def load_model_config(
  model_cls: Type[ModelT], path: Optional[Path | str], default_name: str
) -> ModelT:
  """Load and validate a pydantic config from `path` or the packaged default."""
  source = Path(path) if path else default_config_path(default_name)
  data = read_json(source)
  if data.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
    raise ConfigError(
      f"{source} has schema_version {data['schema_version']}, expected {SCHEMA_VERSION}"
    )
  data = {k: v for k, v in data.items() if k != "schema_version" or k in model_cls.model_fields}
  try:
    config = model_cls.model_validate(data)
  except ValidationError as e:
    raise ConfigError(f"Invalid {model_cls.__name__} in {source}: {e}") from e
  logger.info(f"Loaded {model_cls.__name__} from {source}")
  return config


def load_plant_params(path: Optional[Path | str] = None) -> PlantParams:
  """Reference plant parameters, or those in `path` when given."""
  return load_model_config(PlantParams, path, "plant.json")
