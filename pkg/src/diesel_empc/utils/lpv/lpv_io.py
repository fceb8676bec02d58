"""JSON files for LPV grid models and target look-up tables."""

import json
import logging
from pathlib import Path
from typing import Any, Dict

import numpy as np

from ...converters import to_array, to_dict
from ...errors import MissingArtifactError, ModelFormatError, UnsupportedVersionError
from .lpv_grid import ScheduleGrid
from .lpv_maps import MAP_NAMES, TargetMaps
from .lpv_model import DISTURBANCE_NAMES, INPUT_NAMES, STATE_NAMES, LocalModel, LpvGridModel

logger = logging.getLogger(__name__)

LPV_FORMAT_VERSION = 1

_NODE_ARRAYS = ("A", "B", "x_ss", "u_ss", "sigma_x", "sigma_u", "Bf", "d_ss", "sigma_d")


def _write(payload: Dict[str, Any], path: Path | str) -> Path:
  path = Path(path)
  path.parent.mkdir(parents=True, exist_ok=True)
  with open(path, "w", encoding="utf-8") as f:
    json.dump(to_dict(payload), f, indent=1)
  return path


def _read(path: Path | str, kind: str) -> Dict[str, Any]:
  path = Path(path)
  if not path.exists():
    raise MissingArtifactError([str(path)])
  try:
    with open(path, "r", encoding="utf-8") as f:
      data = json.load(f)
  except (json.JSONDecodeError, UnicodeDecodeError) as e:
    raise ModelFormatError(f"Failed to parse {path}: {e}") from e
  if not isinstance(data, dict) or data.get("format") != kind:
    raise ModelFormatError(f"{path} is not a {kind} file")
  version = data.get("format_version")
  if version != LPV_FORMAT_VERSION:
    raise UnsupportedVersionError(
      f"{path} has format version {version}; supported version is {LPV_FORMAT_VERSION}"
    )
  return data


def save_lpv(model: LpvGridModel, path: Path | str) -> Path:
  nf = len(model.grid.fuels)
  nodes = []
  for k, local in enumerate(model.locals):
    node = {"i": k // nf, "j": k % nf}
    node.update({name: getattr(local, name) for name in _NODE_ARRAYS})
    node.update(
      {
        "rollout_error": local.rollout_error,
        "flagged": local.flagged,
        "projected": local.projected,
        "substituted_from": local.substituted_from,
      }
    )
    nodes.append(node)
  payload = {
    "format": "lpv",
    "format_version": LPV_FORMAT_VERSION,
    "kind": model.kind,
    "states": STATE_NAMES[model.kind],
    "inputs": INPUT_NAMES[model.kind],
    "disturbances": DISTURBANCE_NAMES[model.kind],
    "grid": {"speeds": model.grid.speeds, "fuels": model.grid.fuels},
    "metadata": model.metadata,
    "nodes": nodes,
  }
  path = _write(payload, path)
  logger.info(f"Saved {model.kind} LPV model ({len(nodes)} nodes) to {path}")
  return path


def load_lpv(path: Path | str) -> LpvGridModel:
  data = _read(path, "lpv")
  try:
    grid = ScheduleGrid(tuple(data["grid"]["speeds"]), tuple(data["grid"]["fuels"]))
    nodes = sorted(data["nodes"], key=lambda n: (n["i"], n["j"]))
    locals_ = [
      LocalModel(
        **{name: to_array(node.get(name)) for name in _NODE_ARRAYS},
        rollout_error=float(to_array(node.get("rollout_error", 0.0))),
        flagged=bool(node.get("flagged", False)),
        projected=bool(node.get("projected", False)),
        substituted_from=node.get("substituted_from"),
      )
      for node in nodes
    ]
    model = LpvGridModel(data["kind"], grid, locals_, data.get("metadata", {}))
  except (KeyError, TypeError, ValueError) as e:
    raise ModelFormatError(f"Inconsistent LPV model in {path}: {e}") from e
  logger.debug(f"Loaded {model.kind} LPV model from {path}")
  return model


def save_target_maps(maps: TargetMaps, path: Path | str) -> Path:
  payload = {
    "format": "target_maps",
    "format_version": LPV_FORMAT_VERSION,
    "grid": {"speeds": maps.grid.speeds, "fuels": maps.grid.fuels},
    "tables": {name: maps.table(name) for name in MAP_NAMES},
    "metadata": maps.metadata,
  }
  path = _write(payload, path)
  logger.info(f"Saved target maps to {path}")
  return path


def load_target_maps(path: Path | str) -> TargetMaps:
  data = _read(path, "target_maps")
  try:
    grid = ScheduleGrid(tuple(data["grid"]["speeds"]), tuple(data["grid"]["fuels"]))
    values = np.stack([to_array(data["tables"][name], ndim=2) for name in MAP_NAMES], axis=-1)
    return TargetMaps(grid, values, data.get("metadata", {}))
  except (KeyError, TypeError, ValueError) as e:
    raise ModelFormatError(f"Inconsistent target maps in {path}: {e}") from e
