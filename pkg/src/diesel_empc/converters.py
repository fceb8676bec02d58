"""Conversion of domain objects to JSON-ready structures."""

import dataclasses
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel

logger = logging.getLogger(__name__)


def to_dict(obj: Any) -> Any:
  """Converts numpy arrays, dataclasses and pydantic models to plain JSON types."""
  if isinstance(obj, (str, bool, type(None))):
    return obj
  if isinstance(obj, (int, np.integer)):
    return int(obj)
  if isinstance(obj, (float, np.floating)):
    value = float(obj)
    # JSON has no inf/nan; infinite bounds are written as strings
    if math.isinf(value):
      return "inf" if value > 0 else "-inf"
    if math.isnan(value):
      return "nan"
    return value
  if isinstance(obj, np.ndarray):
    return to_dict(obj.tolist())
  if isinstance(obj, (list, tuple)):
    return [to_dict(item) for item in obj]
  if isinstance(obj, dict):
    return {str(k): to_dict(v) for k, v in obj.items()}
  if isinstance(obj, Enum):
    return obj.value
  if isinstance(obj, Path):
    return str(obj)
  if isinstance(obj, BaseModel):
    return to_dict(obj.model_dump())
  if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
    return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}

  logger.warning(
    f"No specific to_dict handler for type {type(obj).__name__}, returning string representation."
  )
  return str(obj)


def to_array(value: Any, ndim: int | None = None) -> np.ndarray | None:
  """Inverse of to_dict for numeric payloads; keeps None as None."""
  if value is None:
    return None

  def _decode(v):
    if isinstance(v, list):
      return [_decode(x) for x in v]
    if v == "inf":
      return math.inf
    if v == "-inf":
      return -math.inf
    if v == "nan":
      return math.nan
    return v

  arr = np.asarray(_decode(value), dtype=float)
  if ndim is not None and arr.ndim != ndim:
    if arr.size == 0:
      return arr.reshape((0,) * ndim)
    raise ValueError(f"Expected {ndim}-d array, got shape {arr.shape}")
  return arr
