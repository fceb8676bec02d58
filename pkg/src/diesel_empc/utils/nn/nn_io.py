"""Binary model files: magic, version, JSON header, little-endian float64 blob.

Layout::

    b"DEMNN" | uint16 version | uint32 header length | header (UTF-8 JSON) | blob

The header lists layer shapes, input channels and the standardization
constants; the blob holds W_1, b_1, W_2, b_2, ... in C order.
"""

import json
import logging
import struct
from pathlib import Path

import numpy as np

from ...errors import MissingArtifactError, ModelFormatError, UnsupportedVersionError
from .nn_model import MlpModel

logger = logging.getLogger(__name__)

MAGIC = b"DEMNN"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<5sHI")
_DTYPE = np.dtype("<f8")


def save_model(model: MlpModel, path: Path | str) -> Path:
  path = Path(path)
  path.parent.mkdir(parents=True, exist_ok=True)
  header = {
    "shapes": [list(w.shape) for w in model.weights],
    "channels": list(model.channels),
    "input_mean": model.input_mean.tolist(),
    "input_scale": model.input_scale.tolist(),
    "target_scale": model.target_scale.tolist(),
    "byte_order": "little",
    "metadata": model.metadata,
  }
  header_bytes = json.dumps(header).encode("utf-8")
  blob = b"".join(np.ascontiguousarray(p, dtype=_DTYPE).tobytes() for p in model.parameters())
  with open(path, "wb") as f:
    f.write(_PREFIX.pack(MAGIC, FORMAT_VERSION, len(header_bytes)))
    f.write(header_bytes)
    f.write(blob)
  logger.info(f"Saved model {model.layer_sizes} to {path}")
  return path


def load_model(path: Path | str) -> MlpModel:
  path = Path(path)
  if not path.exists():
    raise MissingArtifactError([str(path)])
  raw = path.read_bytes()
  if len(raw) < _PREFIX.size:
    raise ModelFormatError(f"{path} is truncated")
  magic, version, header_len = _PREFIX.unpack_from(raw)
  if magic != MAGIC:
    raise ModelFormatError(f"{path} is not a model file")
  if version != FORMAT_VERSION:
    raise UnsupportedVersionError(
      f"{path} has format version {version}; supported version is {FORMAT_VERSION}"
    )
  start = _PREFIX.size
  if len(raw) < start + header_len:
    raise ModelFormatError(f"{path} is truncated inside the header")
  try:
    header = json.loads(raw[start : start + header_len].decode("utf-8"))
    shapes = [tuple(int(d) for d in s) for s in header["shapes"]]
  except (ValueError, KeyError, TypeError) as e:
    raise ModelFormatError(f"Corrupt header in {path}: {e}") from e

  blob = raw[start + header_len :]
  expected = sum(r * c + r for r, c in shapes) * _DTYPE.itemsize
  if len(blob) != expected:
    raise ModelFormatError(
      f"{path} holds {len(blob)} parameter bytes, shapes require {expected}"
    )
  values = np.frombuffer(blob, dtype=_DTYPE)
  weights, biases, offset = [], [], 0
  for rows, cols in shapes:
    weights.append(values[offset : offset + rows * cols].reshape(rows, cols).astype(float))
    offset += rows * cols
    biases.append(values[offset : offset + rows].astype(float))
    offset += rows
  try:
    model = MlpModel(
      weights,
      biases,
      tuple(header["channels"]),
      np.asarray(header["input_mean"], dtype=float),
      np.asarray(header["input_scale"], dtype=float),
      np.asarray(header["target_scale"], dtype=float),
      header.get("metadata", {}),
    )
  except (ValueError, KeyError) as e:
    raise ModelFormatError(f"Inconsistent model in {path}: {e}") from e
  logger.debug(f"Loaded model {model.layer_sizes} from {path}")
  return model
