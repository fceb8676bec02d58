"""Scheduling grid over (engine speed, fuel rate) and bilinear table lookup."""

import logging
from dataclasses import dataclass
from typing import Iterator, Sequence, Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ...inputs import GridConfig, OperatingPoint

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScheduleGrid:
  speeds: Tuple[float, ...]
  fuels: Tuple[float, ...]

  def __post_init__(self):
    for name, axis in (("speeds", self.speeds), ("fuels", self.fuels)):
      if len(axis) < 2 or any(b <= a for a, b in zip(axis, axis[1:])):
        raise ValueError(f"Grid {name} must have >= 2 strictly ascending values")
    object.__setattr__(self, "speeds", tuple(float(s) for s in self.speeds))
    object.__setattr__(self, "fuels", tuple(float(f) for f in self.fuels))

  @classmethod
  def from_config(cls, cfg: GridConfig) -> "ScheduleGrid":
    return cls(tuple(cfg.speeds), tuple(cfg.fuels))

  @property
  def shape(self) -> Tuple[int, int]:
    return (len(self.speeds), len(self.fuels))

  @property
  def size(self) -> int:
    return len(self.speeds) * len(self.fuels)

  def node(self, i: int, j: int) -> OperatingPoint:
    return OperatingPoint(engine_speed=self.speeds[i], fuel_rate=self.fuels[j])

  def nodes(self) -> Iterator[Tuple[int, int, OperatingPoint]]:
    """Nodes in row-major (speed, fuel) order."""
    for i in range(len(self.speeds)):
      for j in range(len(self.fuels)):
        yield i, j, self.node(i, j)

  def clamp(self, rho: OperatingPoint) -> Tuple[float, float]:
    """Project a query onto the grid hull."""
    speed = min(max(rho.engine_speed, self.speeds[0]), self.speeds[-1])
    fuel = min(max(rho.fuel_rate, self.fuels[0]), self.fuels[-1])
    if (speed, fuel) != rho.as_tuple():
      logger.debug(f"Clamped scheduling query {rho.as_tuple()} to {(speed, fuel)}")
    return speed, fuel

  def contains(self, rho: OperatingPoint) -> bool:
    return self.clamp(rho) == rho.as_tuple()


class GridTable:
  """Bilinear interpolation of per-node arrays with queries clamped to the hull.

  `values` has shape (n_speeds, n_fuels, *item_shape); a lookup returns an
  array of `item_shape`.
  """

  def __init__(self, grid: ScheduleGrid, values: np.ndarray):
    values = np.asarray(values, dtype=float)
    if values.shape[:2] != grid.shape:
      raise ValueError(f"Table shape {values.shape[:2]} does not match grid {grid.shape}")
    self.grid = grid
    self.values = values
    self.item_shape = values.shape[2:]
    flat = values.reshape(grid.shape + (-1,))
    self._interp = RegularGridInterpolator(
      (np.array(grid.speeds), np.array(grid.fuels)), flat, method="linear"
    )

  def __call__(self, rho: OperatingPoint) -> np.ndarray:
    return self.at(*self.grid.clamp(rho))

  def at(self, speed: float, fuel: float) -> np.ndarray:
    out = self._interp(np.array([[speed, fuel]]))[0]
    return out.reshape(self.item_shape)


def stack_nodes(grid: ScheduleGrid, items: Sequence[np.ndarray]) -> np.ndarray:
  """Arrange row-major node items into a (n_speeds, n_fuels, ...) array."""
  if len(items) != grid.size:
    raise ValueError(f"Expected {grid.size} node items, got {len(items)}")
  arr = np.stack([np.asarray(v, dtype=float) for v in items])
  return arr.reshape(grid.shape + arr.shape[1:])
