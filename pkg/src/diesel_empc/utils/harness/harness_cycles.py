"""Drive cycles: the step/ramp case study and seeded transient surrogates.

Real FTP and WHTC traces are external data, so the transient cycles here are
band-limited random profiles with the same warmup and active length, named
`ftp_like` and `whtc_like`. `ftp_like` uses denser knots and returns to idle
between bursts; `whtc_like` is smoother and stays loaded.
"""

import logging
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
import pandas as pd
from scipy.interpolate import PchipInterpolator

from ...inputs import IDLE_RPM, MAX_FUEL, MAX_RPM, CycleConfig, OperatingPoint

logger = logging.getLogger(__name__)

TransientKind = Literal["ftp_like", "whtc_like"]
CYCLE_NAMES = ("step_ramp", "ftp_like", "whtc_like")

# probability that an ftp_like knot is an idle stop
_IDLE_PROBABILITY = 0.2
_KIND_STREAM = {"ftp_like": 1, "whtc_like": 2}


@dataclass(frozen=True, eq=False)
class DriveCycle:
  """Speed [rpm] and fuel [mm^3/st] demand sampled every `dt` seconds."""

  name: str
  speed: np.ndarray
  fuel: np.ndarray
  warmup_duration: float
  dt: float
  seed: Optional[int] = None

  def __post_init__(self):
    if self.speed.shape != self.fuel.shape or self.speed.ndim != 1:
      raise ValueError("speed and fuel must be 1-d arrays of equal length")
    if np.any(self.speed < IDLE_RPM) or np.any(self.speed > MAX_RPM):
      raise ValueError(f"Cycle '{self.name}' leaves the speed envelope")
    if np.any(self.fuel < 0.0) or np.any(self.fuel > MAX_FUEL):
      raise ValueError(f"Cycle '{self.name}' leaves the fuel envelope")
    if not self.duration > self.warmup_duration:
      raise ValueError(f"Cycle '{self.name}' must last longer than its warmup")

  @property
  def n_steps(self) -> int:
    return len(self.speed)

  @property
  def duration(self) -> float:
    return self.n_steps * self.dt

  @property
  def warmup_steps(self) -> int:
    return int(round(self.warmup_duration / self.dt))

  @property
  def time(self) -> np.ndarray:
    return np.arange(self.n_steps) * self.dt

  def operating_point(self, k: int) -> OperatingPoint:
    return OperatingPoint(engine_speed=float(self.speed[k]), fuel_rate=float(self.fuel[k]))

  def as_frame(self) -> pd.DataFrame:
    return pd.DataFrame({"t": self.time, "engine_speed": self.speed, "w_inj_trg": self.fuel})


def _steps(seconds: float, dt: float) -> int:
  return int(round(seconds / dt))


def make_step_ramp_cycle(cfg: CycleConfig = CycleConfig()) -> DriveCycle:
  """Warmup, fuel tip-in and tip-out at fixed speed, then a speed ramp at fixed fuel."""
  dt = cfg.dt
  n_warm = _steps(cfg.step_warmup, dt)
  k_up = n_warm + _steps(cfg.tip_in_delay, dt)
  k_down = k_up + _steps(cfg.tip_in_duration, dt)
  k_ramp = k_down + _steps(cfg.ramp_delay, dt)
  n_ramp = _steps(cfg.ramp_duration, dt)
  n = k_ramp + n_ramp + 1 + _steps(cfg.step_tail, dt)

  fuel = np.full(n, cfg.step_fuel_base)
  fuel[k_up:k_down] = cfg.step_fuel_high
  speed = np.full(n, cfg.step_speed)
  ramp = np.linspace(cfg.step_speed, cfg.ramp_speed_end, n_ramp + 1)
  speed[k_ramp : k_ramp + n_ramp + 1] = ramp
  speed[k_ramp + n_ramp + 1 :] = cfg.ramp_speed_end
  return DriveCycle("step_ramp", speed, fuel, n_warm * dt, dt)


def _profile(
  rng: np.random.Generator,
  n: int,
  dt: float,
  spacing: float,
  low: float,
  high: float,
  idle: Optional[np.ndarray] = None,
) -> np.ndarray:
  n_knots = max(2, int(np.ceil(n * dt / spacing)) + 1)
  levels = rng.uniform(low, high, size=n_knots)
  if idle is not None:
    levels[idle] = low
  knots = np.arange(n_knots) * spacing
  values = PchipInterpolator(knots, levels)(np.arange(n) * dt)
  return np.clip(values, low, high)


def make_transient_cycle(
  kind: TransientKind, seed: int = 0, cfg: CycleConfig = CycleConfig()
) -> DriveCycle:
  """Warmup at the first active point, then a seeded band-limited profile."""
  if kind not in _KIND_STREAM:
    raise ValueError(f"Unknown transient cycle '{kind}', expected one of {list(_KIND_STREAM)}")
  dt = cfg.dt
  rng = np.random.default_rng([seed, _KIND_STREAM[kind]])
  n_active = _steps(cfg.transient_active, dt)
  n_warm = _steps(cfg.transient_warmup, dt)
  if kind == "ftp_like":
    spacing = cfg.ftp_knot_spacing
    n_knots = max(2, int(np.ceil(n_active * dt / spacing)) + 1)
    idle = rng.random(n_knots) < _IDLE_PROBABILITY
  else:
    spacing = cfg.whtc_knot_spacing
    idle = None
  speed = _profile(rng, n_active, dt, spacing, *cfg.speed_range, idle=idle)
  fuel = _profile(rng, n_active, dt, spacing, *cfg.fuel_range, idle=idle)
  speed = np.concatenate([np.full(n_warm, speed[0]), speed])
  fuel = np.concatenate([np.full(n_warm, fuel[0]), fuel])
  logger.debug(f"Built {kind} cycle (seed={seed}, {len(speed)} steps)")
  return DriveCycle(kind, speed, fuel, n_warm * dt, dt, seed)


def make_cycle(name: str, seed: int = 0, cfg: CycleConfig = CycleConfig()) -> DriveCycle:
  if name == "step_ramp":
    return make_step_ramp_cycle(cfg)
  if name in _KIND_STREAM:
    return make_transient_cycle(name, seed, cfg)
  raise ValueError(f"Unknown cycle '{name}', expected one of {list(CYCLE_NAMES)}")
