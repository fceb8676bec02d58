import math
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SCHEMA_VERSION = 1

# Operating envelope of the reference engine.
IDLE_RPM = 800.0
MAX_RPM = 3200.0
MAX_FUEL = 120.0

# Base sampling period [s].
DT = 0.1


def _finite(v: float, name: str) -> float:
  if not math.isfinite(v):
    raise ValueError(f"{name} must be finite")
  return v


# --- Domain value types ---


class OperatingPoint(BaseModel):
  """Scheduling variable: engine speed [rpm] and fuel injection rate [mm^3/st]."""

  model_config = ConfigDict(frozen=True)

  engine_speed: float
  fuel_rate: float

  @field_validator("engine_speed")
  @classmethod
  def speed_in_envelope(cls, v: float) -> float:
    _finite(v, "engine_speed")
    if not IDLE_RPM <= v <= MAX_RPM:
      raise ValueError(f"engine_speed must be within [{IDLE_RPM}, {MAX_RPM}] rpm")
    return v

  @field_validator("fuel_rate")
  @classmethod
  def fuel_nonnegative(cls, v: float) -> float:
    _finite(v, "fuel_rate")
    if v < 0:
      raise ValueError("fuel_rate must be >= 0")
    return v

  def as_tuple(self) -> Tuple[float, float]:
    return (self.engine_speed, self.fuel_rate)


class AirpathState(BaseModel):
  """Intake manifold pressure [kPa] and EGR rate [-]."""

  model_config = ConfigDict(frozen=True)

  intake_pressure: float
  egr_rate: float

  @field_validator("intake_pressure")
  @classmethod
  def pressure_positive(cls, v: float) -> float:
    _finite(v, "intake_pressure")
    if v <= 0:
      raise ValueError("intake_pressure must be > 0")
    return v

  @field_validator("egr_rate")
  @classmethod
  def rate_is_fraction(cls, v: float) -> float:
    _finite(v, "egr_rate")
    if not 0.0 <= v <= 1.0:
      raise ValueError("egr_rate must be within [0, 1]")
    return v

  def as_array(self) -> np.ndarray:
    return np.array([self.intake_pressure, self.egr_rate])


class ActuatorInput(BaseModel):
  """EGR valve [% open] and VGT position [% closed]."""

  model_config = ConfigDict(frozen=True)

  egr_valve: float
  vgt_position: float

  @field_validator("egr_valve", "vgt_position")
  @classmethod
  def percent_range(cls, v: float) -> float:
    _finite(v, "actuator position")
    if not 0.0 <= v <= 100.0:
      raise ValueError("actuator positions must be within [0, 100]")
    return v

  def as_array(self) -> np.ndarray:
    return np.array([self.egr_valve, self.vgt_position])

  @classmethod
  def from_array(cls, v) -> "ActuatorInput":
    return cls(egr_valve=float(v[0]), vgt_position=float(v[1]))


class EmissionState(BaseModel):
  """Feedgas NOx [ppm] and Soot [% opacity]."""

  model_config = ConfigDict(frozen=True)

  nox: float
  soot: float

  @field_validator("nox", "soot")
  @classmethod
  def nonnegative(cls, v: float) -> float:
    _finite(v, "emission")
    if v < 0:
      raise ValueError("emissions must be >= 0")
    return v

  def as_array(self) -> np.ndarray:
    return np.array([self.nox, self.soot])


# --- Plant parameters ---


class PlantParams(BaseModel):
  """Coefficients of the synthetic mean-value engine (reference plant)."""

  schema_version: int = SCHEMA_VERSION
  name: str = "reference"

  # ambient and envelope
  p_amb: float = 101.3
  idle_rpm: float = IDLE_RPM
  max_rpm: float = MAX_RPM
  max_fuel: float = MAX_FUEL

  # flow maps [g/s]
  k_cyl: float = 7.5e-4  # cylinder charge flow per (kPa * rpm)
  k_fuel: float = 4.15e-5  # fuel mass flow per (mm^3/st * rpm)
  k_comp: float = 10.0  # compressor flow per kPa of delivery pressure margin
  k_boost: float = 2.0  # compressor pressure ratio rise per (turbo speed)^2
  k_egr: float = 2.0  # EGR flow per (% open / 100 * kPa)
  k_turb: float = 3.2  # turbine flow per (effective area * kPa)
  vgt_area_span: float = 0.8  # area reduction at fully closed vanes
  flow_smoothing: float = 2.0  # softplus width [kPa] for pressure-driven flows

  # turbocharger power balance
  k_turb_power: float = 1.07
  k_exh_temp: float = 20.0  # exhaust enthalpy gain per unit fuel/air ratio
  k_comp_power: float = 1.0
  k_friction: float = 20.0
  turbo_inertia: float = 200.0

  # manifold filling constants [kPa / (g/s) / s]
  c_im: float = 2.0
  c_ex: float = 3.0

  # static emission maps
  nox_floor: float = 20.0
  nox_gain: float = 1500.0
  nox_egr_sens: float = 3.0
  nox_speed_exp: float = 0.3
  nox_boost_exp: float = 0.5
  soot_floor: float = 0.2
  soot_gain: float = 100.0
  soot_egr_sens: float = 1.0
  soot_afr_scale: float = 8.0
  ref_speed: float = 2000.0
  ref_pressure: float = 200.0
  tau_nox: float = 0.5
  tau_soot: float = 0.3

  # injection system proxies
  pilot_fuel: float = 1.5  # pre-injection quantity [mm^3/st]

  # integration
  substeps: int = 4

  @field_validator("schema_version")
  @classmethod
  def version_supported(cls, v: int) -> int:
    if v != SCHEMA_VERSION:
      raise ValueError(f"Unsupported plant schema_version {v}; expected {SCHEMA_VERSION}")
    return v

  @field_validator("substeps")
  @classmethod
  def substeps_positive(cls, v: int) -> int:
    if v < 1:
      raise ValueError("substeps must be >= 1")
    return v

  @model_validator(mode="after")
  def positive_coefficients(self) -> "PlantParams":
    for name, value in self.model_dump().items():
      if isinstance(value, float) and not value > 0:
        raise ValueError(f"Plant coefficient '{name}' must be > 0")
    return self


# --- Synthetic datasets ---


class DataGenConfig(BaseModel):
  """Steady-state sweep and transient excitation used to log training data."""

  n_steady: int = 306
  n_transient: int = 12001
  speed_range: Tuple[float, float] = (IDLE_RPM, MAX_RPM)
  fuel_range: Tuple[float, float] = (5.0, MAX_FUEL)
  actuator_range: Tuple[float, float] = (5.0, 95.0)
  knot_spacing: float = 4.0  # s between speed/fuel knots
  hold_range: Tuple[float, float] = (0.5, 4.0)  # s, actuator dwell times
  pilot_dither: float = 0.3  # mm^3/st, transient logs only
  noise_pct: float = 0.5  # sensor noise, percent of reading
  seed: int = 0

  @field_validator("n_steady", "n_transient")
  @classmethod
  def counts_nonnegative(cls, v: int) -> int:
    if v < 0:
      raise ValueError("sample counts must be >= 0")
    return v

  @field_validator("speed_range", "fuel_range", "actuator_range", "hold_range")
  @classmethod
  def ordered(cls, v: Tuple[float, float]) -> Tuple[float, float]:
    if not v[0] < v[1]:
      raise ValueError("ranges must be (low, high) with low < high")
    return v

  @model_validator(mode="after")
  def within_envelope(self) -> "DataGenConfig":
    if self.speed_range[0] < IDLE_RPM or self.speed_range[1] > MAX_RPM:
      raise ValueError("speed_range must lie within the engine envelope")
    if self.fuel_range[0] < 0 or self.fuel_range[1] > MAX_FUEL:
      raise ValueError("fuel_range must lie within the engine envelope")
    if self.actuator_range[0] < 0 or self.actuator_range[1] > 100:
      raise ValueError("actuator_range must lie within [0, 100]")
    if self.knot_spacing <= 0 or self.pilot_dither < 0 or self.noise_pct < 0:
      raise ValueError("knot_spacing must be > 0; pilot_dither and noise_pct >= 0")
    return self


# --- Neural network training ---


class TrainConfig(BaseModel):
  """Training recipe for the emissions network."""

  epochs: int = 1000
  batch_size: int = 40
  lr0: float = 1e-4
  momentum: float = 0.9
  decay: float = 0.5
  decay_every: int = 100
  loss: Literal["mse"] = "mse"
  hidden_sizes: Tuple[int, ...] = (1024, 512, 32)
  seed: int = 0

  @field_validator("epochs", "batch_size", "decay_every")
  @classmethod
  def positive_int(cls, v: int) -> int:
    if v <= 0:
      raise ValueError("epochs, batch_size and decay_every must be positive")
    return v

  @field_validator("lr0", "momentum")
  @classmethod
  def positive_float(cls, v: float) -> float:
    if not v > 0:
      raise ValueError("lr0 and momentum must be positive")
    return v

  @field_validator("decay")
  @classmethod
  def decay_range(cls, v: float) -> float:
    if not 0.0 < v <= 1.0:
      raise ValueError("decay must be within (0, 1]")
    return v

  @field_validator("hidden_sizes")
  @classmethod
  def hidden_positive(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
    if not v or any(h <= 0 for h in v):
      raise ValueError("hidden_sizes must be a nonempty tuple of positive ints")
    return tuple(v)


# --- Identification ---


class PerturbationSpec(BaseModel):
  """Pseudo-random binary perturbation applied around a node equilibrium."""

  amplitude_pct: float = 5.0  # of the 0..100 actuator range
  fuel_amplitude_pct: float = 5.0  # of the fuel envelope
  duration: float = 200.0
  dt: float = DT
  min_hold: float = 0.5  # shortest PRBS dwell [s]
  perturb_egr: bool = True
  perturb_vgt: bool = True
  perturb_fuel: bool = True
  seed: int = 0

  @field_validator("amplitude_pct", "fuel_amplitude_pct")
  @classmethod
  def amplitude_range(cls, v: float) -> float:
    if not 0.0 <= v <= 50.0:
      raise ValueError("perturbation amplitude must be within [0, 50] percent")
    return v

  @field_validator("duration", "dt", "min_hold")
  @classmethod
  def positive_time(cls, v: float) -> float:
    if not v > 0:
      raise ValueError("durations must be positive")
    return v

  @property
  def steps(self) -> int:
    return int(round(self.duration / self.dt))


class IdentConfig(BaseModel):
  """Options for fitting local models.

  A fit over the rollout gate is first refined on its own log, then
  re-identified from a longer, gentler experiment (`retry_*`). Nodes that still
  fail take the dynamics of the nearest accepted node when `substitute` is set;
  `strict` raises instead.
  """

  horizon: int = 50
  rollout_gate: float = 0.5
  max_spectral_radius: float = 0.99
  refine: bool = False
  refine_rejected: bool = True
  retry_duration_factor: float = 2.0
  retry_amplitude_factor: float = 0.5
  substitute: bool = True
  strict: bool = False

  @field_validator("retry_duration_factor")
  @classmethod
  def retry_duration_positive(cls, v: float) -> float:
    if not v > 0:
      raise ValueError("retry_duration_factor must be positive")
    return v

  @field_validator("retry_amplitude_factor")
  @classmethod
  def retry_amplitude_range(cls, v: float) -> float:
    if not 0.0 < v <= 1.0:
      raise ValueError("retry_amplitude_factor must be within (0, 1]")
    return v

  @field_validator("horizon")
  @classmethod
  def horizon_positive(cls, v: int) -> int:
    if v < 1:
      raise ValueError("horizon must be >= 1")
    return v

  @field_validator("max_spectral_radius")
  @classmethod
  def radius_below_one(cls, v: float) -> float:
    if not 0.0 < v < 1.0:
      raise ValueError("max_spectral_radius must be within (0, 1)")
    return v


class GridConfig(BaseModel):
  """Scheduling grid, target-map search and identification options (grid.json)."""

  schema_version: int = SCHEMA_VERSION
  speeds: List[float] = Field(
    default_factory=lambda: [800.0 + 300.0 * i for i in range(9)]
  )
  fuels: List[float] = Field(default_factory=lambda: [10.0 + 11.0 * i for i in range(11)])
  # steady actuator candidates searched for the look-up tables
  egr_candidates: List[float] = Field(default_factory=lambda: [0.0, 15.0, 30.0, 45.0, 60.0])
  vgt_candidates: List[float] = Field(default_factory=lambda: [20.0, 35.0, 50.0, 65.0, 80.0])
  nox_weight: float = 1.0  # per 1000 ppm
  soot_weight: float = 2.0  # per % opacity
  torque_weight: float = 1.0  # per 100 Nm
  chi_max: float = 0.5
  perturbation: PerturbationSpec = Field(default_factory=PerturbationSpec)
  ident: IdentConfig = Field(default_factory=IdentConfig)

  @field_validator("schema_version")
  @classmethod
  def version_supported(cls, v: int) -> int:
    if v != SCHEMA_VERSION:
      raise ValueError(f"Unsupported grid schema_version {v}; expected {SCHEMA_VERSION}")
    return v

  @field_validator("speeds", "fuels", "egr_candidates", "vgt_candidates")
  @classmethod
  def strictly_ascending(cls, v: List[float]) -> List[float]:
    if any(b <= a for a, b in zip(v, v[1:])):
      raise ValueError("grid axes and candidates must be strictly ascending")
    return v

  @model_validator(mode="after")
  def within_envelope(self) -> "GridConfig":
    if len(self.speeds) < 2 or len(self.fuels) < 2:
      raise ValueError("grid axes need at least 2 values each")
    if self.speeds[0] < IDLE_RPM or self.speeds[-1] > MAX_RPM:
      raise ValueError("grid speeds must lie within the engine envelope")
    if self.fuels[0] < 0 or self.fuels[-1] > MAX_FUEL:
      raise ValueError("grid fuel rates must lie within the engine envelope")
    candidates = self.egr_candidates + self.vgt_candidates
    if not self.egr_candidates or not self.vgt_candidates:
      raise ValueError("actuator candidate lists must not be empty")
    if any(not 0.0 <= c <= 100.0 for c in candidates):
      raise ValueError("actuator candidates must lie within [0, 100]")
    if min(self.nox_weight, self.soot_weight, self.torque_weight) < 0:
      raise ValueError("trade-off weights must be >= 0")
    if not 0.0 < self.chi_max <= 1.0:
      raise ValueError("chi_max must be within (0, 1]")
    return self

  @property
  def node_count(self) -> int:
    return len(self.speeds) * len(self.fuels)


# --- Controllers ---


def _psd(matrix: List[List[float]], name: str, strict: bool = False) -> List[List[float]]:
  m = np.asarray(matrix, dtype=float)
  if m.ndim != 2 or m.shape[0] != m.shape[1]:
    raise ValueError(f"{name} must be a square matrix")
  if not np.allclose(m, m.T, atol=1e-12):
    raise ValueError(f"{name} must be symmetric")
  eig_min = float(np.linalg.eigvalsh(m).min())
  if eig_min < -1e-10 or (strict and eig_min <= 0):
    raise ValueError(f"{name} must be positive {'definite' if strict else 'semi-definite'}")
  return matrix


class EmpcWeights(BaseModel):
  """Tuning of the supervisory economic MPC (all terms in normalized units)."""

  alpha: float = 1.0
  beta: float = 1.0
  gamma: float = 0.5
  eta: float = 0.05
  zeta: float = 50.0
  R: List[List[float]] = Field(
    default_factory=lambda: [[2.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 2.0]]
  )
  soot_max: Optional[float] = None
  horizon: int = 10
  rate_divider: int = 2
  fuel_lower_ratio: float = 0.9
  max_target_deviation: Tuple[float, float] = (40.0, 0.15)  # kPa, EGR fraction
  chi_bounds: Tuple[float, float] = (0.0, 0.6)

  @field_validator("alpha", "beta", "gamma", "eta", "zeta")
  @classmethod
  def nonnegative(cls, v: float) -> float:
    if not (math.isfinite(v) and v >= 0):
      raise ValueError("EMPC weights must be finite and >= 0")
    return v

  @field_validator("R")
  @classmethod
  def r_psd(cls, v: List[List[float]]) -> List[List[float]]:
    if len(v) != 3:
      raise ValueError("R must be 3x3")
    return _psd(v, "R")

  @field_validator("horizon", "rate_divider")
  @classmethod
  def positive_int(cls, v: int) -> int:
    if v < 1:
      raise ValueError("horizon and rate_divider must be >= 1")
    return v

  @field_validator("fuel_lower_ratio")
  @classmethod
  def ratio_range(cls, v: float) -> float:
    if not 0.0 < v <= 1.0:
      raise ValueError("fuel_lower_ratio must be within (0, 1]")
    return v


class AirpathMpcConfig(BaseModel):
  """Feedforward and feedback airpath tracking MPC tuning."""

  horizon: int = 8
  q_e: Tuple[float, float] = (1.0, 1.0)
  r_dv: Tuple[float, float] = (0.05, 0.05)
  terminal_weight: float = 5.0
  ff_q: Tuple[float, float] = (1.0, 1.0)
  ff_r: Tuple[float, float] = (0.01, 0.01)
  ff_terminal_weight: float = 5.0
  z_min: Tuple[float, float] = (90.0, 0.0)
  z_max: Tuple[float, float] = (400.0, 0.7)
  v_min: Tuple[float, float] = (0.0, 0.0)
  v_max: Tuple[float, float] = (100.0, 100.0)
  slack_weight: float = 1e4

  @field_validator("horizon")
  @classmethod
  def horizon_positive(cls, v: int) -> int:
    if v < 1:
      raise ValueError("horizon must be >= 1")
    return v

  @field_validator("q_e", "ff_q")
  @classmethod
  def q_nonnegative(cls, v: Tuple[float, float]) -> Tuple[float, float]:
    if any(x < 0 for x in v):
      raise ValueError("tracking weights must be >= 0")
    return v

  @field_validator("r_dv", "ff_r")
  @classmethod
  def r_positive(cls, v: Tuple[float, float]) -> Tuple[float, float]:
    if any(not x > 0 for x in v):
      raise ValueError("input weights must be > 0")
    return v

  @model_validator(mode="after")
  def bounds_ordered(self) -> "AirpathMpcConfig":
    for lo, hi in list(zip(self.z_min, self.z_max)) + list(zip(self.v_min, self.v_max)):
      if not lo < hi:
        raise ValueError("lower bounds must be below upper bounds")
    if self.terminal_weight < 0 or self.ff_terminal_weight < 0 or self.slack_weight <= 0:
      raise ValueError("terminal weights must be >= 0 and slack_weight > 0")
    return self


ScenarioName = Literal["baseline", "EMPC-A", "EMPC-B", "EMPC-C", "EMPC-D"]


class Scenario(BaseModel):
  """One named tuning: NOx penalty level and whether the Soot limit is active."""

  name: ScenarioName
  nox_penalty: Literal["low", "high", "none"] = "low"
  soot_limit_enabled: bool = False
  soot_max_ratio: float = 0.8
  weights: EmpcWeights = Field(default_factory=EmpcWeights)

  @property
  def empc_enabled(self) -> bool:
    return self.name != "baseline"

  @model_validator(mode="after")
  def baseline_has_no_penalty(self) -> "Scenario":
    if self.name == "baseline" and self.soot_limit_enabled:
      raise ValueError("baseline scenario cannot enable the Soot limit")
    if not 0.0 < self.soot_max_ratio <= 2.0:
      raise ValueError("soot_max_ratio must be within (0, 2]")
    return self


# --- Harness ---


class CycleConfig(BaseModel):
  """Drive-cycle construction parameters."""

  dt: float = DT
  # step / ramp case study
  step_speed: float = 1600.0
  step_fuel_base: float = 50.0
  step_fuel_high: float = 85.0
  step_warmup: float = 30.0
  tip_in_delay: float = 5.0
  tip_in_duration: float = 10.0
  ramp_delay: float = 10.0
  ramp_duration: float = 10.0
  ramp_speed_end: float = 2200.0
  step_tail: float = 15.0
  # synthetic transient cycles
  transient_warmup: float = 100.0
  transient_active: float = 600.0
  speed_range: Tuple[float, float] = (900.0, 2800.0)
  fuel_range: Tuple[float, float] = (10.0, 115.0)
  ftp_knot_spacing: float = 4.0
  whtc_knot_spacing: float = 6.0

  @model_validator(mode="after")
  def within_envelope(self) -> "CycleConfig":
    speeds = [self.step_speed, self.ramp_speed_end, *self.speed_range]
    fuels = [self.step_fuel_base, self.step_fuel_high, *self.fuel_range]
    if any(not IDLE_RPM <= s <= MAX_RPM for s in speeds):
      raise ValueError("cycle speeds must lie within the engine envelope")
    if any(not 0.0 <= f <= MAX_FUEL for f in fuels):
      raise ValueError("cycle fuel rates must lie within the engine envelope")
    if self.speed_range[0] >= self.speed_range[1] or self.fuel_range[0] >= self.fuel_range[1]:
      raise ValueError("cycle ranges must be ordered")
    return self


class Settings(BaseModel):
  """Process-wide defaults resolved from environment and CLI flags."""

  seed: int = 0
  out_dir: str = "out"
  plant_path: Optional[str] = None
  workers: int = 1

  @field_validator("workers")
  @classmethod
  def workers_positive(cls, v: int) -> int:
    if v < 1:
      raise ValueError("workers must be >= 1")
    return v
