import math

import numpy as np
import pytest

from diesel_empc.errors import NonFiniteStateError, UndefinedRatioError
from diesel_empc.inputs import ActuatorInput, OperatingPoint
from diesel_empc.utils.plant import (
  MEASUREMENT_CHANNELS,
  REFERENCE_PLANT,
  TRAJECTORY_COLUMNS,
  PlantState,
  candidate_measurements,
  egr_rate,
  emission_truth,
  measurement_vector,
  plant_equilibrium,
  plant_step,
  read_trajectory_csv,
  settle,
  simulate_open_loop,
  static_emissions,
  write_trajectory_csv,
)


# Mid-grid reference values (1600 rpm, 50 mm^3/st, EGR 30 %, VGT 50 %).
FROZEN_EQUILIBRIUM = {
  "intake_pressure": 146.908830666,
  "exhaust_pressure": 183.43329174,
  "turbo_speed": 0.548917689882,
  "compressor_flow": 154.375920141,
  "egr_flow": 21.9146766585,
  "egr_rate": 0.124309957856,
}
FROZEN_NOX = 365.028190371
FROZEN_SOOT = 0.340089263163
FROZEN_MEASUREMENTS = [
  93.6948051534, 8.37662336742, 48.5, 718.175260458, 1600.0,
  146.908830666, 183.43329174, 154.375920141, 30.0, 50.0,
]


@pytest.fixture
def mid_point():
  return OperatingPoint(engine_speed=1600.0, fuel_rate=50.0)


@pytest.fixture
def nominal_input():
  return ActuatorInput(egr_valve=30.0, vgt_position=50.0)


@pytest.fixture
def equilibrium(nominal_input, mid_point):
  return plant_equilibrium(nominal_input, mid_point)


class TestEgrRate:
  @pytest.mark.parametrize(
    "w_egr, w_c, expected", [(0.0, 50.0, 0.0), (25.0, 25.0, 0.5), (10.0, 40.0, 0.2)]
  )
  def test_examples(self, w_egr, w_c, expected):
    assert egr_rate(w_egr, w_c) == pytest.approx(expected, abs=1e-15)

  def test_zero_total_flow(self):
    with pytest.raises(UndefinedRatioError):
      egr_rate(0.0, 0.0)

  def test_negative_flow_rejected(self):
    with pytest.raises(ValueError):
      egr_rate(-1.0, 10.0)

  def test_range(self):
    rng = np.random.default_rng(3)
    for w_egr, w_c in rng.uniform(0.0, 200.0, size=(200, 2)):
      assert 0.0 <= egr_rate(w_egr, w_c) <= 1.0


class TestPlantStep:
  def test_equilibrium_is_fixed_point(self, equilibrium, nominal_input, mid_point):
    nxt = plant_step(equilibrium, nominal_input, mid_point)
    assert nxt.distance(equilibrium) < 1e-9

  def test_equilibrium_is_plausible(self, equilibrium):
    assert 100.0 < equilibrium.intake_pressure < 300.0
    assert equilibrium.exhaust_pressure > equilibrium.intake_pressure
    assert 0.0 < equilibrium.egr_rate < 0.6
    assert equilibrium.turbo_speed > 0.0

  def test_closed_egr_valve_gives_zero_rate(self, mid_point):
    state = plant_equilibrium(ActuatorInput(egr_valve=0.0, vgt_position=50.0), mid_point)
    assert state.egr_flow == 0.0
    assert state.egr_rate == 0.0

  def test_vgt_closure_raises_exhaust_pressure(self, mid_point):
    open_vanes = plant_equilibrium(ActuatorInput(egr_valve=30.0, vgt_position=30.0), mid_point)
    closed_vanes = plant_equilibrium(
      ActuatorInput(egr_valve=30.0, vgt_position=60.0), mid_point
    )
    assert closed_vanes.exhaust_pressure > open_vanes.exhaust_pressure

  def test_egr_opening_raises_egr_rate(self, mid_point):
    low = plant_equilibrium(ActuatorInput(egr_valve=20.0, vgt_position=50.0), mid_point)
    high = plant_equilibrium(ActuatorInput(egr_valve=60.0, vgt_position=50.0), mid_point)
    assert high.egr_rate > low.egr_rate

  def test_converges_from_perturbed_start(self, equilibrium, nominal_input, mid_point):
    start = PlantState(
      intake_pressure=equilibrium.intake_pressure * 0.8,
      exhaust_pressure=equilibrium.exhaust_pressure * 1.2,
      turbo_speed=equilibrium.turbo_speed * 0.5,
      compressor_flow=equilibrium.compressor_flow,
      egr_flow=equilibrium.egr_flow,
      nox=0.0,
      soot=0.0,
    )
    settled, steps = settle(start, nominal_input, mid_point)
    assert steps < 20000
    assert settled.distance(equilibrium) < 1e-5

  def test_deterministic(self, equilibrium, mid_point):
    v = ActuatorInput(egr_valve=55.0, vgt_position=20.0)
    a = plant_step(equilibrium, v, mid_point)
    b = plant_step(equilibrium, v, mid_point)
    assert np.array_equal(a.as_array(), b.as_array())

  def test_rejects_nonpositive_dt(self, equilibrium, nominal_input, mid_point):
    with pytest.raises(ValueError):
      plant_step(equilibrium, nominal_input, mid_point, dt=0.0)

  def test_nonfinite_state_rejected(self):
    with pytest.raises(NonFiniteStateError):
      PlantState(150.0, float("nan"), 0.5, 100.0, 10.0, 100.0, 1.0)

  @pytest.mark.parametrize("speed", [800.0, 2000.0, 3200.0])
  @pytest.mark.parametrize("fuel", [0.0, 60.0, 120.0])
  def test_equilibrium_exists_across_envelope(self, speed, fuel):
    rho = OperatingPoint(engine_speed=speed, fuel_rate=fuel)
    for v in (ActuatorInput(egr_valve=10.0, vgt_position=10.0),
              ActuatorInput(egr_valve=90.0, vgt_position=90.0)):
      state = plant_equilibrium(v, rho)
      assert state.intake_pressure > 0
      assert 0.0 <= state.egr_rate <= 1.0


class TestEmissionTruth:
  def test_zero_fuel_gives_floors(self, equilibrium):
    rho = OperatingPoint(engine_speed=1600.0, fuel_rate=0.0)
    v = ActuatorInput(egr_valve=30.0, vgt_position=50.0)
    static = emission_truth(equilibrium, v, rho, dt=None)
    assert static.nox == pytest.approx(REFERENCE_PLANT.nox_floor)
    assert static.soot == pytest.approx(REFERENCE_PLANT.soot_floor)

  def test_lag_moves_towards_static_map(self, equilibrium, nominal_input, mid_point):
    cold = equilibrium.with_emissions(0.0, 0.0)
    static = emission_truth(cold, nominal_input, mid_point, dt=None)
    lagged = emission_truth(cold, nominal_input, mid_point)
    a = math.exp(-0.1 / REFERENCE_PLANT.tau_nox)
    assert lagged.nox == pytest.approx(static.nox * (1.0 - a))
    assert 0.0 < lagged.soot < static.soot

  def test_monotonicity_property(self, nominal_input):
    rng = np.random.default_rng(7)
    for _ in range(1000):
      speed = rng.uniform(800.0, 3200.0)
      fuel = rng.uniform(5.0, 120.0)
      rho = OperatingPoint(engine_speed=speed, fuel_rate=fuel)
      p_im = rng.uniform(90.0, 300.0)
      w_c = rng.uniform(20.0, 400.0)
      w_egr = rng.uniform(0.0, 100.0)
      extra = rng.uniform(1.0, 50.0)
      lags = rng.uniform(0.0, 500.0), rng.uniform(0.0, 5.0)
      base = PlantState(p_im, p_im + 30.0, 0.5, w_c, w_egr, *lags)
      more_egr = PlantState(p_im, p_im + 30.0, 0.5, w_c, w_egr + extra, *lags)
      e_base = emission_truth(base, nominal_input, rho)
      e_more = emission_truth(more_egr, nominal_input, rho)
      assert e_more.nox < e_base.nox
      assert e_more.soot >= e_base.soot

  def test_soot_rises_with_fuel_at_low_air_fuel_ratio(self):
    low = static_emissions(120.0, 0.2, 1600.0, 60.0)
    high = static_emissions(120.0, 0.2, 1600.0, 90.0)
    more_egr = static_emissions(120.0, 0.3, 1600.0, 60.0)
    assert high[1] > low[1]
    assert more_egr[1] > low[1]


class TestMeasurements:
  def test_ten_channels(self, equilibrium, nominal_input, mid_point):
    y0 = measurement_vector(equilibrium, nominal_input, mid_point)
    assert y0.shape == (10,)
    assert len(MEASUREMENT_CHANNELS) == 10
    assert np.all(np.isfinite(y0))

  def test_engine_speed_passthrough(self, equilibrium, nominal_input, mid_point):
    y0 = measurement_vector(equilibrium, nominal_input, mid_point)
    assert y0[MEASUREMENT_CHANNELS.index("engine_speed")] == mid_point.engine_speed

  def test_candidates_include_pilot(self, equilibrium, nominal_input, mid_point):
    values = candidate_measurements(equilibrium, nominal_input, mid_point)
    assert len(values) == 11
    assert values["pilot_fuel_rate"] == REFERENCE_PLANT.pilot_fuel
    assert values["main_fuel_rate"] + values["pilot_fuel_rate"] == pytest.approx(50.0)

  def test_pilot_dither_keeps_total_fuel(self, equilibrium, nominal_input, mid_point):
    values = candidate_measurements(equilibrium, nominal_input, mid_point, pilot_dither=0.3)
    assert values["pilot_fuel_rate"] == pytest.approx(REFERENCE_PLANT.pilot_fuel + 0.3)
    assert values["main_fuel_rate"] + values["pilot_fuel_rate"] == pytest.approx(50.0)


class TestFrozenReference:
  def test_equilibrium_state(self, equilibrium):
    for name, expected in FROZEN_EQUILIBRIUM.items():
      assert getattr(equilibrium, name) == pytest.approx(expected, rel=1e-6), name

  def test_equilibrium_carries_static_emissions(self, equilibrium):
    assert equilibrium.nox == pytest.approx(FROZEN_NOX, rel=1e-6)
    assert equilibrium.soot == pytest.approx(FROZEN_SOOT, rel=1e-6)

  def test_static_emission_truth(self, equilibrium, nominal_input, mid_point):
    static = emission_truth(equilibrium, nominal_input, mid_point, dt=None)
    assert static.nox == pytest.approx(FROZEN_NOX, rel=1e-6)
    assert static.soot == pytest.approx(FROZEN_SOOT, rel=1e-6)

  def test_measurement_vector(self, equilibrium, nominal_input, mid_point):
    y0 = measurement_vector(equilibrium, nominal_input, mid_point)
    np.testing.assert_allclose(y0, FROZEN_MEASUREMENTS, rtol=1e-6)


class TestTrajectoryIo:
  def test_csv_header_and_rows(self, tmp_path, equilibrium, nominal_input, mid_point):
    schedule = [(nominal_input, mid_point)] * 5
    states, frame = simulate_open_loop(equilibrium, schedule)
    assert len(states) == 5
    path = write_trajectory_csv(frame, tmp_path / "traj.csv")
    with open(path, encoding="utf-8") as f:
      header = f.readline().strip()
    assert header == ",".join(TRAJECTORY_COLUMNS)
    loaded = read_trajectory_csv(path)
    assert len(loaded) == 5
    assert loaded["t"].iloc[-1] == pytest.approx(0.5)
