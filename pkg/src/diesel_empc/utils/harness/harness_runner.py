"""Closed-loop scenario runs of the controller pipeline on the reference plant."""

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd

from ...converters import to_dict
from ...errors import ConfigError, MissingArtifactError, ModelFormatError
from ...inputs import AirpathMpcConfig, OperatingPoint, PlantParams, Scenario
from ..control.control_pipeline import TELEMETRY_COLUMNS, ControllerPipeline
from ..lpv.lpv_io import load_lpv, load_target_maps
from ..lpv.lpv_maps import TargetMaps
from ..lpv.lpv_model import LpvGridModel
from ..nn.nn_io import load_model
from ..nn.nn_source import NnEmissionSource
from ..plant.plant_emissions import REFERENCE_PLANT
from ..plant.plant_model import plant_equilibrium, plant_step
from ..plant.plant_sources import EmissionSource, TruthEmissionSource
from .harness_cycles import DriveCycle
from .harness_metrics import MetricsReport, compute_metrics

logger = logging.getLogger(__name__)

NN_MODEL_FILE = "emissions_nn.bin"
LPV_EMISSIONS_FILE = "lpv_emissions.json"
LPV_AIRPATH_FILE = "lpv_airpath.json"
TARGET_MAPS_FILE = "target_maps.json"
TELEMETRY_FILE = "telemetry.csv"
METRICS_FILE = "metrics.json"


@dataclass(frozen=True)
class ArtifactPaths:
  """Locations of the trained network and the identified LPV files."""

  nn_model: Path
  lpv_emissions: Path
  lpv_airpath: Path
  target_maps: Path

  @classmethod
  def in_dir(cls, root: Path | str) -> "ArtifactPaths":
    root = Path(root)
    return cls(
      root / NN_MODEL_FILE,
      root / LPV_EMISSIONS_FILE,
      root / LPV_AIRPATH_FILE,
      root / TARGET_MAPS_FILE,
    )

  def missing(self, with_nn: bool = True) -> List[Path]:
    paths = [self.lpv_emissions, self.lpv_airpath, self.target_maps]
    if with_nn:
      paths.insert(0, self.nn_model)
    return [p for p in paths if not p.exists()]

  def load(
    self, source: str = "nn", params: PlantParams = REFERENCE_PLANT
  ) -> "ClosedLoopModels":
    """Load every artifact; raises listing all absent files at once."""
    if source not in ("nn", "truth"):
      raise ConfigError(f"Unknown emission source '{source}', expected 'nn' or 'truth'")
    missing = self.missing(with_nn=source == "nn")
    if missing:
      raise MissingArtifactError(missing)
    emissions = load_lpv(self.lpv_emissions)
    airpath = load_lpv(self.lpv_airpath)
    if emissions.kind != "emissions" or airpath.kind != "airpath":
      raise ModelFormatError(
        f"LPV files hold kinds ({emissions.kind}, {airpath.kind}), expected (emissions, airpath)"
      )
    maps = load_target_maps(self.target_maps)
    if source == "nn":
      emission_source: EmissionSource = NnEmissionSource(load_model(self.nn_model), params)
    else:
      emission_source = TruthEmissionSource()
    return ClosedLoopModels(maps, emissions, airpath, emission_source)


@dataclass(eq=False)
class ClosedLoopModels:
  maps: TargetMaps
  emissions_model: LpvGridModel
  airpath_model: LpvGridModel
  source: EmissionSource


@dataclass(eq=False)
class ScenarioRun:
  scenario: Scenario
  cycle: str
  telemetry: pd.DataFrame
  metrics: MetricsReport


def resolve_soot_max(scenario: Scenario, baseline: Optional[MetricsReport]) -> Optional[float]:
  """Soot limit of a scenario: explicit weight, else a ratio of the baseline peak."""
  if not scenario.soot_limit_enabled:
    return None
  if scenario.weights.soot_max is not None:
    return scenario.weights.soot_max
  if baseline is None:
    raise ConfigError(f"Scenario {scenario.name} needs a baseline run to set its Soot limit")
  return scenario.soot_max_ratio * baseline.peak_soot


def simulate_closed_loop(
  cycle: DriveCycle,
  scenario: Scenario,
  models: ClosedLoopModels,
  params: PlantParams = REFERENCE_PLANT,
  airpath_cfg: Optional[AirpathMpcConfig] = None,
  dump_dir: Optional[Path] = None,
) -> pd.DataFrame:
  """Telemetry of one closed-loop run, starting from the look-up equilibrium."""
  rho = cycle.operating_point(0)
  v = models.maps.lookup(rho).v_ss
  state = plant_equilibrium(v, rho, params)
  pipeline = ControllerPipeline(
    models.maps,
    models.emissions_model,
    models.airpath_model,
    scenario,
    airpath_cfg or AirpathMpcConfig(),
    cycle.dt,
    dump_dir=dump_dir,
  )
  for k in range(cycle.n_steps):
    x = models.source.measure(state, v, rho)
    out = pipeline.step(state.airpath(), x, float(cycle.speed[k]), float(cycle.fuel[k]))
    v = out.command
    rho = OperatingPoint(engine_speed=float(cycle.speed[k]), fuel_rate=out.fuel)
    state = plant_step(state, v, rho, cycle.dt, params)
    if k % 1000 == 0:
      logger.debug(f"{scenario.name} on {cycle.name}: step {k}/{cycle.n_steps}")
  return pd.DataFrame(pipeline.rows, columns=TELEMETRY_COLUMNS)


def run_scenario(
  cycle: DriveCycle,
  scenario: Scenario,
  models: Union[ClosedLoopModels, ArtifactPaths],
  params: PlantParams = REFERENCE_PLANT,
  airpath_cfg: Optional[AirpathMpcConfig] = None,
  baseline: Optional[MetricsReport] = None,
  dump_dir: Optional[Path] = None,
) -> ScenarioRun:
  """Closed-loop run plus metrics with deltas against the baseline.

  Without a `baseline`, a baseline run of the same cycle is made first, since
  both the deltas and a ratio-based Soot limit depend on it.
  """
  if isinstance(models, ArtifactPaths):
    models = models.load(params=params)
  if baseline is None and scenario.empc_enabled:
    logger.info(f"Running baseline on {cycle.name} for {scenario.name}")
    base = Scenario(name="baseline", weights=scenario.weights.model_copy(update={"soot_max": None}))
    baseline = run_scenario(cycle, base, models, params, airpath_cfg).metrics

  soot_max = resolve_soot_max(scenario, baseline)
  if soot_max is not None:
    scenario = scenario.model_copy(
      update={"weights": scenario.weights.model_copy(update={"soot_max": soot_max})}
    )
  logger.info(f"Simulating {scenario.name} on {cycle.name} ({cycle.n_steps} steps)")
  telemetry = simulate_closed_loop(cycle, scenario, models, params, airpath_cfg, dump_dir)
  metrics = compute_metrics(telemetry, cycle, scenario.name, soot_max=soot_max)
  metrics = metrics.with_deltas(baseline or metrics)
  return ScenarioRun(scenario, cycle.name, telemetry, metrics)


def write_run(run: ScenarioRun, out_dir: Path | str) -> Path:
  """telemetry.csv (seed in a leading comment line) and metrics.json."""
  out_dir = Path(out_dir)
  out_dir.mkdir(parents=True, exist_ok=True)
  with open(out_dir / TELEMETRY_FILE, "w", encoding="utf-8", newline="") as f:
    f.write(
      f"# seed={run.metrics.seed} cycle={run.cycle} scenario={run.scenario.name}\n"
    )
    run.telemetry.to_csv(f, index=False, float_format="%.10g")
  payload = {
    "scenario": to_dict(run.scenario),
    "cycle": run.cycle,
    "metrics": to_dict(run.metrics),
  }
  with open(out_dir / METRICS_FILE, "w", encoding="utf-8") as f:
    json.dump(payload, f, indent=2)
  logger.info(f"Wrote {run.scenario.name} run to {out_dir}")
  return out_dir


def _optional(value) -> Optional[float]:
  return None if value is None else float(value)


def load_run(run_dir: Path | str) -> ScenarioRun:
  run_dir = Path(run_dir)
  missing = [p for p in (run_dir / TELEMETRY_FILE, run_dir / METRICS_FILE) if not p.exists()]
  if missing:
    raise MissingArtifactError(missing)
  with open(run_dir / METRICS_FILE, "r", encoding="utf-8") as f:
    payload = json.load(f)
  try:
    scenario = Scenario.model_validate(payload["scenario"])
    m = payload["metrics"]
    metrics = MetricsReport(
      scenario=m["scenario"],
      cycle=m["cycle"],
      seed=m["seed"],
      active_steps=int(m["active_steps"]),
      cumulative_nox=float(m["cumulative_nox"]),
      peak_nox=float(m["peak_nox"]),
      average_soot=float(m["average_soot"]),
      peak_soot=float(m["peak_soot"]),
      soot_max=_optional(m.get("soot_max")),
      slack_steps=int(m.get("slack_steps", 0)),
      deltas={k: float(v) for k, v in m.get("deltas", {}).items()},
    )
  except (KeyError, TypeError, ValueError) as e:
    raise ModelFormatError(f"Run metrics in {run_dir} are malformed: {e}") from e
  telemetry = pd.read_csv(run_dir / TELEMETRY_FILE, comment="#")
  return ScenarioRun(scenario, payload["cycle"], telemetry, metrics)


SweepTask = Tuple[
  DriveCycle, Scenario, ClosedLoopModels, PlantParams, Optional[AirpathMpcConfig],
  MetricsReport, Optional[Path],
]


def _run_task(task: SweepTask) -> ScenarioRun:
  cycle, scenario, models, params, airpath_cfg, baseline, dump_dir = task
  return run_scenario(cycle, scenario, models, params, airpath_cfg, baseline, dump_dir)


def run_sweep(
  cycle: DriveCycle,
  scenarios: Sequence[Scenario],
  models: Union[ClosedLoopModels, ArtifactPaths],
  params: PlantParams = REFERENCE_PLANT,
  airpath_cfg: Optional[AirpathMpcConfig] = None,
  out_dir: Optional[Path] = None,
  workers: int = 1,
  dump_dir: Optional[Path] = None,
) -> Dict[str, ScenarioRun]:
  """Baseline first, then every EMPC scenario, optionally in a process pool.

  Each run is written to `out_dir/<cycle>/<scenario>/`. Results come back in
  the order of `scenarios` whatever the worker count.
  """
  if isinstance(models, ArtifactPaths):
    models = models.load(params=params)
  base = next((s for s in scenarios if not s.empc_enabled), Scenario(name="baseline"))
  baseline = run_scenario(cycle, base, models, params, airpath_cfg, dump_dir=dump_dir)
  runs: Dict[str, ScenarioRun] = {base.name: baseline}

  others = [s for s in scenarios if s.empc_enabled]
  tasks: List[SweepTask] = [
    (cycle, s, models, params, airpath_cfg, baseline.metrics, dump_dir) for s in others
  ]
  logger.info(f"Running {len(tasks)} EMPC scenario(s) on {cycle.name} with {workers} worker(s)")
  if workers > 1 and len(tasks) > 1:
    with ProcessPoolExecutor(max_workers=workers) as pool:
      results = list(pool.map(_run_task, tasks))
  else:
    results = [_run_task(task) for task in tasks]
  for run in results:
    runs[run.scenario.name] = run

  if out_dir is not None:
    for name, run in runs.items():
      write_run(run, Path(out_dir) / cycle.name / name)
  return runs
