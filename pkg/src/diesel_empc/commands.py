"""Command functions behind the CLI subcommands.

Each command takes plain arguments, writes its artifacts and returns a JSON-ready
summary. `run_command` is the single place where package errors become exit
codes.
"""

import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

from .converters import to_dict
from .errors import ConfigError, DieselEmpcError, MissingArtifactError
from .inputs import DataGenConfig, GridConfig, PlantParams, TrainConfig
from .scenarios import ScenarioLoader
from .settings import load_model_config
from .utils.data import (
  generate_steady,
  generate_transient,
  prepare_dataset,
  read_samples,
  read_split,
  write_prepared,
  write_samples,
)
from .utils.harness import (
  ArtifactPaths,
  load_run,
  make_cycle,
  render_report,
  run_sweep,
)
from .utils.harness.harness_runner import (
  LPV_AIRPATH_FILE,
  LPV_EMISSIONS_FILE,
  METRICS_FILE,
  TARGET_MAPS_FILE,
)
from .utils.lpv import (
  build_target_maps,
  identify_grid,
  make_validation_scenario,
  save_lpv,
  save_target_maps,
  validate_lpv,
)
from .utils.nn import NnEmissionSource, load_model, save_model, train
from .utils.plant import EmissionSource

logger = logging.getLogger(__name__)

STEADY_FILE = "steady.csv"
TRANSIENT_FILE = "transient.csv"


def _write_json(payload: Dict[str, Any], path: Path) -> Path:
  path.parent.mkdir(parents=True, exist_ok=True)
  with open(path, "w", encoding="utf-8") as f:
    json.dump(to_dict(payload), f, indent=2)
  return path


# --- Data ---
def generate_data(
  out_dir: Path,
  seed: int,
  params: PlantParams,
  n_steady: Optional[int] = None,
  n_transient: Optional[int] = None,
) -> Dict[str, Any]:
  """Generate steady-state and transient logs from the reference plant.

  Args:
      out_dir: Directory receiving steady.csv and transient.csv.
      seed: Root seed.
      params: Plant parameters.
      n_steady: Optional override of the steady-state sample count.
      n_transient: Optional override of the transient sample count.

  Returns:
      Summary with sample counts and file paths.
  """
  logger.debug(f"Executing generate_data into {out_dir} (seed={seed})")
  overrides = {"seed": seed, "n_steady": n_steady, "n_transient": n_transient}
  cfg = DataGenConfig(**{k: v for k, v in overrides.items() if v is not None})
  steady = generate_steady(cfg, params)
  transient = generate_transient(cfg, params)
  paths = [
    write_samples(steady, Path(out_dir) / STEADY_FILE),
    write_samples(transient, Path(out_dir) / TRANSIENT_FILE),
  ]
  return {"seed": seed, "steady": len(steady), "transient": len(transient), "files": paths}


def prepare_data(
  data_dir: Path,
  out_dir: Path,
  seed: int,
  eps: Optional[float] = None,
) -> Dict[str, Any]:
  """Select inputs, filter outliers, split and balance the generated logs.

  Args:
      data_dir: Directory holding steady.csv and transient.csv.
      out_dir: Directory receiving train/val/test CSVs, stats.json and xcov.csv.
      seed: Shuffle seed.
      eps: Optional Mahalanobis threshold; defaults to the percentile rule.

  Returns:
      Summary with retained channels, threshold and partition sizes.
  """
  logger.debug(f"Executing prepare_data from {data_dir}")
  data_dir = Path(data_dir)
  missing = [
    str(data_dir / f) for f in (STEADY_FILE, TRANSIENT_FILE) if not (data_dir / f).exists()
  ]
  if missing:
    raise MissingArtifactError(missing)
  steady = read_samples(data_dir / STEADY_FILE)
  transient = read_samples(data_dir / TRANSIENT_FILE)
  prepared = prepare_dataset(steady, transient, eps=eps, seed=seed)
  write_prepared(prepared, out_dir)
  return {
    "channels": prepared.channels,
    "eps": prepared.eps,
    "removed_transient": prepared.removed,
    "train": len(prepared.split.train),
    "validation": len(prepared.split.validation),
    "test": len(prepared.split.test),
  }


# --- Network ---
def train_nn(
  data_dir: Path,
  out_path: Path,
  seed: int,
  config_path: Optional[Path] = None,
  epochs: Optional[int] = None,
  hidden_sizes: Optional[Sequence[int]] = None,
) -> Dict[str, Any]:
  """Train the emissions network on a prepared dataset.

  Args:
      data_dir: Directory written by prepare-data.
      out_path: Model file to write.
      seed: Initialization and batch-order seed.
      config_path: Optional train.json; the packaged default otherwise.
      epochs: Optional epoch override.
      hidden_sizes: Optional hidden-layer override for desk-scale runs.

  Returns:
      Summary with loss history endpoints and test metrics.
  """
  logger.debug(f"Executing train_nn on {data_dir}")
  cfg = load_model_config(TrainConfig, config_path, "train.json")
  update: Dict[str, Any] = {"seed": seed}
  if epochs is not None:
    update["epochs"] = epochs
  if hidden_sizes:
    update["hidden_sizes"] = tuple(hidden_sizes)
  cfg = TrainConfig.model_validate({**cfg.model_dump(), **update})
  data = read_split(data_dir)
  model, history = train(data, cfg)
  save_model(model, out_path)
  summary = {
    "layer_sizes": model.layer_sizes,
    "initial_val_loss": history.initial_val_loss,
    "best_val_loss": history.best_val_loss,
    "best_epoch": history.best_epoch,
    "test_metrics": history.test_metrics,
    "config": cfg,
  }
  _write_json(summary, Path(out_path).with_suffix(".report.json"))
  return summary


# --- LPV ---
def identify_lpv(
  out_dir: Path,
  seed: int,
  params: PlantParams,
  nn_path: Optional[Path] = None,
  grid_path: Optional[Path] = None,
  workers: int = 1,
  validate: bool = True,
) -> Dict[str, Any]:
  """Build target maps and identify both LPV models over the grid.

  Args:
      out_dir: Directory receiving lpv_emissions.json, lpv_airpath.json and
        target_maps.json.
      seed: Perturbation seed.
      params: Plant parameters.
      nn_path: Optional trained network used as the emission source.
      grid_path: Optional grid.json; the packaged default otherwise.
      workers: Process count for node experiments.
      validate: Run the open-loop validation on a whtc_like segment.

  Returns:
      Summary with flagged nodes and the validation errors.
  """
  logger.debug(f"Executing identify_lpv into {out_dir}")
  out_dir = Path(out_dir)
  cfg = load_model_config(GridConfig, grid_path, "grid.json")
  cfg = cfg.model_copy(
    update={"perturbation": cfg.perturbation.model_copy(update={"seed": seed})}
  )
  source: Optional[EmissionSource] = None
  if nn_path is not None:
    source = NnEmissionSource(load_model(nn_path), params)
  maps = build_target_maps(cfg, params, source)
  emissions, airpath = identify_grid(cfg, maps, params, source, workers)
  save_target_maps(maps, out_dir / TARGET_MAPS_FILE)
  save_lpv(emissions, out_dir / LPV_EMISSIONS_FILE)
  save_lpv(airpath, out_dir / LPV_AIRPATH_FILE)
  summary: Dict[str, Any] = {
    "nodes": emissions.grid.size,
    "flagged": {"emissions": emissions.flagged_nodes(), "airpath": airpath.flagged_nodes()},
    "source": source.name if source is not None else "truth",
  }
  if validate:
    cycle = make_cycle("whtc_like", seed)
    active = slice(cycle.warmup_steps, None)
    scenario = make_validation_scenario(
      cycle.speed[active], cycle.fuel[active], maps, cycle.dt, "whtc_like"
    )
    check = validate_lpv(emissions, scenario, params, source)
    summary["validation"] = {"mae": check.mae, "limits": check.limits, "passed": check.passed}
    if not check.passed:
      logger.warning(f"LPV validation thresholds not met: {check.mae} vs {check.limits}")
  _write_json(summary, out_dir / "identification.json")
  return summary


# --- Harness ---
def simulate(
  cycle_name: str,
  scenario_name: str,
  artifacts_dir: Path,
  out_dir: Path,
  seed: int,
  params: PlantParams,
  source: str = "nn",
  workers: int = 1,
  dump_dir: Optional[Path] = None,
  scenarios_file: Optional[str] = None,
) -> Dict[str, Any]:
  """Run the closed loop on one cycle for one scenario (plus baseline) or all.

  Args:
      cycle_name: step_ramp, ftp_like or whtc_like.
      scenario_name: Scenario name, or "all" for the full sweep.
      artifacts_dir: Directory holding the network, LPV and target-map files.
      out_dir: Root of the per-cycle, per-scenario run directories.
      seed: Transient-cycle seed.
      params: Plant parameters.
      source: "nn" to measure emissions with the network, "truth" for the plant.
      workers: Process count for the EMPC scenarios.
      dump_dir: Directory for QP dumps on solver failure.
      scenarios_file: Optional scenarios.json.

  Returns:
      Summary with metrics per scenario.
  """
  logger.debug(f"Executing simulate: cycle={cycle_name}, scenario={scenario_name}")
  loader = ScenarioLoader(scenarios_file)
  available = loader.load_scenarios()
  if scenario_name == "all":
    scenarios = list(available.values())
  else:
    if scenario_name not in available:
      raise ConfigError(
        f"Unknown scenario '{scenario_name}', expected one of {list(available)} or 'all'"
      )
    scenarios = [s for s in available.values() if not s.empc_enabled]
    if available[scenario_name].empc_enabled:
      scenarios.append(available[scenario_name])
  try:
    cycle = make_cycle(cycle_name, seed)
  except ValueError as e:
    raise ConfigError(str(e)) from e
  models = ArtifactPaths.in_dir(artifacts_dir).load(source, params)
  runs = run_sweep(
    cycle, scenarios, models, params, out_dir=Path(out_dir), workers=workers, dump_dir=dump_dir
  )
  render_report(list(runs.values()), Path(out_dir) / cycle.name)
  return {
    "cycle": cycle.name,
    "seed": seed,
    "metrics": {name: run.metrics for name, run in runs.items()},
  }


def find_runs(dirs: Sequence[Path]) -> List[Path]:
  """Run directories (holding metrics.json) under the given roots, sorted."""
  found = set()
  for root in dirs:
    root = Path(root)
    if not root.exists():
      raise MissingArtifactError([str(root)])
    found.update(p.parent for p in root.rglob(METRICS_FILE))
  return sorted(found)


def report(dirs: Sequence[Path], out_dir: Path) -> Dict[str, Any]:
  """Render metrics.csv, comparison.md and figures from saved runs.

  Args:
      dirs: Directories searched recursively for run directories.
      out_dir: Directory receiving the report files.

  Returns:
      Summary with the written files.
  """
  logger.debug(f"Executing report over {list(dirs)}")
  run_dirs = find_runs(dirs)
  if not run_dirs:
    raise MissingArtifactError([f"{d}/**/{METRICS_FILE}" for d in dirs])
  runs = [load_run(d) for d in run_dirs]
  paths = render_report(runs, out_dir)
  return {"runs": len(runs), "files": paths}


COMMANDS: Dict[str, Callable[..., Dict[str, Any]]] = {
  "generate-data": generate_data,
  "prepare-data": prepare_data,
  "train-nn": train_nn,
  "identify-lpv": identify_lpv,
  "simulate": simulate,
  "report": report,
}


def run_command(name: str, **kwargs: Any) -> int:
  """Run a command and map its failure to an exit code.

  Returns:
      int: 0 on success, otherwise the exit code of the raised error
        (2 bad config, 3 missing artifact, 4 numerical failure).
  """
  if name not in COMMANDS:
    logger.error(f"Unknown command: {name}")
    return ConfigError.exit_code
  try:
    summary = COMMANDS[name](**kwargs)
  except DieselEmpcError as e:
    logger.error(f"Command {name} failed: {e}", exc_info=True)
    return e.exit_code
  except ValueError as e:
    logger.error(f"Command {name} rejected its input: {e}", exc_info=True)
    return ConfigError.exit_code
  logger.info(f"Command {name} finished: {json.dumps(to_dict(summary), default=str)[:500]}")
  return 0


__all__ = [
  "COMMANDS",
  "find_runs",
  "generate_data",
  "identify_lpv",
  "prepare_data",
  "report",
  "run_command",
  "simulate",
  "train_nn",
]
