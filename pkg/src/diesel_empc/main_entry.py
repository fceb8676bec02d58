"""Main entry point module for CLI argument parsing and execution logic.

This module contains the main() function that parses the command line, resolves
settings and plant parameters, and dispatches to the command layer.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from .commands import run_command
from .errors import DieselEmpcError
from .inputs import PlantParams, Settings
from .logger import setup_logging
from .settings import get_package_version, load_plant_params, load_settings
from .utils.harness import CYCLE_NAMES
from .utils.harness.harness_runner import NN_MODEL_FILE

# Get logger for this module
logger = logging.getLogger(__name__)

_NEEDS_PLANT = {"generate-data", "identify-lpv", "simulate"}


def _global_flags() -> argparse.ArgumentParser:
  # SUPPRESS keeps a flag given before the subcommand from being reset after it
  common = argparse.ArgumentParser(add_help=False)
  common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Root seed")
  common.add_argument("--out", default=argparse.SUPPRESS, help="Output directory")
  common.add_argument(
    "--plant", default=argparse.SUPPRESS, help="Plant parameter JSON (plant.json)"
  )
  common.add_argument(
    "--workers", type=int, default=argparse.SUPPRESS, help="Worker processes"
  )
  common.add_argument(
    "--log-level",
    choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
    default=argparse.SUPPRESS,
    help="Optional logging level override",
  )
  common.add_argument(
    "--dump-qp-on-error",
    metavar="DIR",
    default=argparse.SUPPRESS,
    help="Write failing QP problems as JSON into DIR",
  )
  return common


def _build_parser() -> argparse.ArgumentParser:
  common = _global_flags()
  parser = argparse.ArgumentParser(
    prog="diesel-empc",
    description="Diesel engine emissions lab: data, network, LPV models and EMPC runs",
    parents=[common],
  )
  parser.add_argument(
    "--version",
    action="store_true",
    help="Print package version and exit",
  )
  sub = parser.add_subparsers(dest="command", metavar="COMMAND")

  gen = sub.add_parser(
    "generate-data", parents=[common], help="Generate steady and transient plant logs"
  )
  gen.add_argument("--n-steady", type=int, help="Steady-state sample count")
  gen.add_argument("--n-transient", type=int, help="Transient sample count")

  prep = sub.add_parser(
    "prepare-data", parents=[common], help="Select, filter, split and balance logs"
  )
  prep.add_argument("--data", required=True, help="Directory written by generate-data")
  prep.add_argument("--eps", type=float, help="Mahalanobis outlier threshold")

  tr = sub.add_parser("train-nn", parents=[common], help="Train the emissions network")
  tr.add_argument("--data", required=True, help="Directory written by prepare-data")
  tr.add_argument("--config", help="Training config JSON (train.json)")
  tr.add_argument("--epochs", type=int, help="Override the epoch count")
  tr.add_argument(
    "--hidden", type=int, nargs="+", metavar="N", help="Override the hidden layer sizes"
  )

  ident = sub.add_parser(
    "identify-lpv", parents=[common], help="Build target maps and identify LPV models"
  )
  ident.add_argument("--nn", help=f"Trained network ({NN_MODEL_FILE}); plant truth if omitted")
  ident.add_argument("--grid", help="Grid config JSON (grid.json)")
  ident.add_argument(
    "--no-validate", action="store_true", help="Skip the open-loop LPV validation"
  )

  sim = sub.add_parser("simulate", parents=[common], help="Run closed-loop scenarios")
  sim.add_argument("--cycle", required=True, choices=CYCLE_NAMES, help="Drive cycle")
  sim.add_argument("--scenario", default="all", help="Scenario name or 'all'")
  sim.add_argument(
    "--artifacts", required=True, help="Directory with the network, LPV and map files"
  )
  sim.add_argument(
    "--source",
    choices=["nn", "truth"],
    default="nn",
    help="Emission measurement used by the controllers",
  )
  sim.add_argument("--scenarios", help="Scenarios JSON (scenarios.json)")

  rep = sub.add_parser("report", parents=[common], help="Render reports from saved runs")
  rep.add_argument("dirs", nargs="+", metavar="DIR", help="Run directories to collect")
  return parser


def _parse_args(argv: list[str] | None = None) -> argparse.Namespace:
  """Build and parse CLI arguments."""
  return _build_parser().parse_args(argv)


def _command_kwargs(
  args: argparse.Namespace, settings: Settings, params: Optional[PlantParams]
) -> Dict[str, Any]:
  """Translate parsed arguments into keyword arguments of the command function."""
  out = Path(settings.out_dir)
  seed = settings.seed
  if args.command == "generate-data":
    return {
      "out_dir": out,
      "seed": seed,
      "params": params,
      "n_steady": args.n_steady,
      "n_transient": args.n_transient,
    }
  if args.command == "prepare-data":
    return {"data_dir": Path(args.data), "out_dir": out, "seed": seed, "eps": args.eps}
  if args.command == "train-nn":
    return {
      "data_dir": Path(args.data),
      "out_path": out / NN_MODEL_FILE,
      "seed": seed,
      "config_path": args.config,
      "epochs": args.epochs,
      "hidden_sizes": args.hidden,
    }
  if args.command == "identify-lpv":
    return {
      "out_dir": out,
      "seed": seed,
      "params": params,
      "nn_path": Path(args.nn) if args.nn else None,
      "grid_path": args.grid,
      "workers": settings.workers,
      "validate": not args.no_validate,
    }
  if args.command == "simulate":
    dump = getattr(args, "dump_qp_on_error", None)
    return {
      "cycle_name": args.cycle,
      "scenario_name": args.scenario,
      "artifacts_dir": Path(args.artifacts),
      "out_dir": out,
      "seed": seed,
      "params": params,
      "source": args.source,
      "workers": settings.workers,
      "dump_dir": Path(dump) if dump else None,
      "scenarios_file": args.scenarios,
    }
  return {"dirs": [Path(d) for d in args.dirs], "out_dir": out}


def _resolve(args: argparse.Namespace) -> Tuple[Settings, Optional[PlantParams]]:
  settings = load_settings(
    seed=getattr(args, "seed", None),
    out_dir=getattr(args, "out", None),
    plant_path=getattr(args, "plant", None),
    workers=getattr(args, "workers", None),
  )
  params = None
  if args.command in _NEEDS_PLANT:
    params = load_plant_params(settings.plant_path)
  return settings, params


def main(argv: list[str] | None = None) -> int:
  """Entry point for the CLI.

  Returns:
      int: Process exit code (0 success, 2 bad config, 3 missing artifact,
        4 numerical failure).
  """
  args = _parse_args(argv)

  if getattr(args, "version", False) is True:
    print(get_package_version())
    return 0

  if not args.command:
    _build_parser().print_help(sys.stderr)
    return 2

  setup_logging(level=getattr(args, "log_level", None))

  try:
    settings, params = _resolve(args)
  except DieselEmpcError as e:
    logger.error(f"Could not resolve configuration: {e}")
    return e.exit_code

  logger.info(f"Running {args.command} (seed={settings.seed}, out={settings.out_dir})")
  return run_command(args.command, **_command_kwargs(args, settings, params))
