"""Grid identification: one perturbation experiment and two local fits per node."""

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Tuple

from ...errors import ModelQualityError
from ...inputs import GridConfig, OperatingPoint, PerturbationSpec, PlantParams
from ..plant.plant_emissions import REFERENCE_PLANT
from ..plant.plant_sources import EmissionSource
from .lpv_experiment import run_perturbation
from .lpv_fit import fit_local
from .lpv_grid import ScheduleGrid
from .lpv_maps import TargetMaps
from .lpv_model import LocalModel, LpvGridModel, ModelKind

logger = logging.getLogger(__name__)

NodeTask = Tuple[int, OperatingPoint, GridConfig, TargetMaps, PlantParams, Optional[EmissionSource]]

KINDS: Tuple[ModelKind, ...] = ("emissions", "airpath")


def retry_spec(spec: PerturbationSpec, cfg: GridConfig) -> PerturbationSpec:
  """Longer experiment with smaller steps, for nodes whose first fit was rejected."""
  ident = cfg.ident
  return spec.model_copy(
    update={
      "duration": spec.duration * ident.retry_duration_factor,
      "amplitude_pct": spec.amplitude_pct * ident.retry_amplitude_factor,
      "fuel_amplitude_pct": spec.fuel_amplitude_pct * ident.retry_amplitude_factor,
    }
  )


def identify_node(task: NodeTask) -> Tuple[LocalModel, LocalModel]:
  """Emissions and airpath local models at one node.

  A rejected fit is re-identified once from `retry_spec`; the lower rollout
  error wins.
  """
  index, rho, cfg, maps, params, source = task
  spec = cfg.perturbation.model_copy(update={"seed": cfg.perturbation.seed + index})
  v_ss = maps.lookup(rho).v_ss
  ident = cfg.ident.model_copy(update={"strict": False})
  log = run_perturbation(rho, spec, v_ss, params, source)
  fits: Dict[str, LocalModel] = {kind: fit_local(log, kind, ident) for kind in KINDS}

  rejected = [kind for kind in KINDS if fits[kind].flagged]
  if rejected:
    logger.info(f"Re-identifying {rejected} at {rho.as_tuple()} with a longer experiment")
    log = run_perturbation(rho, retry_spec(spec, cfg), v_ss, params, source)
    for kind in rejected:
      again = fit_local(log, kind, ident)
      if again.rollout_error < fits[kind].rollout_error:
        fits[kind] = again
  for kind in KINDS:
    if cfg.ident.strict and fits[kind].flagged:
      raise ModelQualityError(
        f"{kind} fit at {rho.as_tuple()} has rollout error "
        f"{fits[kind].rollout_error:.3f} over the gate {cfg.ident.rollout_gate}"
      )
  return fits["emissions"], fits["airpath"]


def substitute_flagged(model: LpvGridModel) -> LpvGridModel:
  """Model whose rejected nodes use the dynamics of the nearest accepted node.

  A replaced node keeps its own equilibrium and scales, so only (A, B, Bf) move.
  Distance counts grid steps; ties go to the lower node index.
  """
  nf = len(model.grid.fuels)
  accepted = [k for k, lm in enumerate(model.locals) if not lm.flagged]
  rejected = [k for k, lm in enumerate(model.locals) if lm.flagged]
  if not rejected:
    return model
  if not accepted:
    raise ModelQualityError(f"Every {model.kind} node fit exceeds the rollout gate")

  locals_ = list(model.locals)
  replaced = []
  for k in rejected:
    i, j = divmod(k, nf)
    donor = min(accepted, key=lambda a: (abs(a // nf - i) + abs(a % nf - j), a))
    src = model.locals[donor]
    locals_[k] = dataclasses.replace(
      model.locals[k],
      A=src.A.copy(),
      B=src.B.copy(),
      Bf=None if src.Bf is None else src.Bf.copy(),
      rollout_error=src.rollout_error,
      flagged=False,
      projected=src.projected,
      substituted_from=divmod(donor, nf),
    )
    replaced.append([i, j, *divmod(donor, nf)])
  logger.warning(
    f"{len(replaced)} {model.kind} node(s) use the dynamics of a neighboring node: "
    f"{[tuple(r) for r in replaced]}"
  )
  metadata = {**model.metadata, "substituted": replaced}
  return LpvGridModel(model.kind, model.grid, locals_, metadata)


def identify_grid(
  cfg: GridConfig,
  maps: TargetMaps,
  params: PlantParams = REFERENCE_PLANT,
  source: Optional[EmissionSource] = None,
  workers: int = 1,
) -> Tuple[LpvGridModel, LpvGridModel]:
  """Identify the emissions and airpath LPV models over every grid node.

  Node experiments are independent and seeded by node index, so results do not
  depend on `workers`; they are gathered in node order.
  """
  grid = ScheduleGrid.from_config(cfg)
  if grid != maps.grid:
    raise ValueError("Target maps were built on a different grid")
  tasks: List[NodeTask] = [
    (i * len(grid.fuels) + j, rho, cfg, maps, params, source) for i, j, rho in grid.nodes()
  ]
  logger.info(f"Identifying {len(tasks)} nodes with {workers} worker(s)")
  if workers > 1:
    with ProcessPoolExecutor(max_workers=workers) as pool:
      results = list(pool.map(identify_node, tasks))
  else:
    results = [identify_node(task) for task in tasks]

  metadata = {
    "plant": params.name,
    "source": source.name if source is not None else "truth",
    "seed": cfg.perturbation.seed,
    "duration": cfg.perturbation.duration,
  }
  emissions = LpvGridModel("emissions", grid, [r[0] for r in results], dict(metadata))
  airpath = LpvGridModel("airpath", grid, [r[1] for r in results], dict(metadata))
  models = []
  for model in (emissions, airpath):
    flagged = model.flagged_nodes()
    if flagged:
      logger.warning(f"{len(flagged)} {model.kind} node fit(s) exceed the rollout gate: {flagged}")
      if cfg.ident.substitute:
        model = substitute_flagged(model)
    models.append(model)
  return models[0], models[1]
