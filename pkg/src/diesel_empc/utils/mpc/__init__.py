"""MPC utility modules.

Optimization machinery shared by both controllers:
- mpc_qp: dense convex QP solver, KKT residuals and QP dumps
- mpc_rate: rate-based extended-state models and horizons
- mpc_condense: prediction matrices and condensed horizon QPs
"""

from .mpc_condense import (
  AffineExpr,
  CondensedQp,
  Constraint,
  CostTerm,
  condense,
  predict_matrices,
)
from .mpc_qp import (
  QpProblem,
  QpSolution,
  check_kkt,
  dump_problem,
  load_problem,
  solve_qp,
)
from .mpc_rate import (
  Horizon,
  RateModel,
  make_rate_model,
  make_tracking_model,
  nominal_model,
  rate_matrices,
  rate_state,
  tracking_matrices,
  tracking_state,
)

__all__ = [
  "AffineExpr",
  "CondensedQp",
  "Constraint",
  "CostTerm",
  "condense",
  "predict_matrices",
  "QpProblem",
  "QpSolution",
  "check_kkt",
  "dump_problem",
  "load_problem",
  "solve_qp",
  "Horizon",
  "RateModel",
  "make_rate_model",
  "make_tracking_model",
  "nominal_model",
  "rate_matrices",
  "rate_state",
  "tracking_matrices",
  "tracking_state",
]
