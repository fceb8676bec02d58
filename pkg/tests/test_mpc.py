import itertools
from unittest.mock import patch

import numpy as np
import pytest
from scipy.optimize import linprog

from diesel_empc.utils.lpv import LocalModel
from diesel_empc.utils.mpc import (
  Constraint,
  CostTerm,
  Horizon,
  QpProblem,
  check_kkt,
  condense,
  dump_problem,
  load_problem,
  make_rate_model,
  make_tracking_model,
  predict_matrices,
  rate_matrices,
  rate_state,
  solve_qp,
  tracking_state,
)


def _box_oracle(H, f, lb, ub):
  """Best stationary point over all lower/free/upper patterns."""
  n = len(f)
  best_w, best_obj = None, np.inf
  for pattern in itertools.product((-1, 0, 1), repeat=n):
    w = np.zeros(n)
    fixed = [i for i, p in enumerate(pattern) if p != 0]
    free = [i for i, p in enumerate(pattern) if p == 0]
    for i in fixed:
      w[i] = lb[i] if pattern[i] == -1 else ub[i]
    if free:
      rhs = -(f[free] + H[np.ix_(free, fixed)] @ w[fixed])
      w[free] = np.linalg.solve(H[np.ix_(free, free)], rhs)
    if np.all(w >= lb - 1e-12) and np.all(w <= ub + 1e-12):
      obj = 0.5 * w @ H @ w + f @ w
      if obj < best_obj:
        best_w, best_obj = w, obj
  return best_w


def _random_qp(seed, n=6, m=10):
  rng = np.random.default_rng(seed)
  M = rng.standard_normal((n, n))
  H = M @ M.T + 0.1 * np.eye(n)
  f = 3.0 * rng.standard_normal(n)
  w_feas = 0.3 * rng.standard_normal(n)
  G = rng.standard_normal((m, n))
  h = G @ w_feas + rng.uniform(0.1, 1.0, m)
  E = rng.standard_normal((1, n))
  d = E @ w_feas
  return QpProblem(H, f, G, h, E, d)


def _local(rng, n=2, m=3):
  return LocalModel(
    A=rng.uniform(-0.3, 0.3, (n, n)),
    B=rng.standard_normal((n, m)),
    x_ss=rng.uniform(50, 500, n),
    u_ss=rng.uniform(0, 100, m),
    sigma_x=rng.uniform(1, 10, n),
    sigma_u=rng.uniform(1, 10, m),
  )


def _soft_limit_problem(N=4):
  """Move box plus a soft upper limit on the first state, linear slack cost."""
  rng = np.random.default_rng(11)
  rate = make_rate_model(_local(rng))
  C = rate.current_state()
  xi0 = rate_state([1.0, -1.0], [0.8, -0.7], [0.0, 0.0, 0.0])
  terms = [
    CostTerm("quadratic", "state", np.eye(2), range(1, N + 1), C, [0.0, 0.5]),
    CostTerm("quadratic", "move", 0.1 * np.eye(3), range(N)),
    CostTerm("linear", "slack", [50.0], range(N)),
  ]
  cons = [
    Constraint("move", np.eye(3), range(N), lower=-0.5, upper=0.5),
    Constraint("state", C[:1], range(1, N + 1), upper=0.9, slack=range(N)),
  ]
  return condense(rate, Horizon(N), xi0, terms, cons, n_slack=N)


class TestQpProblem:
  def test_rejects_asymmetric_hessian(self):
    with pytest.raises(ValueError, match="symmetric"):
      QpProblem([[1.0, 1.0], [0.0, 1.0]], [0.0, 0.0])

  def test_rejects_indefinite_hessian(self):
    with pytest.raises(ValueError, match="semi-definite"):
      QpProblem([[1.0, 0.0], [0.0, -1.0]], [0.0, 0.0])

  def test_rejects_dimension_mismatch(self):
    with pytest.raises(ValueError):
      QpProblem(np.eye(2), [0.0, 0.0], G=np.ones((1, 3)), h=[1.0])

  def test_rejects_non_finite(self):
    with pytest.raises(ValueError, match="non-finite"):
      QpProblem(np.eye(1), [np.nan])


class TestSolveQp:
  def test_active_lower_bound(self):
    sol = solve_qp(QpProblem([[2.0]], [0.0], G=[[-1.0]], h=[-1.0]))
    assert sol.status == "optimal"
    assert sol.w[0] == pytest.approx(1.0, abs=1e-10)
    assert sol.lam[0] == pytest.approx(2.0, abs=1e-8)

  def test_unconstrained_stationary_point(self):
    sol = solve_qp(QpProblem(np.eye(2), [-1.0, -2.0]))
    assert sol.ok
    np.testing.assert_allclose(sol.w, [1.0, 2.0], atol=1e-10)

  def test_box_qps_match_enumeration(self):
    for seed in range(100):
      rng = np.random.default_rng(1000 + seed)
      M = rng.standard_normal((5, 5))
      H = M @ M.T + 0.5 * np.eye(5)
      f = 3.0 * rng.standard_normal(5)
      lb = rng.uniform(-2.0, -0.1, 5)
      ub = rng.uniform(0.1, 2.0, 5)
      G = np.vstack([np.eye(5), -np.eye(5)])
      h = np.concatenate([ub, -lb])
      sol = solve_qp(QpProblem(H, f, G, h))
      assert sol.ok, seed
      np.testing.assert_allclose(sol.w, _box_oracle(H, f, lb, ub), atol=1e-7)

  def test_kkt_residuals(self):
    for seed in range(20):
      problem = _random_qp(seed)
      sol = solve_qp(problem)
      assert sol.ok
      residuals = check_kkt(problem, sol)
      assert max(residuals.values()) < 1e-8, residuals

  def test_scaling_invariance(self):
    for seed in range(10):
      p = _random_qp(seed)
      base = solve_qp(p).w
      for c in (1e-3, 1e3):
        scaled = QpProblem(c * p.H, c * p.f, c * p.G, c * p.h, p.E, p.d)
        np.testing.assert_allclose(solve_qp(scaled).w, base, atol=1e-8)

  def test_deterministic(self):
    p = _random_qp(3)
    first, second = solve_qp(p), solve_qp(p)
    assert np.array_equal(first.w, second.w)
    assert first.iterations == second.iterations

  def test_feasible_hint_gives_same_solution(self):
    p = _random_qp(4)
    cold = solve_qp(p)
    warm = solve_qp(p, w0=cold.w)
    np.testing.assert_allclose(warm.w, cold.w, atol=1e-9)

  def test_infeasible_with_certificate(self):
    p = QpProblem([[1.0]], [0.0], G=[[1.0], [-1.0]], h=[0.0, -1.0])
    sol = solve_qp(p)
    assert sol.status == "infeasible"
    y = sol.certificate["inequality"]
    assert np.all(y >= -1e-12)
    assert np.abs(p.G.T @ y).max() < 1e-9
    assert p.h @ y < 0

  def test_unbounded(self):
    sol = solve_qp(QpProblem([[1.0, 0.0], [0.0, 0.0]], [0.0, -1.0]))
    assert sol.status == "unbounded"

  def test_singular_hessian_bounded_by_constraint(self):
    sol = solve_qp(QpProblem([[1.0, 0.0], [0.0, 0.0]], [0.0, -1.0], G=[[0.0, 1.0]], h=[3.0]))
    assert sol.ok
    np.testing.assert_allclose(sol.w, [0.0, 3.0], atol=1e-9)

  def test_degenerate_optimum_resolves_to_min_norm(self):
    G = np.vstack([np.eye(3), -np.eye(3)])
    h = np.concatenate([np.full(3, 1.0), np.full(3, 2.0)])
    sol = solve_qp(QpProblem(np.zeros((3, 3)), np.zeros(3), G, h))
    assert sol.ok
    np.testing.assert_allclose(sol.w, 0.0, atol=1e-9)

  def test_positive_cost_on_sign_bounded_direction_is_optimal(self):
    sol = solve_qp(QpProblem([[1.0, 0.0], [0.0, 0.0]], [0.0, 1.0], G=[[0.0, -1.0]], h=[0.0]))
    assert sol.ok
    np.testing.assert_allclose(sol.w, [0.0, 0.0], atol=1e-9)

  def test_sign_bounded_kernel_with_negative_cost_is_unbounded(self):
    sol = solve_qp(QpProblem([[1.0, 0.0], [0.0, 0.0]], [0.0, -1.0], G=[[0.0, -1.0]], h=[0.0]))
    assert sol.status == "unbounded"

  def test_feasible_start_skips_linear_programs(self):
    cq = _soft_limit_problem()
    cold = solve_qp(cq.problem)
    start = cq.feasible_start(np.zeros((cq.horizon.N, cq.rate.n_u)))
    with patch("diesel_empc.utils.mpc.mpc_qp.linprog", wraps=linprog) as lp:
      warm = solve_qp(cq.problem, w0=start)
    lp.assert_not_called()
    assert warm.ok
    np.testing.assert_allclose(warm.w, cold.w, atol=1e-7)

  def test_infeasible_start_falls_back_to_phase_one(self):
    cq = _soft_limit_problem()
    start = cq.feasible_start(np.full((cq.horizon.N, cq.rate.n_u), 2.0))
    with patch("diesel_empc.utils.mpc.mpc_qp.linprog", wraps=linprog) as lp:
      sol = solve_qp(cq.problem, w0=start)
    assert lp.call_count >= 1
    assert sol.ok

  def test_dump_and_reload(self, tmp_path):
    p = _random_qp(5)
    path = dump_problem(p, tmp_path / "qp" / "failed.json", {"step": 12})
    again = load_problem(path)
    np.testing.assert_allclose(solve_qp(again).w, solve_qp(p).w, atol=1e-12)


class TestRateModel:
  def test_zero_model_is_integrator_template(self):
    rate = rate_matrices(np.zeros((2, 2)), np.zeros((2, 3)))
    I2, I3 = np.eye(2), np.eye(3)
    expected = np.zeros((7, 7))
    expected[2:4, 0:2] = I2
    expected[2:4, 2:4] = I2
    expected[4:7, 4:7] = I3
    np.testing.assert_array_equal(rate.A_ext, expected)
    np.testing.assert_array_equal(rate.B_ext, np.vstack([np.zeros((4, 3)), I3]))

  def test_block_template(self):
    rng = np.random.default_rng(0)
    local = _local(rng)
    rate = make_rate_model(local)
    np.testing.assert_array_equal(rate.A_ext[rate.block("dx"), rate.block("dx")], local.A)
    np.testing.assert_array_equal(rate.B_ext[rate.block("dx")], local.B)
    assert rate.layout == ("dx", "x_prev", "u_prev")
    assert (rate.n_x, rate.n_u, rate.n_ext) == (2, 3, 7)

  def test_equilibrium_is_constant(self):
    rate = make_rate_model(_local(np.random.default_rng(1)))
    xi0 = rate_state([4.0, 5.0], [4.0, 5.0], [1.0, 2.0, 3.0])
    traj = rate.rollout(xi0, np.zeros((20, 3)))
    np.testing.assert_array_equal(traj, np.tile(xi0, (21, 1)))

  def test_reproduces_direct_rollout_for_any_offset(self):
    for seed in range(100):
      rng = np.random.default_rng(seed)
      local = _local(rng)
      A, B = local.A, local.B
      x_off, u_off = rng.uniform(-50, 50, 2), rng.uniform(-50, 50, 3)
      u = rng.standard_normal((31, 3))
      x = np.zeros((32, 2))
      x[0] = rng.standard_normal(2)
      for k in range(31):
        x[k + 1] = A @ x[k] + B @ u[k]
      # absolute scaled signals with an arbitrary equilibrium
      xs, us = x + x_off, u + u_off
      rate = make_rate_model(local)
      xi0 = rate_state(xs[1], xs[0], us[0])
      traj = rate.rollout(xi0, np.diff(us, axis=0))
      np.testing.assert_allclose(traj @ rate.current_state().T, xs[1:], atol=1e-10)

  def test_tracking_error_follows_state(self):
    rng = np.random.default_rng(7)
    local = _local(rng, m=2)
    rate = make_tracking_model(local)
    r = np.array([3.0, -1.0])
    xi0 = tracking_state([1.0, 2.0], [0.5, 2.5], r, [0.0, 0.0])
    traj = rate.rollout(xi0, rng.standard_normal((10, 2)))
    z = traj @ rate.current_state().T
    np.testing.assert_allclose(traj[:, rate.block("e")], z - r, atol=1e-12)

  def test_disturbance_column(self):
    local = LocalModel(
      A=0.5 * np.eye(2), B=np.ones((2, 2)), x_ss=[1.0, 1.0], u_ss=[1.0, 1.0],
      sigma_x=[1.0, 1.0], sigma_u=[1.0, 1.0],
      Bf=[[1.0], [2.0]], d_ss=[10.0], sigma_d=[2.0],
    )
    rate = make_rate_model(local)
    assert rate.n_d == 1
    xi = rate.step(np.zeros(6), np.zeros(2), np.array([1.0]))
    np.testing.assert_allclose(xi[:2], [1.0, 2.0])

  def test_dimension_mismatch(self):
    with pytest.raises(ValueError):
      rate_matrices(np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
      rate_matrices(np.zeros((2, 2)), np.zeros((3, 3)))

  def test_horizon_positive(self):
    with pytest.raises(ValueError):
      Horizon(0)
    assert Horizon(10, 0.1).seconds == pytest.approx(1.0)


def _scalar_problem():
  rate = rate_matrices([[0.8]], [[0.5]])
  horizon = Horizon(2)
  xi0 = rate_state([0.2], [0.0], [0.0])
  terms = [
    CostTerm("quadratic", "state", [[1.0]], [1, 2], rate.current_state(), [1.0]),
    CostTerm("quadratic", "move", [[0.1]], [0, 1]),
  ]
  cons = [Constraint("move", [[1.0]], [0, 1], lower=-1.0, upper=1.0)]
  return rate, horizon, xi0, condense(rate, horizon, xi0, terms, cons)


class TestCondense:
  def test_prediction_matches_rollout(self):
    rng = np.random.default_rng(3)
    rate = make_rate_model(_local(rng))
    N = 6
    Phi, Gamma, _ = predict_matrices(rate.A_ext, rate.B_ext, N)
    xi0 = rng.standard_normal(7)
    du = rng.standard_normal((N, 3))
    traj = rate.rollout(xi0, du)
    for j in range(N + 1):
      np.testing.assert_allclose(Phi[j] @ xi0 + Gamma[j] @ du.reshape(-1), traj[j], atol=1e-12)

  def test_zero_problem_returns_zero_moves(self):
    rate = rate_matrices(np.zeros((2, 2)), np.zeros((2, 3)))
    cq = condense(
      rate, Horizon(1), np.zeros(7), [CostTerm("quadratic", "move", np.zeros((3, 3)), [0])]
    )
    sol = solve_qp(cq.problem)
    assert sol.ok
    np.testing.assert_allclose(sol.w, 0.0, atol=1e-12)
    assert cq.cost(sol.w) == pytest.approx(0.0, abs=1e-12)

  def test_cost_matches_direct_evaluation(self):
    rate, _, xi0, cq = _scalar_problem()
    C = rate.current_state()
    rng = np.random.default_rng(0)
    for _ in range(20):
      du = rng.uniform(-1, 1, 2)
      x = rate.rollout(xi0, du.reshape(2, 1)) @ C.T
      direct = float(np.sum((x[1:, 0] - 1.0) ** 2) + 0.1 * np.sum(du**2))
      assert cq.cost(du) == pytest.approx(direct, abs=1e-10)

  def test_two_step_matches_grid_search(self):
    _, _, _, cq = _scalar_problem()
    sol = solve_qp(cq.problem)
    assert sol.ok

    def grid_cost(a, b):
      W = np.stack(np.meshgrid(a, b, indexing="ij"), axis=-1).reshape(-1, 2)
      H, f = cq.problem.H, cq.problem.f
      costs = 0.5 * np.einsum("ki,ij,kj->k", W, H, W) + W @ f + cq.offset
      return W[np.argmin(costs)], costs.min()

    coarse, _ = grid_cost(np.linspace(-1, 1, 201), np.linspace(-1, 1, 201))
    fine_a = np.clip(np.linspace(coarse[0] - 0.05, coarse[0] + 0.05, 1001), -1, 1)
    fine_b = np.clip(np.linspace(coarse[1] - 0.05, coarse[1] + 0.05, 1001), -1, 1)
    best, best_cost = grid_cost(fine_a, fine_b)
    np.testing.assert_allclose(sol.w, best, atol=1e-3)
    assert cq.cost(sol.w) <= best_cost + 1e-12

  def test_slack_equals_violation(self):
    rate = rate_matrices([[0.5]], [[1.0]])
    horizon = Horizon(3)
    xi0 = rate_state([2.0], [2.0], [0.0])
    cons = [
      Constraint("state", rate.current_state(), [1, 2, 3], upper=1.0, slack=[0, 1, 2]),
      Constraint("move", [[1.0]], [0, 1, 2], lower=0.0, upper=0.0),
    ]
    terms = [CostTerm("linear", "slack", [1e3], [0, 1, 2])]
    cq = condense(rate, horizon, xi0, terms, cons, n_slack=3)
    sol = solve_qp(cq.problem)
    assert sol.ok
    np.testing.assert_allclose(cq.slacks(sol.w), [1.0, 1.0, 1.0], atol=1e-8)

  def test_optimum_beats_random_feasible_points(self):
    rng = np.random.default_rng(11)
    local = _local(rng)
    rate = make_rate_model(local)
    N = 4
    C = rate.current_state()
    xi0 = rate_state([1.0, -1.0], [0.8, -0.7], [0.0, 0.0, 0.0])
    terms = [
      CostTerm("quadratic", "state", np.eye(2), range(1, N + 1), C, [0.0, 0.5]),
      CostTerm("quadratic", "move", 0.1 * np.eye(3), range(N)),
      CostTerm("linear", "slack", [50.0], range(N)),
    ]
    cons = [
      Constraint("move", np.eye(3), range(N), lower=-0.5, upper=0.5),
      Constraint("state", C[:1], range(1, N + 1), upper=0.9, slack=range(N)),
    ]
    cq = condense(rate, Horizon(N), xi0, terms, cons, n_slack=N)
    sol = solve_qp(cq.problem)
    assert sol.ok
    best = cq.cost(sol.w)
    for _ in range(1000):
      du = rng.uniform(-0.5, 0.5, N * 3)
      x = (cq.trajectory(np.concatenate([du, np.zeros(N)])) @ C.T)[1:, 0]
      eps = np.maximum(x - 0.9, 0.0) + rng.uniform(0.0, 0.1, N)
      w = np.concatenate([du, eps])
      assert cq.problem.violation(w) < 1e-12
      assert best <= cq.cost(w) + 1e-9

  def test_feasible_start_slacks_cover_violation(self):
    cq = _soft_limit_problem()
    rng = np.random.default_rng(5)
    C = cq.rate.current_state()
    for _ in range(20):
      moves = rng.uniform(-0.5, 0.5, (cq.horizon.N, cq.rate.n_u))
      w = cq.feasible_start(moves)
      x = (cq.trajectory(w) @ C.T)[1:, 0]
      assert cq.problem.violation(w) < 1e-12
      np.testing.assert_allclose(cq.slacks(w), np.maximum(x - 0.9, 0.0), atol=1e-12)

  def test_rejects_negative_linear_weight(self):
    with pytest.raises(ValueError):
      CostTerm("linear", "slack", [-1.0], [0])

  def test_rejects_asymmetric_quadratic_weight(self):
    with pytest.raises(ValueError):
      CostTerm("quadratic", "move", [[1.0, 1.0], [0.0, 1.0]], [0])

  def test_rejects_bad_disturbance_shape(self):
    rate = rate_matrices(np.eye(2) * 0.5, np.ones((2, 2)), np.ones((2, 1)))
    with pytest.raises(ValueError):
      condense(rate, Horizon(3), np.zeros(6), [], disturbance=np.zeros((2, 1)))

  def test_rejects_step_outside_horizon(self):
    rate = rate_matrices([[0.5]], [[1.0]])
    with pytest.raises(ValueError):
      condense(rate, Horizon(2), np.zeros(3), [CostTerm("quadratic", "move", [[1.0]], [2])])
