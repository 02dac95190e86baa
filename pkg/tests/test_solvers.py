import numpy as np
import pytest

from src.core.dense import (
    SpdMatrix,
    as_block,
    gram,
    matvec_block,
    norm2,
    residual_block,
    residual_column,
    to_fractions,
)
from src.core.errors import DimensionMismatchError, SpdViolationError
from src.models.schemas import Algorithm, ProblemSpec, ScalarMode, StopRule, TerminalStatus
from src.parallel.counters import count_iteration_mults
from src.problems.generators import make_problem
from src.solvers import (
    cg_solve,
    ccg_solve,
    compute_alpha,
    compute_beta,
    finish_with_cg,
    get_solver,
    mccg_solve,
    solve_with_fallback,
    steepest_descent_solve,
)
from src.solvers.cooperative import BlockState, _drop_dependent_agents
from src.solvers.verification import bound_violations, span_dimension


def rational(n: int, p: int, seed: int):
    return make_problem(ProblemSpec(n=n, p=p, seed=seed, mode=ScalarMode.RATIONAL))


def exact_residual_is_zero(problem, x) -> bool:
    return not any(residual_column(problem.A, x, problem.b))


# --- single-agent baselines ------------------------------------------------


@pytest.mark.parametrize("algo", ["cg", "ccg", "sd"])
def test_identity_converges_in_one_iteration(algo):
    rng = np.random.default_rng(0)
    A = SpdMatrix(np.eye(10))
    b = rng.uniform(-10, 10, 10)
    X0 = rng.uniform(-10, 10, (10, 3))
    start = X0 if algo == "ccg" else X0[:, 0]
    trace = get_solver(algo)(A, b, start)
    assert trace.status == TerminalStatus.CONVERGED
    assert trace.iterations == 1


def test_cg_small_diagonal_within_dimension():
    A = SpdMatrix(np.diag([1.0, 2.0, 3.0]))
    trace = cg_solve(A, np.ones(3), np.zeros(3))
    assert trace.converged
    assert trace.iterations <= 3
    np.testing.assert_allclose(trace.final_x[:, 0], [1.0, 0.5, 1 / 3], atol=1e-6)


def test_cg_rational_terminates_exactly():
    problem = rational(8, 2, seed=4)
    trace = cg_solve(problem.A, problem.b, problem.X0[:, 0])
    assert trace.converged
    assert trace.iterations <= 8
    assert exact_residual_is_zero(problem, trace.final_x[:, 0])
    assert trace.final_minres == 0.0


def test_cg_mults_per_iteration():
    problem = make_problem(ProblemSpec(n=40, p=2, cond=10.0, seed=2))
    trace = cg_solve(problem.A, problem.b, problem.X0[:, 0], tol=1e-8)
    assert trace.records[0].mults == 40 * 40
    assert trace.records[1].mults == count_iteration_mults(40, 1)


def test_steepest_descent_worst_case_contraction():
    A = SpdMatrix(np.diag([1.0, 9.0]))
    trace = steepest_descent_solve(
        A, np.zeros(2), np.array([9.0, 1.0]), tol=1e-300, max_iters=10, x_star=np.zeros(2)
    )
    errors = [rec.a_norm_errors[0] for rec in trace.records]
    for before, after in zip(errors, errors[1:]):
        assert after / before == pytest.approx(0.8, rel=1e-9)


def test_steepest_descent_rational():
    problem = rational(4, 1, seed=0)
    trace = steepest_descent_solve(
        problem.A, problem.b, problem.X0[:, 0], max_iters=3, x_star=problem.x_star
    )
    assert trace.mode == ScalarMode.RATIONAL
    errors = [rec.a_norm_errors[0] for rec in trace.records]
    assert all(after < before for before, after in zip(errors, errors[1:]))


def test_cg_rejects_indefinite_matrix():
    A = SpdMatrix(np.diag([1.0, -1.0]), spd_checks=0)
    with pytest.raises(SpdViolationError):
        cg_solve(A, np.zeros(2), np.array([0.0, 1.0]))


def test_float_tolerance_must_be_positive():
    with pytest.raises(ValueError):
        cg_solve(SpdMatrix(np.eye(3)), np.ones(3), np.zeros(3), tol=0.0)


# --- cooperative steps -------------------------------------------------------


def test_alpha_with_orthogonal_residuals():
    A = SpdMatrix(np.diag([1.0, 2.0, 3.0, 4.0]))
    R = as_block(np.array([[2.0, 0.0], [0.0, 3.0], [0.0, 0.0], [0.0, 0.0]]))
    D = R.copy()
    AD = matvec_block(A, D)
    alpha = compute_alpha(R, D, AD, gram(D, AD))
    assert alpha.tolist() == [[-1.0, 0.0], [0.0, -0.5]]


def test_step_orthogonality():
    rng = np.random.default_rng(8)
    G = rng.standard_normal((8, 8))
    A = SpdMatrix(G @ G.T + 8 * np.eye(8))
    R = as_block(rng.standard_normal((8, 2)))
    D = R.copy()
    AD = matvec_block(A, D)
    M = gram(D, AD)
    alpha = compute_alpha(R, D, AD, M)
    R_next = R + AD @ alpha.T
    assert np.max(np.abs(R_next.T @ D)) <= 1e-10 * np.max(np.abs(R.T @ D))

    beta = compute_beta(as_block(R_next), AD, M)
    D_next = R_next + D @ beta.T
    assert np.max(np.abs(D_next.T @ AD)) <= 1e-10 * np.max(np.abs(M))


def test_compute_alpha_shape_mismatch():
    with pytest.raises(DimensionMismatchError):
        compute_alpha(np.ones((4, 2)), np.ones((4, 3)), np.ones((4, 3)), np.eye(3))


def test_ccg_rejects_wrong_start_shape():
    with pytest.raises(DimensionMismatchError):
        ccg_solve(SpdMatrix(np.eye(5)), np.ones(5), np.zeros((4, 2)))
    with pytest.raises(ValueError):
        ccg_solve(SpdMatrix(np.eye(3)), np.ones(3), np.zeros((3, 3)))


def test_ccg_rejects_negative_curvature():
    A = SpdMatrix(np.diag([1.0, 1.0, -1.0, -1.0]), spd_checks=0)
    with pytest.raises(SpdViolationError):
        ccg_solve(A, np.zeros(4), np.array([[0.0], [0.0], [1.0], [0.0]]))


def test_ccg_mults_per_iteration(float_problem):
    trace = ccg_solve(float_problem.A, float_problem.b, float_problem.X0, max_iters=3)
    assert trace.records[0].mults == 3 * 120 * 120
    assert trace.records[1].mults == 3 * count_iteration_mults(120, 3)


def test_ccg_beats_cg_in_iterations(float_problem):
    coop = ccg_solve(float_problem.A, float_problem.b, float_problem.X0, tol=1e-6)
    single = cg_solve(float_problem.A, float_problem.b, float_problem.X0[:, 0], tol=1e-6)
    assert coop.converged and single.converged
    assert coop.iterations < single.iterations


# --- exact termination -------------------------------------------------------


def check_exact_termination(n: int, p: int, seed: int) -> None:
    problem = rational(n, p, seed)
    trace = ccg_solve(problem.A, problem.b, problem.X0)
    if trace.status == TerminalStatus.RANK_COLLAPSE:
        trace = mccg_solve(problem.A, problem.b, problem.X0)
        assert trace.converged
        assert trace.iterations <= n
        assert exact_residual_is_zero(problem, trace.final_x[:, trace.converged_agent])
        return
    assert trace.converged
    assert trace.iterations == n // p
    assert all(norm == 0.0 for norm in trace.records[-1].residual_norms)
    for j in range(p):
        assert exact_residual_is_zero(problem, trace.final_x[:, j])


@pytest.mark.parametrize("n,p,seed", [(6, 2, 0), (6, 3, 1), (8, 4, 2), (12, 3, 3), (12, 4, 4)])
def test_exact_termination_after_n_over_p_iterations(n, p, seed):
    check_exact_termination(n, p, seed)


@pytest.mark.parametrize("n,p", [(4, 2), (6, 2), (6, 3), (8, 4), (9, 3), (12, 4)])
def test_exact_termination_over_seeds(n, p):
    for seed in range(25):
        check_exact_termination(n, p, seed)


@pytest.mark.slow
@pytest.mark.parametrize("n,p", [(n, p) for n in (6, 12, 18) for p in range(1, n) if n % p == 0])
def test_exact_termination_grid(n, p):
    for seed in range(25):
        check_exact_termination(n, p, seed)


def test_cooperative_reduces_to_cg_bit_for_bit():
    problem = make_problem(ProblemSpec(n=300, p=1, cond=1e4, seed=21))
    coop = ccg_solve(problem.A, problem.b, problem.X0, tol=1e-300, max_iters=100, verify=True)
    single = cg_solve(problem.A, problem.b, problem.X0[:, 0], tol=1e-300, max_iters=100, verify=True)
    assert coop.iterations == single.iterations == 100
    assert np.array_equal(coop.final_x, single.final_x)
    for a, b in zip(coop.records, single.records):
        assert a.residual_norms == b.residual_norms
        assert a.mults == b.mults
    for a, b in zip(coop.history, single.history):
        assert np.array_equal(a.X, b.X)
        assert np.array_equal(a.D, b.D)


def test_finish_with_cg_after_rank_collapse():
    problem = rational(7, 3, seed=6)
    trace = ccg_solve(problem.A, problem.b, problem.X0, verify=True)
    assert trace.status == TerminalStatus.RANK_COLLAPSE
    assert trace.iterations == 2
    assert span_dimension(trace.history, 1, "D") == 6

    finished = finish_with_cg(problem.A, problem.b, trace)
    assert finished.converged
    assert finished.iterations <= 1
    assert exact_residual_is_zero(problem, finished.final_x[:, 0])


# --- rank-safe variant -------------------------------------------------------


def test_mccg_drops_duplicate_start():
    problem = rational(6, 3, seed=2)
    X0 = problem.X0.copy()
    X0[:, 1] = X0[:, 0]
    trace = mccg_solve(problem.A, problem.b, X0)
    first = trace.records[0]
    assert first.p_k == 2
    assert first.active_agents == [0, 2]
    assert trace.converged
    assert trace.iterations <= 6
    assert np.array_equal(trace.final_x[:, 1], X0[:, 1])


def test_ccg_reports_rank_collapse_on_duplicate_start():
    problem = rational(6, 3, seed=2)
    X0 = problem.X0.copy()
    X0[:, 1] = X0[:, 0]
    trace = ccg_solve(problem.A, problem.b, X0)
    assert trace.status == TerminalStatus.RANK_COLLAPSE
    assert trace.iterations == 0

    recovered = solve_with_fallback(problem.A, problem.b, X0)
    assert recovered.algorithm == Algorithm.MCCG
    assert recovered.converged


def test_mccg_retires_agent_started_at_solution():
    problem = rational(6, 3, seed=3)
    X0 = problem.X0.copy()
    X0[:, 1] = problem.x_star
    trace = mccg_solve(problem.A, problem.b, X0, stop_rule=StopRule.ALL_AGENTS)
    assert trace.records[0].active_agents == [0, 2]
    assert trace.converged_agent == 1
    assert trace.converged
    for j in range(3):
        assert exact_residual_is_zero(problem, trace.final_x[:, j])


def test_mccg_drops_affinely_dependent_start():
    problem = rational(6, 3, seed=4)
    X0 = problem.X0.copy()
    X0[:, 2] = 2 * X0[:, 0] - X0[:, 1]
    trace = mccg_solve(problem.A, problem.b, X0)
    first = trace.records[0]
    assert first.p_k == 2
    (dropped,) = set(range(3)) - set(first.active_agents)
    assert all(rec.p_k <= 2 for rec in trace.records)
    assert trace.converged
    assert trace.iterations <= 6
    assert exact_residual_is_zero(problem, trace.final_x[:, trace.converged_agent])
    assert np.array_equal(trace.final_x[:, dropped], X0[:, dropped])


def test_rank_restriction_drops_zero_residual_column():
    problem = rational(6, 3, seed=3)
    X0 = problem.X0.copy()
    X0[:, 1] = problem.x_star
    R0 = residual_block(problem.A, X0, problem.b)
    state = BlockState(
        A=problem.A,
        b=problem.b,
        X=X0.copy(order="F"),
        R=R0,
        D=R0.copy(order="F"),
        active=[0, 1, 2],
        final_x=X0.copy(order="F"),
    )
    _drop_dependent_agents(state, 0)
    assert state.active == [0, 2]
    assert state.p_k == 2
    assert np.array_equal(state.final_x[:, 1], problem.x_star)


def test_mccg_stops_at_once_on_start_at_solution():
    problem = rational(6, 3, seed=3)
    X0 = problem.X0.copy()
    X0[:, 1] = problem.x_star
    trace = mccg_solve(problem.A, problem.b, X0)
    assert trace.converged
    assert trace.iterations == 0
    assert trace.converged_agent == 1


def test_mccg_matches_ccg_at_full_rank(float_problem):
    coop = ccg_solve(float_problem.A, float_problem.b, float_problem.X0)
    safe = mccg_solve(float_problem.A, float_problem.b, float_problem.X0)
    assert coop.iterations == safe.iterations
    assert np.array_equal(coop.final_x, safe.final_x)
    assert [r.residual_norms for r in coop.records] == [r.residual_norms for r in safe.records]


def test_all_agents_rule_converges_every_agent(float_problem):
    tol = 1e-6
    trace = ccg_solve(
        float_problem.A, float_problem.b, float_problem.X0, tol=tol, stop_rule=StopRule.ALL_AGENTS
    )
    assert trace.converged
    for j in range(3):
        assert norm2(residual_column(float_problem.A, trace.final_x[:, j], float_problem.b)) <= tol


def test_iteration_cap_refreshes_residual(float_problem):
    trace = ccg_solve(float_problem.A, float_problem.b, float_problem.X0, max_iters=5)
    assert trace.status == TerminalStatus.MAX_ITERATIONS
    assert trace.iterations == 5
    last = trace.records[-1]
    for j, agent in enumerate(last.active_agents):
        true = norm2(residual_column(float_problem.A, trace.final_x[:, agent], float_problem.b))
        assert last.residual_norms[j] == true


def test_trace_jsonl_has_one_line_per_record(float_problem):
    trace = ccg_solve(float_problem.A, float_problem.b, float_problem.X0, max_iters=4)
    lines = trace.to_jsonl().strip().splitlines()
    assert len(lines) == 5


# --- classical error bounds --------------------------------------------------


def bound_instances(count: int):
    for i in range(count):
        n = 20 + 20 * (i % 5)
        cond = 10.0 ** (1 + i % 4)
        yield make_problem(ProblemSpec(n=n, p=2, cond=cond, seed=1000 + i))


def check_bounds(problem) -> None:
    kappa = problem.realized_cond
    cg = cg_solve(problem.A, problem.b, problem.X0[:, 0], tol=1e-8, x_star=problem.x_star)
    assert bound_violations(cg, kappa, "cg", abs_slack=1e-9) == []
    sd = steepest_descent_solve(
        problem.A, problem.b, problem.X0[:, 0], tol=1e-8, max_iters=200, x_star=problem.x_star
    )
    assert bound_violations(sd, kappa, "sd", abs_slack=1e-9) == []


def test_error_bounds_hold():
    for problem in bound_instances(3):
        check_bounds(problem)


@pytest.mark.slow
def test_error_bounds_hold_on_fifty_instances():
    for problem in bound_instances(50):
        check_bounds(problem)


def test_bound_violations_needs_errors(float_problem):
    trace = cg_solve(float_problem.A, float_problem.b, float_problem.X0[:, 0])
    with pytest.raises(ValueError):
        bound_violations(trace, 1e3, "cg")


def test_rational_input_accepted_by_every_solver():
    A = SpdMatrix(to_fractions([[4, 1, 0], [1, 3, 1], [0, 1, 2]]))
    b = to_fractions([1, 2, 3])
    for algo in ("cg", "sd"):
        trace = get_solver(algo)(A, b, to_fractions([0, 0, 0]), max_iters=5)
        assert trace.mode == ScalarMode.RATIONAL
