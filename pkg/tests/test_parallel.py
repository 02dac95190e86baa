import os
import threading
import time
import warnings

import numpy as np
import pytest

from src.core.errors import BarrierViolation, ParallelRuntimeError
from src.models.schemas import Algorithm, ProblemSpec, ScalarMode, TerminalStatus
from src.parallel import (
    DEFAULT_BARRIERS,
    MultCounter,
    Phase,
    WorkPlan,
    count_iteration_mults,
    phase_mults,
)
from src.parallel.runtime import EpochStamps, ParallelCooperativeRuntime, parallel_ccg
from src.problems.generators import make_problem
from src.solvers import ccg_solve, get_solver


def live_workers() -> list[threading.Thread]:
    return [t for t in threading.enumerate() if t.name.startswith("ccg-worker") and t.is_alive()]


def assert_same_run(par, seq) -> None:
    assert par.status == seq.status
    assert par.iterations == seq.iterations
    assert np.array_equal(par.final_x, seq.final_x)
    for a, b in zip(par.records, seq.records):
        assert a.residual_norms == b.residual_norms
        assert a.mults == b.mults


# --- plans and counters ------------------------------------------------------


def test_phase_tallies_follow_the_phase_model(monkeypatch):
    n, p = 40, 3
    problem = make_problem(ProblemSpec(n=n, p=p, cond=1e4, seed=5))
    seen = []
    original = ParallelCooperativeRuntime.step

    def step(self, state, k, refresh):
        info = original(self, state, k, refresh)
        seen.append([self.counter.per_phase(w) for w in range(self.p)])
        return info

    monkeypatch.setattr(ParallelCooperativeRuntime, "step", step)
    trace = parallel_ccg(problem.A, problem.b, problem.X0, max_iters=3)
    expected = {ph.name.lower(): phase_mults(ph, n, p) for ph in Phase}
    assert sum(expected.values()) == count_iteration_mults(n, p)
    assert len(seen) == trace.iterations == 3
    for tallies in seen:
        assert tallies == [expected] * p


def test_work_plan_requires_mandatory_barriers():
    with pytest.raises(ValueError):
        WorkPlan(3, barriers=frozenset({Phase.MATVEC}))
    with pytest.raises(ValueError):
        WorkPlan(0)
    assert WorkPlan.minimal(3).barrier_count == 2
    assert WorkPlan(3).barriers == DEFAULT_BARRIERS


def test_work_plan_publication():
    plan = WorkPlan.minimal(2)
    assert plan.published(Phase.MATVEC, Phase.GRAM)
    assert plan.published(Phase.GRAM, Phase.BETA_SOLVE)
    assert not plan.published(Phase.R_UPDATE, Phase.RAD)


def test_mult_counter_separates_refresh():
    counter = MultCounter(2)
    counter.add(0, Phase.MATVEC, 100)
    counter.add(0, "residual_refresh", 100)
    counter.add(1, Phase.GRAM, 10)
    assert counter.per_worker() == [100, 10]
    assert counter.refresh_total(0) == 100
    assert counter.grand_total() == 210
    counter.reset()
    assert counter.grand_total() == 0


def test_epoch_stamps_reject_unpublished_reads():
    stamps = EpochStamps(WorkPlan.minimal(2))
    stamps.check("D", 1, 0, Phase.RD, reader=0)
    stamps.mark("AD", 1, 0, Phase.MATVEC)
    stamps.check("AD", 1, 0, Phase.GRAM, reader=0)
    with pytest.raises(BarrierViolation):
        stamps.check("G", 1, 0, Phase.ALPHA_SOLVE, reader=0)
    stamps.mark("G", 1, 0, Phase.GRAM)
    stamps.check("G", 1, 0, Phase.ALPHA_SOLVE, reader=0)
    # own slot is never checked
    stamps.check("R", 0, 0, Phase.RAD, reader=0)


def test_epoch_stamps_track_direction_swap():
    stamps = EpochStamps(WorkPlan(2))
    with pytest.raises(BarrierViolation):
        stamps.check("D", 1, 1, Phase.RD, reader=0)
    stamps.mark("D_next", 1, 0, Phase.D_UPDATE)
    stamps.swap_directions()
    stamps.check("D", 1, 1, Phase.RD, reader=0)


# --- equivalence with the sequential solver ---------------------------------


@pytest.mark.parametrize("minimal", [False, True])
def test_parallel_matches_sequential(float_problem, minimal):
    p = float_problem.X0.shape[1]
    plan = WorkPlan.minimal(p) if minimal else None
    par = parallel_ccg(float_problem.A, float_problem.b, float_problem.X0, plan=plan)
    seq = ccg_solve(float_problem.A, float_problem.b, float_problem.X0)
    assert par.algorithm == Algorithm.CCG_PAR
    assert par.converged
    assert_same_run(par, seq)
    assert not live_workers()


def test_parallel_debug_mode_runs_clean(float_problem):
    par = parallel_ccg(
        float_problem.A, float_problem.b, float_problem.X0, plan=WorkPlan.minimal(3), debug=True
    )
    seq = ccg_solve(float_problem.A, float_problem.b, float_problem.X0)
    assert_same_run(par, seq)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(5))
def test_parallel_matches_sequential_large(seed):
    problem = make_problem(ProblemSpec(n=500, p=3, cond=1e4, seed=seed))
    par = parallel_ccg(problem.A, problem.b, problem.X0, plan=WorkPlan.minimal(3), debug=True)
    seq = ccg_solve(problem.A, problem.b, problem.X0)
    assert_same_run(par, seq)


def test_parallel_rational_terminates_like_sequential(rational_problem):
    par = parallel_ccg(rational_problem.A, rational_problem.b, rational_problem.X0)
    seq = ccg_solve(rational_problem.A, rational_problem.b, rational_problem.X0)
    assert par.converged
    assert par.iterations == 4
    assert np.array_equal(par.final_x, seq.final_x)


def test_parallel_reports_rank_collapse():
    problem = make_problem(ProblemSpec(n=6, p=3, seed=2, mode=ScalarMode.RATIONAL))
    X0 = problem.X0.copy()
    X0[:, 2] = X0[:, 0]
    trace = parallel_ccg(problem.A, problem.b, X0)
    assert trace.status == TerminalStatus.RANK_COLLAPSE
    assert not live_workers()


def test_parallel_refresh_matches_sequential():
    problem = make_problem(ProblemSpec(n=150, p=3, cond=1e4, seed=9))
    par = parallel_ccg(problem.A, problem.b, problem.X0, tol=1e-300, max_iters=12, refresh_every=5)
    seq = ccg_solve(problem.A, problem.b, problem.X0, tol=1e-300, max_iters=12, refresh_every=5)
    assert_same_run(par, seq)


# --- accounting --------------------------------------------------------------


@pytest.mark.parametrize("n", [20, 60, 100])
@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_per_worker_mults_match_formula(n, p):
    problem = make_problem(ProblemSpec(n=n, p=p, cond=1e4, seed=n + p))
    trace = parallel_ccg(problem.A, problem.b, problem.X0, max_iters=3)
    expected = count_iteration_mults(n, p)
    for rec in trace.records[1:]:
        assert rec.mults_per_worker == [expected] * p
        assert rec.barriers == len(DEFAULT_BARRIERS)
        assert len(rec.barrier_wait_ns) == p


def skip_last_rd_column(monkeypatch):
    original = ParallelCooperativeRuntime._row

    def short_row(self, i, phase, v, W):
        if phase != Phase.RD:
            return original(self, i, phase, v, W)
        out = np.zeros(W.shape[1], dtype=W.dtype)
        out[:-1] = original(self, i, phase, v, W[:, :-1])
        return out

    monkeypatch.setattr(ParallelCooperativeRuntime, "_row", short_row)


def test_skipped_inner_product_shows_in_tally(monkeypatch):
    n, p = 40, 3
    skip_last_rd_column(monkeypatch)
    problem = make_problem(ProblemSpec(n=n, p=p, cond=1e4, seed=5))
    trace = parallel_ccg(problem.A, problem.b, problem.X0, max_iters=3)
    for rec in trace.records[1:]:
        assert rec.mults_per_worker == [count_iteration_mults(n, p) - n] * p
    assert not live_workers()


def test_debug_mode_rejects_tally_mismatch(monkeypatch):
    skip_last_rd_column(monkeypatch)
    problem = make_problem(ProblemSpec(n=40, p=3, cond=1e4, seed=5))
    with pytest.raises(ParallelRuntimeError) as excinfo:
        parallel_ccg(problem.A, problem.b, problem.X0, max_iters=3, debug=True)
    assert excinfo.value.iteration == 0
    assert "rd" in str(excinfo.value)
    assert not live_workers()


def test_minimal_plan_barrier_count(float_problem):
    trace = parallel_ccg(
        float_problem.A, float_problem.b, float_problem.X0, max_iters=4, plan=WorkPlan.minimal(3)
    )
    assert trace.barrier_count == 2
    assert all(rec.barriers == 2 for rec in trace.records[1:])


# --- failures ----------------------------------------------------------------


def test_missing_barrier_is_detected(float_problem):
    plan = WorkPlan(3, barriers=frozenset({Phase.MATVEC}), validate=False)
    with pytest.raises(BarrierViolation):
        parallel_ccg(float_problem.A, float_problem.b, float_problem.X0, plan=plan, debug=True)
    assert not live_workers()


def test_worker_failure_stops_all_workers(float_problem, monkeypatch):
    original = ParallelCooperativeRuntime._tally

    def failing_tally(self, i, phase, count):
        if i == 1 and self._k == 2 and phase == Phase.RD:
            raise RuntimeError("injected")
        original(self, i, phase, count)

    monkeypatch.setattr(ParallelCooperativeRuntime, "_tally", failing_tally)
    with pytest.raises(ParallelRuntimeError) as excinfo:
        parallel_ccg(float_problem.A, float_problem.b, float_problem.X0)
    assert excinfo.value.iteration == 2
    assert isinstance(excinfo.value.__cause__, RuntimeError)
    assert not live_workers()


def test_worker_count_must_match_agents(float_problem):
    with pytest.raises(ValueError):
        parallel_ccg(float_problem.A, float_problem.b, float_problem.X0, workers=2)
    with pytest.raises(ValueError):
        parallel_ccg(float_problem.A, float_problem.b, float_problem.X0, plan=WorkPlan(4))


def test_registry_resolves_parallel_solver():
    assert get_solver("ccg-par") is parallel_ccg


@pytest.mark.slow
def test_parallel_wall_clock():
    if (os.cpu_count() or 1) < 4:
        pytest.skip("needs at least 4 cores")
    problem = make_problem(ProblemSpec(n=2000, p=3, cond=1e4, seed=1))
    t0 = time.perf_counter()
    ccg_solve(problem.A, problem.b, problem.X0, max_iters=20)
    sequential = time.perf_counter() - t0
    t0 = time.perf_counter()
    parallel_ccg(problem.A, problem.b, problem.X0, max_iters=20, plan=WorkPlan.minimal(3))
    threaded = time.perf_counter() - t0
    if threaded >= sequential:
        warnings.warn(f"threaded run took {threaded:.3f}s vs {sequential:.3f}s sequential", stacklevel=1)
