"""Cooperative Conjugate Gradient (cCG) and its rank-safe variant (mcCG).

p agents iterate X₊ = X + Dαᵀ, R₊ = R + ADαᵀ, D₊ = R₊ + Dβᵀ with the
matrix-valued steps

    α = −(RᵀD)(DᵀAD)⁻¹,    β = −(R₊ᵀAD)(DᵀAD)⁻¹.

Every row of α and β couples all agents through the shared Gram matrix
DᵀAD. The loop in ``run_cooperative`` is shared by the sequential solvers
here and by the multithreaded runtime in ``src.parallel.runtime``; only the
iteration body (``step``) differs.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from src.config import settings
from src.core.dense import (
    SpdMatrix,
    as_block,
    combine,
    gram,
    inner_block,
    matvec_block,
    numerical_rank,
    residual_block,
    residual_column,
    solve_small,
)
from src.core.errors import (
    DimensionMismatchError,
    NumericalBreakdownError,
    SingularMatrixError,
    SpdViolationError,
)
from src.models.schemas import Algorithm, ScalarMode, SolveTrace, StopRule, TerminalStatus
from src.parallel.counters import count_iteration_mults
from src.solvers.cg import cg_solve
from src.solvers.trace import TraceRecorder, is_zero, resolve_stopping

logger = logging.getLogger(__name__)


def solve_rows(M: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Z = −C·M⁻¹ for symmetric M, row i solved as M·z_iᵀ = −c_iᵀ."""
    return solve_small(M, -C.T).T.copy()


def compute_alpha(R: np.ndarray, D: np.ndarray, AD: np.ndarray, M: np.ndarray) -> np.ndarray:
    """α = −(RᵀD)·M⁻¹ with M = DᵀAD."""
    if R.shape != D.shape or AD.shape != D.shape:
        raise DimensionMismatchError(f"blocks R {R.shape}, D {D.shape}, AD {AD.shape} disagree")
    if M.shape != (D.shape[1], D.shape[1]):
        raise DimensionMismatchError(f"Gram matrix {M.shape} does not match {D.shape[1]} agents")
    return solve_rows(M, inner_block(R, D))


def compute_beta(R_next: np.ndarray, AD: np.ndarray, M: np.ndarray) -> np.ndarray:
    """β = −(R₊ᵀAD)·M⁻¹."""
    if R_next.shape != AD.shape:
        raise DimensionMismatchError(f"blocks R {R_next.shape} and AD {AD.shape} disagree")
    if M.shape != (AD.shape[1], AD.shape[1]):
        raise DimensionMismatchError(f"Gram matrix {M.shape} does not match {AD.shape[1]} agents")
    return solve_rows(M, inner_block(R_next, AD))


def check_curvature(M: np.ndarray, D: np.ndarray, k: int) -> None:
    for i in range(M.shape[0]):
        if M[i, i] < 0 or (M[i, i] == 0 and not is_zero(D[:, i])):
            raise SpdViolationError(f"dᵀAd = {M[i, i]} <= 0 for agent column {i} at iteration {k}")


@dataclass
class StepInfo:
    """Cost and timing of one iteration."""

    mults: int = 0
    wall_ns: int = 0
    barrier_wait_ns: list[int] | None = None
    mults_per_worker: list[int] | None = None
    barriers: int | None = None


@dataclass
class BlockState:
    """Current iterate of the active agents."""

    A: SpdMatrix
    b: np.ndarray
    X: np.ndarray
    R: np.ndarray
    D: np.ndarray
    active: list[int]
    final_x: np.ndarray
    last_refresh: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def p_k(self) -> int:
        return self.X.shape[1]

    def sync_final(self) -> None:
        for j, agent in enumerate(self.active):
            self.final_x[:, agent] = self.X[:, j]

    def restrict(self, keep: list[int]) -> None:
        """Keep only the listed local columns; dropped agents stay frozen in final_x."""
        self.sync_final()
        self.X = np.array(self.X[:, keep], order="F")
        self.R = np.array(self.R[:, keep], order="F")
        self.D = np.array(self.D[:, keep], order="F")
        self.active = [self.active[j] for j in keep]

    def refresh_residuals(self, k: int) -> int:
        """True residual AX − b for every active column; returns the multiplications spent."""
        for j in range(self.p_k):
            self.R[:, j] = residual_column(self.A, self.X[:, j], self.b)
        self.last_refresh = k
        return self.p_k * self.A.n * self.A.n


StepFn = Callable[[BlockState, int, bool], StepInfo]


def sequential_step(state: BlockState, k: int, refresh: bool) -> StepInfo:
    """One cCG iteration, column by column in worker order."""
    A = state.A
    X, R, D = state.X, state.R, state.D
    n, p = D.shape

    AD = matvec_block(A, D)
    M = gram(D, AD)
    check_curvature(M, D, k)
    alpha = compute_alpha(R, D, AD, M)
    for i in range(p):
        R[:, i] = combine(R[:, i], AD, alpha[i])
    for i in range(p):
        X[:, i] = combine(X[:, i], D, alpha[i])

    mults = p * count_iteration_mults(n, p)
    if refresh:
        mults += state.refresh_residuals(k + 1)

    beta = compute_beta(R, AD, M)
    D_next = np.empty_like(D, order="F")
    for i in range(p):
        D_next[:, i] = combine(R[:, i], D, beta[i])
    state.D = D_next
    return StepInfo(mults=mults)


def _drop_dependent_agents(state: BlockState, rank_tol: float) -> None:
    """Restrict to a full-rank subset J while rank D < p_k."""
    while state.p_k > 0:
        rank = numerical_rank(state.D, rank_tol).rank
        if rank == state.p_k:
            return
        pivots = numerical_rank(state.R, rank_tol).pivots
        keep = sorted(pivots[:rank])
        logger.info(f"Rank drop: p_k {state.p_k} -> {len(keep)}, keeping agents {[state.active[j] for j in keep]}")
        state.restrict(keep)


def run_cooperative(
    A: SpdMatrix,
    b: np.ndarray,
    X0: np.ndarray,
    *,
    algorithm: Algorithm,
    tol: float | None,
    max_iters: int | None,
    rank_tol: float | None,
    restrict_on_rank_drop: bool,
    stop_rule: StopRule = StopRule.FIRST_AGENT,
    x_star: np.ndarray | None = None,
    verify: bool = False,
    refresh_every: int | None = None,
    step: StepFn = sequential_step,
) -> SolveTrace:
    """Shared cCG/mcCG loop.

    At the top of every iteration: convergence check (with a true-residual
    confirmation in float mode), then the iteration cap, then the rank of D.
    """
    mode = A.mode
    X0 = as_block(X0, mode)
    n, p = X0.shape
    if n != A.n:
        raise DimensionMismatchError(f"X0 has {n} rows, matrix is {A.n}×{A.n}")
    if p >= n:
        raise ValueError(f"need fewer agents than unknowns, got p={p}, n={n}")
    tol, max_iters = resolve_stopping(mode, n, tol, max_iters)
    if rank_tol is None:
        rank_tol = 0 if mode == ScalarMode.RATIONAL else settings.rank_tol
    m = refresh_every or settings.refresh_every
    floating = mode == ScalarMode.FLOAT

    rec = TraceRecorder(algorithm, A, tol, p, x_star=x_star, verify=verify)
    R0 = residual_block(A, X0, b)
    state = BlockState(
        A=A,
        b=b,
        X=X0.copy(order="F"),
        R=R0,
        D=R0.copy(order="F"),
        active=list(range(p)),
        final_x=X0.copy(order="F"),
    )
    logger.info(f"{algorithm.value}: n={n} p={p} tol={tol} max_iters={max_iters} mode={mode.value}")

    k = 0
    info = StepInfo(mults=p * n * n)
    status: TerminalStatus | None = None
    converged_agent: int | None = None
    start = time.perf_counter_ns()

    while True:
        norms, met = rec.norms(state.R)
        if any(met) and floating and k > state.last_refresh:
            info.mults += state.refresh_residuals(k)
            norms, met = rec.norms(state.R)
        if any(met):
            first = state.active[met.index(True)]
            if converged_agent is None:
                converged_agent = first
            if stop_rule == StopRule.FIRST_AGENT or all(met):
                status = TerminalStatus.CONVERGED
            else:
                keep = [j for j, ok in enumerate(met) if not ok]
                logger.info(f"Retiring converged agents {[state.active[j] for j, ok in enumerate(met) if ok]} at k={k}")
                state.restrict(keep)
                norms = [norms[j] for j in keep]

        if status is None and k >= max_iters:
            status = TerminalStatus.MAX_ITERATIONS

        if status is None and numerical_rank(state.D, rank_tol).rank < state.p_k:
            if not restrict_on_rank_drop:
                status = TerminalStatus.RANK_COLLAPSE
            else:
                _drop_dependent_agents(state, rank_tol)
                if state.p_k == 0:
                    raise NumericalBreakdownError(
                        f"all agents removed at iteration {k} with residual above tolerance"
                    )
                norms, _ = rec.norms(state.R)

        if status not in (None, TerminalStatus.CONVERGED) and floating and k > state.last_refresh:
            info.mults += state.refresh_residuals(k)
            norms, _ = rec.norms(state.R)

        rec.record(
            k,
            state.active,
            norms,
            state.X,
            mults=info.mults,
            wall_ns=info.wall_ns,
            barrier_wait_ns=info.barrier_wait_ns,
            mults_per_worker=info.mults_per_worker,
            barriers=info.barriers,
        )
        rec.snapshot(k, state.X, state.R, state.D, state.active)
        if status is not None:
            break

        refresh = (k + 1) % m == 0
        t0 = time.perf_counter_ns()
        try:
            info = step(state, k, refresh)
        except SingularMatrixError as exc:
            logger.warning(f"Singular Gram matrix at iteration {k}: {exc}")
            status = TerminalStatus.RANK_COLLAPSE
            break
        if not info.wall_ns:
            info.wall_ns = time.perf_counter_ns() - t0
        k += 1

    elapsed = (time.perf_counter_ns() - start) / 1e9
    state.sync_final()
    trace = rec.finish(
        status,
        state.final_x,
        elapsed,
        converged_agent=converged_agent if status == TerminalStatus.CONVERGED else None,
        final_d=state.D.copy(),
    )
    trace.barrier_count = state.extra.get("barrier_count")
    return trace


def ccg_solve(
    A: SpdMatrix,
    b: np.ndarray,
    X0: np.ndarray,
    tol: float | None = None,
    max_iters: int | None = None,
    *,
    x_star: np.ndarray | None = None,
    verify: bool = False,
    stop_rule: StopRule = StopRule.FIRST_AGENT,
    rank_tol: float | None = None,
    refresh_every: int | None = None,
) -> SolveTrace:
    """cCG: stops on convergence, rank collapse of D, or the iteration cap."""
    return run_cooperative(
        A,
        b,
        X0,
        algorithm=Algorithm.CCG,
        tol=tol,
        max_iters=max_iters,
        rank_tol=rank_tol,
        restrict_on_rank_drop=False,
        stop_rule=stop_rule,
        x_star=x_star,
        verify=verify,
        refresh_every=refresh_every,
    )


def mccg_solve(
    A: SpdMatrix,
    b: np.ndarray,
    X0: np.ndarray,
    tol: float | None = None,
    max_iters: int | None = None,
    rank_tol: float | None = None,
    *,
    x_star: np.ndarray | None = None,
    verify: bool = False,
    stop_rule: StopRule = StopRule.FIRST_AGENT,
    refresh_every: int | None = None,
) -> SolveTrace:
    """mcCG: on a rank drop of D, keep the greedy pivot agents of R and go on."""
    return run_cooperative(
        A,
        b,
        X0,
        algorithm=Algorithm.MCCG,
        tol=tol,
        max_iters=max_iters,
        rank_tol=rank_tol,
        restrict_on_rank_drop=True,
        stop_rule=stop_rule,
        x_star=x_star,
        verify=verify,
        refresh_every=refresh_every,
    )


def solve_with_fallback(
    A: SpdMatrix,
    b: np.ndarray,
    X0: np.ndarray,
    tol: float | None = None,
    max_iters: int | None = None,
    **kwargs,
) -> SolveTrace:
    """cCG, rerun as mcCG from the same X0 if D loses rank."""
    trace = ccg_solve(A, b, X0, tol, max_iters, **kwargs)
    if trace.status == TerminalStatus.RANK_COLLAPSE:
        logger.warning(f"cCG rank collapse at k={trace.iterations}; rerunning with mcCG")
        trace = mccg_solve(A, b, X0, tol, max_iters, **kwargs)
    return trace


def finish_with_cg(
    A: SpdMatrix,
    b: np.ndarray,
    trace: SolveTrace,
    tol: float | None = None,
    max_iters: int | None = None,
    x_star: np.ndarray | None = None,
) -> SolveTrace:
    """Run CG from the best agent of a finished cooperative run.

    CG starts along that agent's last cooperative direction, which is
    A-orthogonal to every earlier direction block. When n − p⌊n/p⌋ = 1 the
    error after a rank collapse lies on that line, so in exact arithmetic
    one step finishes. Larger remainders need mcCG for the same guarantee.
    """
    if trace.final_x is None:
        raise ValueError("trace has no final estimates")
    agent = trace.best_agent()
    x0 = trace.final_x[:, agent]
    d0 = None
    last = trace.records[-1] if trace.records else None
    if trace.final_d is not None and last is not None and agent in last.active_agents:
        d0 = trace.final_d[:, last.active_agents.index(agent)]
    return cg_solve(A, b, x0, tol=tol, max_iters=max_iters, x_star=x_star, d0=d0)
