"""Conjugate Gradient with sign convention r = Ax − b."""

import time

import numpy as np

from src.config import settings
from src.core.dense import SpdMatrix, as_block, dot, matvec, residual_column
from src.core.errors import SpdViolationError
from src.models.schemas import Algorithm, ScalarMode, SolveTrace, TerminalStatus
from src.parallel.counters import count_iteration_mults
from src.solvers.trace import TraceRecorder, is_zero, resolve_stopping


def cg_solve(
    A: SpdMatrix,
    b: np.ndarray,
    x0: np.ndarray,
    tol: float | None = None,
    max_iters: int | None = None,
    x_star: np.ndarray | None = None,
    verify: bool = False,
    refresh_every: int | None = None,
    d0: np.ndarray | None = None,
) -> SolveTrace:
    """Solve Ax = b by CG.

    α_k = −r_kᵀd_k / d_kᵀAd_k, x₊ = x + α_k·d_k, r₊ = r + α_k·Ad_k,
    β_k = −r₊ᵀAd_k / d_kᵀAd_k, d₊ = r₊ + β_k·d_k, starting from d_0 = r_0
    unless an initial direction ``d0`` is given.
    The residual is recomputed as Ax − b every ``refresh_every`` iterations
    and once more before the run is declared finished.
    """
    mode = A.mode
    n = A.n
    tol, max_iters = resolve_stopping(mode, n, tol, max_iters)
    m = refresh_every or settings.refresh_every
    rec = TraceRecorder(Algorithm.CG, A, tol, p=1, x_star=x_star, verify=verify)
    per_iteration = count_iteration_mults(n, 1)

    x = as_block(x0, mode)[:, 0].copy()
    r = residual_column(A, x, b)
    d = r.copy() if d0 is None else as_block(d0, mode)[:, 0].copy()
    k = 0
    last_refresh = 0
    mults, wall_ns = n * n, 0
    start = time.perf_counter_ns()

    while True:
        status = None
        norms, met = rec.norms(r.reshape(-1, 1))
        if met[0]:
            if mode == ScalarMode.FLOAT and k > last_refresh:
                r = residual_column(A, x, b)
                last_refresh = k
                mults += n * n
                norms, met = rec.norms(r.reshape(-1, 1))
            if met[0]:
                status = TerminalStatus.CONVERGED
        if status is None and k >= max_iters:
            status = TerminalStatus.MAX_ITERATIONS
        if status is None and is_zero(d):
            status = TerminalStatus.RANK_COLLAPSE
        if status is not None and status != TerminalStatus.CONVERGED:
            if mode == ScalarMode.FLOAT and k > last_refresh:
                r = residual_column(A, x, b)
                last_refresh = k
                mults += n * n
                norms, _ = rec.norms(r.reshape(-1, 1))

        rec.record(k, [0], norms, x.reshape(-1, 1), mults=mults, wall_ns=wall_ns)
        rec.snapshot(k, x.reshape(-1, 1), r.reshape(-1, 1), d.reshape(-1, 1), [0])
        if status is not None:
            break

        t0 = time.perf_counter_ns()
        ad = matvec(A, d)
        dad = dot(d, ad)
        if not dad > 0:
            raise SpdViolationError(f"dᵀAd = {dad} <= 0 at iteration {k}")
        rd = dot(r, d)
        alpha = -rd / dad
        r = r + ad * alpha
        x = x + d * alpha
        mults = per_iteration
        if (k + 1) % m == 0:
            r = residual_column(A, x, b)
            last_refresh = k + 1
            mults += n * n
        rad = dot(r, ad)
        beta = -rad / dad
        d = r + d * beta
        wall_ns = time.perf_counter_ns() - t0
        k += 1

    elapsed = (time.perf_counter_ns() - start) / 1e9
    return rec.finish(
        status,
        x.reshape(-1, 1).copy(order="F"),
        elapsed,
        converged_agent=0 if status == TerminalStatus.CONVERGED else None,
        final_d=d.reshape(-1, 1).copy(order="F"),
    )
