"""Steepest descent baseline: x₊ = x − α·r with the Rayleigh-quotient step α = rᵀr / rᵀAr."""

import time

import numpy as np

from src.config import settings
from src.core.dense import SpdMatrix, as_block, dot, matvec, residual_column
from src.core.errors import SpdViolationError
from src.models.schemas import Algorithm, ScalarMode, SolveTrace, TerminalStatus
from src.solvers.trace import TraceRecorder, resolve_stopping


def steepest_descent_solve(
    A: SpdMatrix,
    b: np.ndarray,
    x0: np.ndarray,
    tol: float | None = None,
    max_iters: int | None = None,
    x_star: np.ndarray | None = None,
    refresh_every: int | None = None,
) -> SolveTrace:
    """Solve Ax = b by steepest descent from ``x0``.

    Each step moves against the residual by α = rᵀr / rᵀAr and costs
    n² + 4n + 1 multiplications. Raises SpdViolationError when rᵀAr <= 0.
    The residual is recomputed every ``refresh_every`` iterations and before a
    float run is declared converged.
    """
    mode = A.mode
    n = A.n
    tol, max_iters = resolve_stopping(mode, n, tol, max_iters)
    m = refresh_every or settings.refresh_every
    rec = TraceRecorder(Algorithm.SD, A, tol, p=1, x_star=x_star)

    x = as_block(x0, mode)[:, 0].copy()
    r = residual_column(A, x, b)
    k, last_refresh = 0, 0
    mults, wall_ns = n * n, 0
    start = time.perf_counter_ns()

    while True:
        status = None
        norms, met = rec.norms(r.reshape(-1, 1))
        if met[0] and mode == ScalarMode.FLOAT and k > last_refresh:
            r = residual_column(A, x, b)
            last_refresh = k
            mults += n * n
            norms, met = rec.norms(r.reshape(-1, 1))
        if met[0]:
            status = TerminalStatus.CONVERGED
        elif k >= max_iters:
            status = TerminalStatus.MAX_ITERATIONS
        rec.record(k, [0], norms, x.reshape(-1, 1), mults=mults, wall_ns=wall_ns)
        if status is not None:
            break

        t0 = time.perf_counter_ns()
        ar = matvec(A, r)
        rar = dot(r, ar)
        if not rar > 0:
            raise SpdViolationError(f"rᵀAr = {rar} <= 0 at iteration {k}")
        alpha = dot(r, r) / rar
        x = x - r * alpha
        r = r - ar * alpha
        mults = n * n + 4 * n + 1
        if (k + 1) % m == 0:
            r = residual_column(A, x, b)
            last_refresh = k + 1
            mults += n * n
        wall_ns = time.perf_counter_ns() - t0
        k += 1

    elapsed = (time.perf_counter_ns() - start) / 1e9
    return rec.finish(
        status,
        x.reshape(-1, 1).copy(order="F"),
        elapsed,
        converged_agent=0 if status == TerminalStatus.CONVERGED else None,
    )
