"""Trace assembly shared by all solvers."""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from src.core.dense import SpdMatrix, a_norm, dot
from src.models.schemas import Algorithm, IterationRecord, ScalarMode, SolveTrace, TerminalStatus

logger = logging.getLogger(__name__)

DEFAULT_FLOAT_TOL = 1e-6


@dataclass
class AgentBlock:
    """Snapshot (X_k, R_k, D_k) of the active agents at iteration k."""

    k: int
    X: np.ndarray
    R: np.ndarray
    D: np.ndarray
    active: list[int]

    @property
    def p_k(self) -> int:
        return self.X.shape[1]


def resolve_stopping(mode: ScalarMode, n: int, tol: float | None, max_iters: int | None) -> tuple[float, int]:
    """Fill in tolerance and iteration-cap defaults for a scalar mode."""
    if tol is None:
        tol = 0.0 if mode == ScalarMode.RATIONAL else DEFAULT_FLOAT_TOL
    if tol < 0 or (mode == ScalarMode.FLOAT and tol == 0):
        raise ValueError(f"tolerance must be positive in float mode (>= 0 in rational mode), got {tol}")
    if max_iters is None:
        max_iters = n if mode == ScalarMode.RATIONAL else 2 * n
    if max_iters < 0:
        raise ValueError(f"max_iters must be nonnegative, got {max_iters}")
    return tol, max_iters


def is_zero(v: np.ndarray) -> bool:
    return not np.any(v != 0)


class TraceRecorder:
    """Accumulates IterationRecords and, in verification mode, AgentBlock history."""

    def __init__(
        self,
        algorithm: Algorithm,
        A: SpdMatrix,
        tol: float,
        p: int,
        x_star: np.ndarray | None = None,
        verify: bool = False,
    ):
        self.A = A
        self.x_star = x_star
        self.verify = verify
        self._exact = A.mode == ScalarMode.RATIONAL
        self._tol_sq = Fraction(tol) ** 2 if self._exact else None
        self.tol = tol
        self.trace = SolveTrace(
            algorithm=algorithm,
            mode=A.mode,
            n=A.n,
            p=p,
            tol=float(tol),
            history=[] if verify else None,
        )

    def norms(self, R: np.ndarray) -> tuple[list[float], list[bool]]:
        """2-norm of every column and whether it meets the tolerance."""
        norms, met = [], []
        for j in range(R.shape[1]):
            sq = dot(R[:, j], R[:, j])
            norm = math.sqrt(sq)
            norms.append(norm)
            met.append(sq <= self._tol_sq if self._exact else norm <= self.tol)
        return norms, met

    def record(
        self,
        k: int,
        active: list[int],
        norms: list[float],
        X: np.ndarray,
        mults: int = 0,
        wall_ns: int = 0,
        barrier_wait_ns: list[int] | None = None,
        mults_per_worker: list[int] | None = None,
        barriers: int | None = None,
    ) -> IterationRecord:
        errors = None
        if self.x_star is not None:
            errors = [a_norm(self.A, X[:, j] - self.x_star) for j in range(X.shape[1])]
        rec = IterationRecord(
            k=k,
            p_k=len(active),
            active_agents=list(active),
            residual_norms=norms,
            minres=min(norms) if norms else 0.0,
            a_norm_errors=errors,
            mults=mults,
            wall_ns=wall_ns,
            barrier_wait_ns=barrier_wait_ns,
            mults_per_worker=mults_per_worker,
            barriers=barriers,
        )
        self.trace.records.append(rec)
        logger.debug(f"{self.trace.algorithm.value} k={k} p_k={rec.p_k} minres={rec.minres:.3e}")
        return rec

    def snapshot(self, k: int, X: np.ndarray, R: np.ndarray, D: np.ndarray, active: list[int]) -> None:
        if self.verify:
            self.trace.history.append(AgentBlock(k=k, X=X.copy(), R=R.copy(), D=D.copy(), active=list(active)))

    def finish(
        self,
        status: TerminalStatus,
        final_x: np.ndarray,
        wall_time_s: float,
        converged_agent: int | None = None,
        final_d: np.ndarray | None = None,
    ) -> SolveTrace:
        t = self.trace
        t.final_d = final_d
        t.status = status
        t.final_x = final_x
        t.wall_time_s = wall_time_s
        t.converged_agent = converged_agent
        logger.info(
            f"{t.algorithm.value}: n={t.n} p={t.p} status={status.value} "
            f"iterations={t.iterations} minres={t.final_minres:.3e}"
        )
        return t
