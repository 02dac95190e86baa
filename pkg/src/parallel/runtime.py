"""Barrier-synchronized multithreaded cCG.

One persistent thread per agent. Worker i owns column i of X, R, AD and of
the next direction block, and row i of the Gram matrix and of α and β. The
coordinator releases all workers into an iteration through an epoch barrier,
waits for them at a second one, then swaps the direction buffers. Inside an
iteration the workers meet at a phase barrier after every phase listed in the
WorkPlan.

Per-column arithmetic goes through the same kernels as the sequential solver
(``matvec``, ``dot``, ``combine``, ``solve_small``) in the same order, so a
parallel run reproduces ``ccg_solve`` bit for bit.
"""

import logging
import threading
import time

import numpy as np

from src.core.dense import (
    SpdMatrix,
    as_block,
    combine,
    dot,
    matvec,
    residual_column,
    solve_small,
    symmetrize_small,
)
from src.core.errors import BarrierViolation, ParallelRuntimeError, SingularMatrixError, SpdViolationError
from src.models.schemas import Algorithm, SolveTrace, StopRule
from src.parallel.counters import MultCounter, lu_solve_mults, phase_mults
from src.parallel.plan import REFRESH_PHASE, WRITES, Phase, WorkPlan
from src.solvers.cooperative import BlockState, StepInfo, run_cooperative
from src.solvers.trace import is_zero

logger = logging.getLogger(__name__)

SHUTDOWN_TIMEOUT_S = 10.0

WRITTEN_IN = {buffer: phase for phase, buffer in WRITES.items()}


class EpochStamps:
    """(iteration, phase) of the last write to every column of every shared buffer.

    Debug mode only: a read of another worker's slot must see a stamp from
    the current iteration, written in a phase that a barrier has published.
    Directions must come from the previous iteration's D update.
    """

    def __init__(self, plan: WorkPlan):
        self.plan = plan
        self._stamps = {name: np.full((plan.p, 2), -1, dtype=np.int64) for name in WRITTEN_IN}
        self._stamps["D"] = np.full((plan.p, 2), -1, dtype=np.int64)
        self._stamps["D"][:, 1] = int(Phase.D_UPDATE)

    def mark(self, name: str, slot: int, k: int, phase: Phase) -> None:
        self._stamps[name][slot] = (k, int(phase))

    def check(self, name: str, slot: int, k: int, phase: Phase, reader: int) -> None:
        if slot == reader:
            return
        wk, wph = (int(v) for v in self._stamps[name][slot])
        if name == "D":
            ok = wk == k - 1 and wph == Phase.D_UPDATE
        else:
            written = WRITTEN_IN[name]
            ok = wk == k and wph == written and self.plan.published(written, phase)
        if not ok:
            raise BarrierViolation(
                f"worker {reader} read {name}[{slot}] in phase {phase.name} of iteration {k}; "
                f"last write was iteration {wk} phase {wph}"
            )

    def swap_directions(self) -> None:
        self._stamps["D"], self._stamps["D_next"] = self._stamps["D_next"], self._stamps["D"]


class ParallelCooperativeRuntime:
    """Persistent worker pool that executes one cCG iteration per ``step`` call."""

    def __init__(self, A: SpdMatrix, b: np.ndarray, plan: WorkPlan, debug: bool = False):
        self.A = A
        self.b = b
        self.plan = plan
        self.p = plan.p
        self.counter = MultCounter(self.p)
        self.stamps = EpochStamps(plan) if debug else None

        self._phase_barrier = threading.Barrier(self.p)
        self._epoch_start = threading.Barrier(self.p + 1)
        self._epoch_end = threading.Barrier(self.p + 1)
        self._lock = threading.Lock()
        self._stop = False
        self._failure: tuple[int, int, BaseException] | None = None

        self.state: BlockState | None = None
        self._k = 0
        self._refresh = False
        self._waits = [0] * self.p
        self._hits = [0] * self.p
        self._singular = [False] * self.p

        self.AD: np.ndarray | None = None
        self.G: np.ndarray | None = None
        self.D_next: np.ndarray | None = None

        self._threads = [
            threading.Thread(target=self._worker, args=(i,), name=f"ccg-worker-{i}", daemon=True)
            for i in range(self.p)
        ]

    def start(self) -> None:
        for t in self._threads:
            t.start()
        logger.debug(f"Started {self.p} workers, barriers after phases {sorted(int(b) for b in self.plan.barriers)}")

    def _allocate(self, D: np.ndarray) -> None:
        if self.AD is None or self.AD.shape != D.shape:
            self.AD = np.empty_like(D, order="F")
            self.D_next = np.empty_like(D, order="F")
            self.G = np.empty((self.p, self.p), dtype=D.dtype)

    def step(self, state: BlockState, k: int, refresh: bool) -> StepInfo:
        """Run iteration k on the workers; called by the shared cCG loop."""
        if state.p_k != self.p:
            raise ValueError(f"runtime has {self.p} workers but the block has {state.p_k} agents")
        self._allocate(state.D)
        self.state = state
        self._k = k
        self._refresh = refresh
        self.counter.reset()
        self._waits = [0] * self.p
        self._hits = [0] * self.p
        self._singular = [False] * self.p

        t0 = time.perf_counter_ns()
        try:
            self._epoch_start.wait()
            self._epoch_end.wait()
        except threading.BrokenBarrierError as exc:
            self._raise_failure(k, exc)
        wall_ns = time.perf_counter_ns() - t0
        if self._failure is not None:
            self._raise_failure(k, None)

        if any(self._singular):
            raise SingularMatrixError(f"Gram matrix singular at iteration {k}")
        if self.stamps is not None:
            self._audit_tallies(k)

        state.D, self.D_next = self.D_next, state.D
        if self.stamps is not None:
            self.stamps.swap_directions()
        if refresh:
            state.last_refresh = k + 1

        hits = self._hits[0]
        if any(h != hits for h in self._hits):
            raise BarrierViolation(f"workers passed different barrier counts at iteration {k}: {self._hits}")
        state.extra["barrier_count"] = hits

        return StepInfo(
            mults=self.counter.grand_total(),
            wall_ns=wall_ns,
            barrier_wait_ns=list(self._waits),
            mults_per_worker=self.counter.per_worker(),
            barriers=hits,
        )

    def _audit_tallies(self, k: int) -> None:
        """Debug mode: each worker's per-phase tally must match the phase cost model."""
        expected = {ph.name.lower(): phase_mults(ph, self.A.n, self.p) for ph in Phase}
        for w in range(self.p):
            done = {key: v for key, v in self.counter.per_phase(w).items() if key != REFRESH_PHASE}
            if done != expected:
                raise ParallelRuntimeError(f"worker {w} tallied {done}, phase model expects {expected}", k)

    def _raise_failure(self, k: int, exc: BaseException | None) -> None:
        if self._failure is None:
            raise ParallelRuntimeError("worker pool broke without a recorded failure", k) from exc
        iteration, worker, cause = self._failure
        if isinstance(cause, (SpdViolationError, BarrierViolation)):
            raise cause
        raise ParallelRuntimeError(f"worker {worker} failed: {cause!r}", iteration) from cause

    def _fail(self, worker: int, exc: BaseException) -> None:
        with self._lock:
            if self._failure is None:
                self._failure = (self._k, worker, exc)
                logger.error(f"Worker {worker} failed at iteration {self._k}: {exc!r}")
        self._phase_barrier.abort()
        self._epoch_end.abort()
        self._epoch_start.abort()

    def _worker(self, i: int) -> None:
        while True:
            try:
                self._epoch_start.wait()
            except threading.BrokenBarrierError:
                return
            if self._stop:
                return
            try:
                self._iteration(i)
            except threading.BrokenBarrierError:
                return
            except Exception as exc:
                self._fail(i, exc)
                return
            try:
                self._epoch_end.wait()
            except threading.BrokenBarrierError:
                return

    def _after(self, i: int, phase: Phase) -> None:
        if not self.plan.barrier_after(phase):
            return
        t0 = time.perf_counter_ns()
        self._phase_barrier.wait()
        self._waits[i] += time.perf_counter_ns() - t0
        self._hits[i] += 1

    def _reads(self, name: str, i: int, k: int, phase: Phase) -> None:
        if self.stamps is not None:
            for j in range(self.p):
                self.stamps.check(name, j, k, phase, i)

    def _tally(self, i: int, phase: Phase, count: int) -> None:
        self.counter.add(i, phase, count)

    def _row(self, i: int, phase: Phase, v: np.ndarray, W: np.ndarray) -> np.ndarray:
        """vᵀW one column at a time, tallying every inner product issued."""
        out = np.empty(W.shape[1], dtype=W.dtype)
        for j in range(W.shape[1]):
            out[j] = dot(v, W[:, j])
            self._tally(i, phase, v.shape[0])
        return out

    def _iteration(self, i: int) -> None:
        state, k = self.state, self._k
        A = self.A
        X, R, D = state.X, state.R, state.D
        AD, G, D_next = self.AD, self.G, self.D_next
        stamps = self.stamps

        AD[:, i] = matvec(A, D[:, i])
        self._tally(i, Phase.MATVEC, A.n * D.shape[0])
        if stamps:
            stamps.mark("AD", i, k, Phase.MATVEC)
        self._after(i, Phase.MATVEC)

        self._reads("AD", i, k, Phase.GRAM)
        G[i, :] = self._row(i, Phase.GRAM, D[:, i], AD)
        if stamps:
            stamps.mark("G", i, k, Phase.GRAM)
        self._after(i, Phase.GRAM)

        self._reads("D", i, k, Phase.RD)
        rd = self._row(i, Phase.RD, R[:, i], D)
        self._after(i, Phase.RD)

        self._reads("G", i, k, Phase.ALPHA_SOLVE)
        M = symmetrize_small(G)
        if M[i, i] < 0 or (M[i, i] == 0 and not is_zero(D[:, i])):
            raise SpdViolationError(f"dᵀAd = {M[i, i]} <= 0 for agent column {i} at iteration {k}")
        try:
            alpha_i = solve_small(M, -rd)
        except SingularMatrixError:
            # M is identical on every worker, so all of them land here
            self._singular[i] = True
            return
        self._tally(i, Phase.ALPHA_SOLVE, lu_solve_mults(M.shape[0]))
        self._after(i, Phase.ALPHA_SOLVE)

        self._reads("AD", i, k, Phase.R_UPDATE)
        R[:, i] = combine(R[:, i], AD, alpha_i)
        self._tally(i, Phase.R_UPDATE, AD.shape[0] * alpha_i.shape[0])
        if stamps:
            stamps.mark("R", i, k, Phase.R_UPDATE)
        self._after(i, Phase.R_UPDATE)

        self._reads("D", i, k, Phase.X_UPDATE)
        X[:, i] = combine(X[:, i], D, alpha_i)
        self._tally(i, Phase.X_UPDATE, D.shape[0] * alpha_i.shape[0])
        if stamps:
            stamps.mark("X", i, k, Phase.X_UPDATE)
        self._after(i, Phase.X_UPDATE)

        if self._refresh:
            R[:, i] = residual_column(A, X[:, i], self.b)
            self.counter.add(i, REFRESH_PHASE, A.n * X.shape[0])

        self._reads("AD", i, k, Phase.RAD)
        rad = self._row(i, Phase.RAD, R[:, i], AD)
        self._after(i, Phase.RAD)

        self._reads("G", i, k, Phase.BETA_SOLVE)
        beta_i = solve_small(M, -rad)
        self._tally(i, Phase.BETA_SOLVE, lu_solve_mults(M.shape[0]))
        self._after(i, Phase.BETA_SOLVE)

        self._reads("D", i, k, Phase.D_UPDATE)
        D_next[:, i] = combine(R[:, i], D, beta_i)
        self._tally(i, Phase.D_UPDATE, D.shape[0] * beta_i.shape[0])
        if stamps:
            stamps.mark("D_next", i, k, Phase.D_UPDATE)
        self._after(i, Phase.D_UPDATE)

    def shutdown(self) -> None:
        """Release and join the workers."""
        self._stop = True
        if not self._epoch_start.broken:
            try:
                self._epoch_start.wait(timeout=SHUTDOWN_TIMEOUT_S)
            except threading.BrokenBarrierError:
                pass
        for t in self._threads:
            t.join(timeout=SHUTDOWN_TIMEOUT_S)
            if t.is_alive():
                logger.warning(f"{t.name} did not exit within {SHUTDOWN_TIMEOUT_S}s")


def parallel_ccg(
    A: SpdMatrix,
    b: np.ndarray,
    X0: np.ndarray,
    tol: float | None = None,
    max_iters: int | None = None,
    workers: int | None = None,
    plan: WorkPlan | None = None,
    *,
    x_star: np.ndarray | None = None,
    verify: bool = False,
    debug: bool = False,
    refresh_every: int | None = None,
) -> SolveTrace:
    """cCG on p threads, one per agent.

    Same stopping rules and results as ``ccg_solve``; the trace additionally
    carries per-worker barrier waits and multiplication tallies.
    """
    X0 = as_block(X0, A.mode)
    p = X0.shape[1]
    if workers is not None and workers != p:
        raise ValueError(f"worker count must equal the agent count, got workers={workers}, p={p}")
    if plan is None:
        plan = WorkPlan(p)
    elif plan.p != p:
        raise ValueError(f"plan is for {plan.p} workers, X0 has {p} agents")

    runtime = ParallelCooperativeRuntime(A, b, plan, debug=debug)
    runtime.start()
    try:
        return run_cooperative(
            A,
            b,
            X0,
            algorithm=Algorithm.CCG_PAR,
            tol=tol,
            max_iters=max_iters,
            rank_tol=None,
            restrict_on_rank_drop=False,
            stop_rule=StopRule.FIRST_AGENT,
            x_star=x_star,
            verify=verify,
            refresh_every=refresh_every,
            step=runtime.step,
        )
    finally:
        runtime.shutdown()
