"""Scalar-multiplication accounting.

Convention: an n-term inner product costs n multiplications, combining p
columns into an n-vector costs n·p, one n×n matrix by vector product costs n²,
and a p×p LU solve costs p(p+1)(2p+1)/6 per right-hand-side batch. Additions
are free.
"""

import threading
from collections import defaultdict

from src.parallel.plan import REFRESH_PHASE, Phase


def lu_solve_mults(p: int) -> int:
    return p * (p + 1) * (2 * p + 1) // 6


def count_iteration_mults(n: int, p: int) -> int:
    """Per-worker multiplications in one cooperative iteration: n² + 6np + p(p+1)(2p+1)/3."""
    if n < 1 or p < 1:
        raise ValueError(f"n and p must be positive, got n={n}, p={p}")
    return n * n + 6 * n * p + p * (p + 1) * (2 * p + 1) // 3


def phase_mults(phase: Phase, n: int, p: int) -> int:
    """Multiplications one worker spends in a single phase."""
    if phase == Phase.MATVEC:
        return n * n
    if phase in (Phase.ALPHA_SOLVE, Phase.BETA_SOLVE):
        return lu_solve_mults(p)
    return n * p


class MultCounter:
    """Per-worker, per-phase multiplication tallies for the current iteration.

    Each worker only touches its own row, so no locking is needed on the hot
    path; ``reset`` and the readers run on the coordinator between barriers.
    """

    def __init__(self, workers: int):
        self.workers = workers
        self._tallies: list[dict[str, int]] = [defaultdict(int) for _ in range(workers)]
        self._lock = threading.Lock()

    def add(self, worker: int, phase: Phase | str, count: int) -> None:
        key = phase.name.lower() if isinstance(phase, Phase) else phase
        self._tallies[worker][key] += count

    def reset(self) -> None:
        with self._lock:
            self._tallies = [defaultdict(int) for _ in range(self.workers)]

    def per_phase(self, worker: int) -> dict[str, int]:
        return dict(self._tallies[worker])

    def iteration_total(self, worker: int) -> int:
        """Per-iteration count for one worker, excluding residual refreshes."""
        return sum(v for k, v in self._tallies[worker].items() if k != REFRESH_PHASE)

    def refresh_total(self, worker: int) -> int:
        return self._tallies[worker].get(REFRESH_PHASE, 0)

    def per_worker(self) -> list[int]:
        return [self.iteration_total(w) for w in range(self.workers)]

    def grand_total(self) -> int:
        return sum(sum(t.values()) for t in self._tallies)
