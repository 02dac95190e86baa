"""Work plan, multiplication accounting and the multithreaded cCG runtime.

``parallel_ccg`` lives in ``src.parallel.runtime``; it is not re-exported here
because the runtime depends on the sequential solvers, which depend on the
counters in this package.
"""

from .counters import MultCounter, count_iteration_mults, lu_solve_mults, phase_mults
from .plan import DEFAULT_BARRIERS, MANDATORY_BARRIERS, REFRESH_PHASE, Phase, WorkPlan

__all__ = [
    "DEFAULT_BARRIERS",
    "MANDATORY_BARRIERS",
    "MultCounter",
    "Phase",
    "REFRESH_PHASE",
    "WorkPlan",
    "count_iteration_mults",
    "lu_solve_mults",
    "phase_mults",
]
