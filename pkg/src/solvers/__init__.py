"""Sequential reference solvers."""

from typing import Callable

from src.models.schemas import Algorithm, SolveTrace

from .cg import cg_solve
from .cooperative import (
    ccg_solve,
    compute_alpha,
    compute_beta,
    finish_with_cg,
    mccg_solve,
    solve_with_fallback,
)
from .steepest import steepest_descent_solve
from .trace import AgentBlock

# Registry of sequential solvers; the parallel runtime registers in src.parallel
SOLVERS: dict[Algorithm, Callable[..., SolveTrace]] = {
    Algorithm.CG: cg_solve,
    Algorithm.CCG: ccg_solve,
    Algorithm.MCCG: mccg_solve,
    Algorithm.SD: steepest_descent_solve,
}


def get_solver(algorithm: Algorithm | str) -> Callable[..., SolveTrace]:
    """Get a solver by algorithm name."""
    algorithm = Algorithm(algorithm)
    if algorithm == Algorithm.CCG_PAR:
        from src.parallel.runtime import parallel_ccg

        return parallel_ccg
    if algorithm not in SOLVERS:
        raise ValueError(f"Unknown algorithm: {algorithm}. Available: {[a.value for a in Algorithm]}")
    return SOLVERS[algorithm]


__all__ = [
    "AgentBlock",
    "SOLVERS",
    "cg_solve",
    "ccg_solve",
    "compute_alpha",
    "compute_beta",
    "finish_with_cg",
    "get_solver",
    "mccg_solve",
    "solve_with_fallback",
    "steepest_descent_solve",
]
