"""Seeded test-problem generators."""

from .generators import (
    ProblemInstance,
    derive_seed,
    haar_orthogonal,
    integer_spd,
    make_problem,
    problem_hash,
    random_rhs_and_starts,
    random_spd,
)

__all__ = [
    "ProblemInstance",
    "derive_seed",
    "haar_orthogonal",
    "integer_spd",
    "make_problem",
    "problem_hash",
    "random_rhs_and_starts",
    "random_spd",
]
