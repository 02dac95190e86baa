"""Multiplication-count model."""

from .model import (
    asymptotic_p_star,
    error_bound,
    gain_holds,
    integer_iteration_mults,
    optimal_p,
    total_mults,
    worst_case_mults,
)

__all__ = [
    "asymptotic_p_star",
    "error_bound",
    "gain_holds",
    "integer_iteration_mults",
    "optimal_p",
    "total_mults",
    "worst_case_mults",
]
