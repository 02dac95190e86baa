"""Worst-case multiplication model of a p-agent run.

Each of the p workers performs n² + 6np + p(p+1)(2p+1)/3 multiplications per
iteration, and n/p iterations are assumed, so

    N(p) = n³/p + 6n² + n(p+1)(2p+1)/3.

Everything is evaluated over the rationals.
"""

import logging
import math
from fractions import Fraction
from typing import NamedTuple

from scipy.optimize import brentq

from src.models.schemas import ComplexityEstimate
from src.parallel.counters import count_iteration_mults

logger = logging.getLogger(__name__)

EXHAUSTIVE_GAIN_LIMIT = 10_000


def total_mults(n: int, p: int) -> Fraction:
    """N(p), exact."""
    if n < 1 or p < 1:
        raise ValueError(f"n and p must be positive, got n={n}, p={p}")
    return Fraction(n**3, p) + 6 * n * n + Fraction(n * (p + 1) * (2 * p + 1), 3)


def worst_case_mults(n: int, p: int) -> ComplexityEstimate:
    if not 1 <= p <= n:
        raise ValueError(f"need 1 <= p <= n, got p={p}, n={n}")
    per_iteration = count_iteration_mults(n, p)
    return ComplexityEstimate(
        n=n,
        p=p,
        total_mults=total_mults(n, p),
        per_iteration=per_iteration,
        iterations_assumed=n // p,
        integer_iteration_total=integer_iteration_mults(n, p),
    )


def integer_iteration_mults(n: int, p: int) -> int:
    """⌊n/p⌋ iterations at the per-worker count."""
    return (n // p) * count_iteration_mults(n, p)


class GainResult(NamedTuple):
    holds: bool
    witness: int  # N(1) − N(n) = n(n−1)(n−5)/3


def gain_witness(n: int) -> int:
    return n * (n - 1) * (n - 5) // 3


def gain_holds(n: int) -> GainResult:
    """Whether N(1) ≥ N(p) for every p in [1, n].

    Exhaustive up to 10⁴; beyond that N is convex in p, so the maximum over
    [1, n] sits at an endpoint and the sign of N(1) − N(n) decides.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    witness = gain_witness(n)
    if n <= EXHAUSTIVE_GAIN_LIMIT:
        n1 = total_mults(n, 1)
        holds = all(total_mults(n, p) <= n1 for p in range(2, n + 1))
    else:
        holds = witness >= 0
    return GainResult(holds=holds, witness=witness)


class OptimalAgents(NamedTuple):
    p_star: int
    N_star: Fraction


def stationary_p(n: int) -> float:
    """Real root of n² = p²(4p/3 + 1) on [1, n]."""
    if n < 2:
        return 1.0
    n_sq = float(n) * float(n)

    def stationarity(p: float) -> float:
        return p * p * (4.0 * p / 3.0 + 1.0) - n_sq

    return brentq(stationarity, 1.0, float(n), xtol=1e-12)


def optimal_p(n: int) -> OptimalAgents:
    """Integer argmin of N over [1, n]; ties go to the smaller p."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    root = stationary_p(n)
    lo = max(1, math.floor(root) - 1)
    hi = min(n, math.ceil(root) + 1)
    best_p, best_N = lo, total_mults(n, lo)
    for p in range(lo + 1, hi + 1):
        N = total_mults(n, p)
        if N < best_N:
            best_p, best_N = p, N
    return OptimalAgents(p_star=best_p, N_star=best_N)


def asymptotic_p_star(n: int) -> float:
    """(3/4)^{1/3}·n^{2/3}."""
    return (0.75 ** (1.0 / 3.0)) * n ** (2.0 / 3.0)


def error_bound(kappa: float, k: int, e0_A: float, method: str) -> float:
    """Upper bound on ‖x_k − x*‖_A for steepest descent ("sd") or CG ("cg")."""
    if kappa < 1:
        raise ValueError(f"condition number must be >= 1, got {kappa}")
    if k < 0 or e0_A < 0:
        raise ValueError(f"need k >= 0 and e0_A >= 0, got k={k}, e0_A={e0_A}")
    if method == "sd":
        return e0_A * ((kappa - 1.0) / (kappa + 1.0)) ** k
    if method == "cg":
        s = math.sqrt(kappa)
        return 2.0 * e0_A * ((s - 1.0) / (s + 1.0)) ** k
    raise ValueError(f"Unknown method: {method}. Available: ['sd', 'cg']")


def model_summary(n: int, p: int | None = None) -> dict:
    """Payload of the ``model`` CLI command."""
    opt = optimal_p(n)
    gain = gain_holds(n)
    out = {
        "n": n,
        "p_star": opt.p_star,
        "N_star": float(opt.N_star),
        "N_star_exact": str(opt.N_star),
        "gain": gain.holds,
        "gain_witness": gain.witness,
        "asymptotic_p_star": asymptotic_p_star(n),
    }
    if p is not None:
        est = worst_case_mults(n, p)
        out.update(
            {
                "p": p,
                "N": float(est.total_mults),
                "N_exact": str(est.total_mults),
                "per_iteration": est.per_iteration,
                "integer_iteration_total": est.integer_iteration_total,
            }
        )
    return out
