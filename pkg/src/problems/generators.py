"""Seeded generation of SPD test problems.

Every generator is a pure function of its parameters and seed. Randomness
comes from numpy's Philox counter-based generator, split into independent
streams (matrix, rhs, starts) so that changing the agent count never perturbs
the system matrix or the right-hand side.
"""

import hashlib
import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from src.config import settings
from src.core.dense import SpdMatrix, a_norm, as_block, norm2, residual_column, solve_small, to_fractions
from src.core.errors import SpdViolationError
from src.models.schemas import ProblemSpec, ScalarMode

logger = logging.getLogger(__name__)

STREAMS = {"matrix": 0, "rhs": 1, "starts": 2}

ENTRY_BOUND = 10  # b and X0 entries lie in [-ENTRY_BOUND, ENTRY_BOUND]
FACTOR_BOUND = 3  # integer_spd factor entries lie in [-FACTOR_BOUND, FACTOR_BOUND]


def stream(seed: int, name: str) -> np.random.Generator:
    """Independent Philox generator for one named stream of ``seed``."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(STREAMS[name],)))
    )


def haar_orthogonal(n: int, seed: int) -> np.ndarray:
    """Haar-distributed n×n orthogonal matrix.

    QR of an i.i.d. standard normal matrix, with Q's columns flipped so that
    every diagonal entry of R is positive.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    Z = stream(seed, "matrix").standard_normal((n, n))
    return _haar_from_gaussian(Z)


def _haar_from_gaussian(Z: np.ndarray) -> np.ndarray:
    Q, R = scipy.linalg.qr(Z)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def spd_spectrum(n: int, cond: float, rng: np.random.Generator) -> np.ndarray:
    """Diagonal of Λ: uniform on [1, cond] with the extremes clamped to 1 and cond."""
    if cond < 1:
        raise ValueError(f"condition number must be >= 1, got {cond}")
    lam = rng.uniform(1.0, cond, size=n)
    if n == 1:
        return np.ones(1)
    lo, hi = int(np.argmin(lam)), int(np.argmax(lam))
    lam[lo] = 1.0
    lam[hi] = cond
    return lam


def random_spd_with_spectrum(n: int, cond: float, seed: int) -> tuple[SpdMatrix, np.ndarray]:
    """random_spd plus the Λ it was built from."""
    rng = stream(seed, "matrix")
    U = _haar_from_gaussian(rng.standard_normal((n, n)))
    lam = spd_spectrum(n, cond, rng)
    A = (U * lam) @ U.T
    return SpdMatrix(A, mode=ScalarMode.FLOAT, seed=seed), lam


def random_spd(n: int, cond: float, seed: int) -> SpdMatrix:
    """A = U Λ Uᵀ with Haar U and realized condition number exactly ``cond``."""
    return random_spd_with_spectrum(n, cond, seed)[0]


def random_rhs_and_starts(
    n: int, p: int, seed: int, mode: ScalarMode = ScalarMode.FLOAT
) -> tuple[np.ndarray, np.ndarray]:
    """b and X0 with entries uniform on [-10, 10] (integers in rational mode)."""
    rhs, starts = stream(seed, "rhs"), stream(seed, "starts")
    if mode == ScalarMode.RATIONAL:
        b = to_fractions(rhs.integers(-ENTRY_BOUND, ENTRY_BOUND + 1, size=n))
        X0 = to_fractions(starts.integers(-ENTRY_BOUND, ENTRY_BOUND + 1, size=(n, p)))
        return b, as_block(X0, mode)
    b = rhs.uniform(-ENTRY_BOUND, ENTRY_BOUND, size=n)
    X0 = starts.uniform(-ENTRY_BOUND, ENTRY_BOUND, size=(n, p))
    return b, as_block(X0, mode)


def spd_from_integer_factor(B: np.ndarray) -> SpdMatrix:
    """BᵀB + n·I over the rationals."""
    B = to_fractions(B)
    n = B.shape[0]
    A = B.T.dot(B)
    for i in range(n):
        A[i, i] += n
    return SpdMatrix(A, mode=ScalarMode.RATIONAL)


def integer_spd(n: int, seed: int) -> SpdMatrix:
    """Exactly SPD rational matrix BᵀB + n·I with integer B in [-3, 3]."""
    if n > settings.rational_max_n:
        raise ValueError(f"integer_spd is limited to n <= {settings.rational_max_n}, got {n}")
    B = stream(seed, "matrix").integers(-FACTOR_BOUND, FACTOR_BOUND + 1, size=(n, n))
    return spd_from_integer_factor(B)


@dataclass
class ProblemInstance:
    """System matrix, right-hand side, starting block and (optionally) the exact solution."""

    spec: ProblemSpec
    A: SpdMatrix
    b: np.ndarray
    X0: np.ndarray
    x_star: np.ndarray | None = None
    realized_cond: float | None = None
    problem_hash: str = field(default="")

    def check_solution(self) -> None:
        """Verify that x_star solves the system (exactly in rational mode)."""
        if self.x_star is None:
            return
        r = residual_column(self.A, self.x_star, self.b)
        if self.spec.mode == ScalarMode.RATIONAL:
            if any(r):
                raise SpdViolationError("x_star does not solve the rational system exactly")
            return
        if a_norm(self.A, r) > 1e-10 * norm2(self.b):
            raise SpdViolationError("x_star residual exceeds 1e-10·‖b‖")


def solve_exact(A: SpdMatrix, b: np.ndarray) -> np.ndarray:
    """Reference solution: Cholesky for floats, exact elimination for rationals."""
    if A.mode == ScalarMode.RATIONAL:
        return solve_small(A.entries, b)
    return scipy.linalg.solve(A.entries, b, assume_a="pos")


def problem_hash(A: SpdMatrix, b: np.ndarray) -> str:
    """Deterministic 16-hex-digit identifier of (A, b)."""
    h = hashlib.sha256()
    if A.mode == ScalarMode.RATIONAL:
        h.update(repr(A.entries.tolist()).encode())
        h.update(repr(list(b)).encode())
    else:
        h.update(np.ascontiguousarray(A.entries).tobytes())
        h.update(np.ascontiguousarray(b, dtype=np.float64).tobytes())
    return h.hexdigest()[:16]


def make_problem(spec: ProblemSpec, with_solution: bool = True) -> ProblemInstance:
    """Generate (A, b, X0[, x*]) for a ProblemSpec."""
    if spec.mode == ScalarMode.RATIONAL:
        A = integer_spd(spec.n, spec.seed)
        realized = None
    else:
        A, lam = random_spd_with_spectrum(spec.n, spec.cond, spec.seed)
        realized = float(lam.max() / lam.min())
    b, X0 = random_rhs_and_starts(spec.n, spec.p, spec.seed, spec.mode)
    x_star = solve_exact(A, b) if with_solution else None
    instance = ProblemInstance(
        spec=spec,
        A=A,
        b=b,
        X0=X0,
        x_star=x_star,
        realized_cond=realized,
        problem_hash=problem_hash(A, b),
    )
    instance.check_solution()
    logger.debug(f"Generated problem n={spec.n} p={spec.p} seed={spec.seed} hash={instance.problem_hash}")
    return instance


def derive_seed(seed_base: int, n: int, trial: int) -> int:
    """64-bit trial seed for one (n, trial) cell of a sweep."""
    content = f"{seed_base}:{n}:{trial}"
    return int(hashlib.sha256(content.encode()).hexdigest()[:16], 16)
