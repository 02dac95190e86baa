"""Dense linear-algebra kernels over binary64 floats or exact rationals.

Rational data lives in numpy ``object`` arrays of ``fractions.Fraction``;
every kernel dispatches on the array dtype, so the same code path serves both
scalar modes. Blocks (X, R, D, AD) are Fortran-ordered so that each agent's
column is contiguous.

All solvers build their iterations from the per-column kernels ``matvec``,
``dot`` and ``combine``. Sequential and multithreaded runs therefore perform
the same floating-point operations in the same order.
"""

import logging
import math
from fractions import Fraction
from typing import Any, NamedTuple

import numpy as np

from src.config import settings
from src.core.errors import DimensionMismatchError, SingularMatrixError, SpdViolationError
from src.models.schemas import ScalarMode

logger = logging.getLogger(__name__)

Scalar = Any  # float or Fraction

# Philox stream id for the constructor's positive-definiteness check
SPD_CHECK_STREAM = 3


def scalar_mode(arr: np.ndarray) -> ScalarMode:
    """Infer the scalar mode from an array's dtype."""
    return ScalarMode.RATIONAL if arr.dtype == object else ScalarMode.FLOAT


def to_fractions(data: Any) -> np.ndarray:
    """Convert array-like data to an object array of Fractions."""
    arr = np.asarray(data, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx, value in np.ndenumerate(arr):
        out[idx] = value if isinstance(value, Fraction) else Fraction(value)
    return out


def as_field(data: Any, mode: ScalarMode) -> np.ndarray:
    """Coerce array-like data into the storage of ``mode``."""
    if mode == ScalarMode.RATIONAL:
        return to_fractions(data)
    return np.asarray(data, dtype=np.float64)


def new_block(n: int, p: int, mode: ScalarMode) -> np.ndarray:
    """Zero n×p block, column-major."""
    if mode == ScalarMode.RATIONAL:
        return np.asfortranarray(to_fractions(np.zeros((n, p), dtype=np.int64)))
    return np.zeros((n, p), dtype=np.float64, order="F")


def as_block(data: Any, mode: ScalarMode | None = None) -> np.ndarray:
    """Copy array-like data into a column-major block of the given mode."""
    arr = np.asarray(data)
    if mode is None:
        mode = scalar_mode(arr)
    arr = as_field(arr, mode)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return np.array(arr, order="F", copy=True)


def zero(mode: ScalarMode) -> Scalar:
    return Fraction(0) if mode == ScalarMode.RATIONAL else 0.0


class SpdMatrix:
    """Immutable dense symmetric positive definite matrix.

    Float input is symmetrized as (M + Mᵀ)/2. Rational input must be exactly
    symmetric. Positive definiteness is spot-checked with ``spd_checks`` random
    vectors drawn from a Philox stream; a failing vector raises
    ``SpdViolationError``.
    """

    __slots__ = ("_entries", "_mode")

    def __init__(
        self,
        entries: Any,
        mode: ScalarMode | None = None,
        spd_checks: int | None = None,
        seed: int = 0,
    ):
        arr = np.asarray(entries)
        if mode is None:
            mode = scalar_mode(arr)
        arr = as_field(arr, mode)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise DimensionMismatchError(f"SpdMatrix needs a nonempty square grid, got {arr.shape}")

        if mode == ScalarMode.FLOAT:
            arr = np.ascontiguousarray((arr + arr.T) / 2.0)
        else:
            if not np.array_equal(arr, arr.T):
                raise SpdViolationError("rational matrix is not exactly symmetric")
            arr = np.ascontiguousarray(arr)

        arr.setflags(write=False)
        self._entries = arr
        self._mode = mode
        self._check_positive(settings.spd_check_vectors if spd_checks is None else spd_checks, seed)

    def _check_positive(self, count: int, seed: int) -> None:
        if count <= 0:
            return
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(seed, spawn_key=(SPD_CHECK_STREAM,)))
        )
        n = self.n
        for trial in range(count):
            if self._mode == ScalarMode.RATIONAL:
                x = to_fractions(rng.integers(-9, 10, size=n))
                if not any(x):
                    x[trial % n] = Fraction(1)
            else:
                x = rng.standard_normal(n)
            q = dot(x, matvec(self, x))
            if not q > 0:
                raise SpdViolationError(f"check vector {trial} gave xᵀAx = {q} <= 0")

    @property
    def n(self) -> int:
        return self._entries.shape[0]

    @property
    def mode(self) -> ScalarMode:
        return self._mode

    @property
    def entries(self) -> np.ndarray:
        """Read-only row-major view of the entries."""
        return self._entries

    def max_abs(self) -> float:
        return float(np.max(np.abs(self._entries)))

    def __repr__(self) -> str:
        return f"SpdMatrix(n={self.n}, mode={self._mode.value})"


def _check_rows(A: SpdMatrix, rows: int) -> None:
    if rows != A.n:
        raise DimensionMismatchError(f"operand has {rows} rows, matrix is {A.n}×{A.n}")


def matvec(A: SpdMatrix, x: np.ndarray) -> np.ndarray:
    """A·x for one column."""
    _check_rows(A, x.shape[0])
    return A.entries.dot(x)


def dot(x: np.ndarray, y: np.ndarray) -> Scalar:
    """n-term inner product (n multiplications)."""
    if x.shape != y.shape:
        raise DimensionMismatchError(f"dot of shapes {x.shape} and {y.shape}")
    return x.dot(y)


def combine(base: np.ndarray, block: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """base + Σ_j block[:, j]·coeffs[j], accumulated in column order."""
    if block.shape[0] != base.shape[0] or block.shape[1] != coeffs.shape[0]:
        raise DimensionMismatchError(
            f"combine of base {base.shape}, block {block.shape}, coeffs {coeffs.shape}"
        )
    out = base.copy()
    for j in range(block.shape[1]):
        out += block[:, j] * coeffs[j]
    return out


def matvec_block(A: SpdMatrix, D: np.ndarray) -> np.ndarray:
    """A·D column by column; result is n×p."""
    _check_rows(A, D.shape[0])
    out = np.empty_like(D, order="F")
    for j in range(D.shape[1]):
        out[:, j] = matvec(A, D[:, j])
    return out


def inner_block(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """UᵀV with entry (i, j) = dot(U[:, i], V[:, j])."""
    if U.shape[0] != V.shape[0]:
        raise DimensionMismatchError(f"inner product of blocks {U.shape} and {V.shape}")
    out = np.empty((U.shape[1], V.shape[1]), dtype=U.dtype)
    for i in range(U.shape[1]):
        for j in range(V.shape[1]):
            out[i, j] = dot(U[:, i], V[:, j])
    return out


def symmetrize_small(G: np.ndarray) -> np.ndarray:
    """(G + Gᵀ)/2 in float mode; rational Gram matrices are already exact."""
    if G.dtype == object:
        return G.copy()
    return (G + G.T) / 2.0


def gram(D: np.ndarray, AD: np.ndarray) -> np.ndarray:
    """DᵀAD, symmetrized in float mode."""
    if D.shape != AD.shape:
        raise DimensionMismatchError(f"gram of blocks {D.shape} and {AD.shape}")
    return symmetrize_small(inner_block(D, AD))


def residual_column(A: SpdMatrix, x: np.ndarray, b: np.ndarray) -> np.ndarray:
    """A·x − b."""
    return matvec(A, x) - b


def residual_block(A: SpdMatrix, X: np.ndarray, b: np.ndarray) -> np.ndarray:
    """R = AX − 1ᵀb, one column per agent."""
    _check_rows(A, X.shape[0])
    if b.shape != (A.n,):
        raise DimensionMismatchError(f"right-hand side has shape {b.shape}, expected ({A.n},)")
    R = np.empty_like(X, order="F")
    for j in range(X.shape[1]):
        R[:, j] = residual_column(A, X[:, j], b)
    return R


def lu_factor(M: np.ndarray, pivot_rtol: float | None = None) -> tuple[np.ndarray, list[int]]:
    """Doolittle LU with partial pivoting, in place on a copy of M.

    Returns the packed factors and the row permutation. A zero pivot (rational)
    or a pivot below ``pivot_rtol``·max|M| (float) raises SingularMatrixError.
    """
    p = M.shape[0]
    if M.ndim != 2 or M.shape[1] != p:
        raise DimensionMismatchError(f"LU needs a square matrix, got {M.shape}")
    LU = M.copy()
    perm = list(range(p))
    exact = LU.dtype == object
    if exact:
        threshold: Scalar = Fraction(0)
    else:
        rtol = settings.pivot_rtol if pivot_rtol is None else pivot_rtol
        threshold = rtol * float(np.max(np.abs(LU))) if p else 0.0

    for k in range(p):
        piv = k
        best = abs(LU[k, k])
        for i in range(k + 1, p):
            if abs(LU[i, k]) > best:
                piv, best = i, abs(LU[i, k])
        if best == 0 or (not exact and best <= threshold):
            raise SingularMatrixError(f"pivot {k} is {best}", step=k)
        if piv != k:
            LU[[k, piv], :] = LU[[piv, k], :]
            perm[k], perm[piv] = perm[piv], perm[k]
        for i in range(k + 1, p):
            LU[i, k] = LU[i, k] / LU[k, k]
            for j in range(k + 1, p):
                LU[i, j] = LU[i, j] - LU[i, k] * LU[k, j]
    return LU, perm


def lu_solve(LU: np.ndarray, perm: list[int], rhs: np.ndarray) -> np.ndarray:
    """Forward then backward substitution for one right-hand side."""
    p = LU.shape[0]
    y = rhs[perm].copy()
    for i in range(1, p):
        for j in range(i):
            y[i] = y[i] - LU[i, j] * y[j]
    for i in range(p - 1, -1, -1):
        for j in range(i + 1, p):
            y[i] = y[i] - LU[i, j] * y[j]
        y[i] = y[i] / LU[i, i]
    return y


def solve_small(M: np.ndarray, B: np.ndarray, pivot_rtol: float | None = None) -> np.ndarray:
    """Solve M·Z = B via one LU factorization; B is p×q (or a p-vector)."""
    if B.shape[0] != M.shape[0]:
        raise DimensionMismatchError(f"system {M.shape} with right-hand side {B.shape}")
    LU, perm = lu_factor(M, pivot_rtol)
    if B.ndim == 1:
        return lu_solve(LU, perm, B)
    out = np.empty(B.shape, dtype=LU.dtype if LU.dtype == object else np.float64)
    for j in range(B.shape[1]):
        out[:, j] = lu_solve(LU, perm, B[:, j])
    return out


class RankResult(NamedTuple):
    """Numerical rank and the greedy pivot columns that realize it."""

    rank: int
    pivots: tuple[int, ...]


def numerical_rank(D: np.ndarray, tol: float | None = None) -> RankResult:
    """Column-pivoted modified Gram–Schmidt rank.

    A step counts when its squared pivot norm exceeds tol² times the squared
    norm of the first (largest) pivot. Ties go to the lowest column index.
    Rational blocks require ``tol == 0``.
    """
    exact = D.dtype == object
    if tol is None:
        tol = 0 if exact else settings.rank_tol
    if tol < 0:
        raise ValueError(f"rank tolerance must be nonnegative, got {tol}")
    if exact and tol != 0:
        raise ValueError("rational mode requires tol = 0")
    if D.ndim != 2:
        raise DimensionMismatchError(f"rank needs a 2-d block, got {D.shape}")

    W = D.copy()
    remaining = list(range(D.shape[1]))
    pivots: list[int] = []
    first: Scalar = None
    scale = Fraction(tol) ** 2 if exact else tol * tol

    while remaining:
        best, best_sq = -1, None
        for j in remaining:
            sq = dot(W[:, j], W[:, j])
            if best_sq is None or sq > best_sq:
                best, best_sq = j, sq
        if first is None:
            first = best_sq
        if not best_sq > scale * first:
            break
        pivots.append(best)
        remaining.remove(best)
        q = W[:, best]
        for j in remaining:
            W[:, j] = W[:, j] - q * (dot(q, W[:, j]) / best_sq)

    return RankResult(rank=len(pivots), pivots=tuple(pivots))


def a_norm(A: SpdMatrix, x: np.ndarray) -> float:
    """(xᵀAx)^{1/2}; rational input is evaluated exactly before the square root."""
    q = dot(x, matvec(A, x))
    if isinstance(q, Fraction):
        if q < 0:
            raise SpdViolationError(f"negative A-norm radicand {q}")
        return math.sqrt(q)
    q = float(q)
    if q < 0:
        slack = 1e-12 * A.max_abs() * float(np.dot(x, x)) * A.n
        if q < -slack:
            raise SpdViolationError(f"negative A-norm radicand {q}")
        return 0.0
    return math.sqrt(q)


def objective(A: SpdMatrix, b: np.ndarray, x: np.ndarray) -> Scalar:
    """f(x) = ½xᵀAx − bᵀx."""
    return dot(x, matvec(A, x)) / 2 - dot(b, x)


def squared_norm(x: np.ndarray) -> Scalar:
    return dot(x, x)


def norm2(x: np.ndarray) -> float:
    return math.sqrt(squared_norm(x))
