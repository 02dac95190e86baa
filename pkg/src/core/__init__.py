"""Dense kernels shared by all solvers."""

from .dense import (
    RankResult,
    SpdMatrix,
    a_norm,
    as_block,
    combine,
    dot,
    gram,
    matvec,
    matvec_block,
    numerical_rank,
    objective,
    residual_block,
    solve_small,
)
from .errors import (
    BarrierViolation,
    DimensionMismatchError,
    NumericalBreakdownError,
    ParallelRuntimeError,
    SingularMatrixError,
    SpdViolationError,
)

__all__ = [
    "RankResult",
    "SpdMatrix",
    "a_norm",
    "as_block",
    "combine",
    "dot",
    "gram",
    "matvec",
    "matvec_block",
    "numerical_rank",
    "objective",
    "residual_block",
    "solve_small",
    "BarrierViolation",
    "DimensionMismatchError",
    "NumericalBreakdownError",
    "ParallelRuntimeError",
    "SingularMatrixError",
    "SpdViolationError",
]
