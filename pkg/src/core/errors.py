"""Exception hierarchy for the solver library."""


class DimensionMismatchError(ValueError):
    """Operand shapes disagree."""


class SpdViolationError(ValueError):
    """A matrix assumed symmetric positive definite is not."""


class SingularMatrixError(ArithmeticError):
    """LU elimination met a zero (or negligible) pivot.

    Raised by ``solve_small``; the cooperative solvers read it as a rank
    degeneracy of the direction block.
    """

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class NumericalBreakdownError(RuntimeError):
    """All agents were removed while the residual was still above tolerance."""


class ParallelRuntimeError(RuntimeError):
    """A worker thread failed during a parallel solve."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


class BarrierViolation(RuntimeError):
    """A worker read shared data that no barrier had published yet."""
