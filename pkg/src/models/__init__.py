"""Data models and schemas."""

from .schemas import (
    Algorithm,
    ComplexityEstimate,
    ExperimentConfig,
    ExperimentRecord,
    FitResult,
    IterationRecord,
    ParabolaFit,
    ProblemSpec,
    ScalarMode,
    SolveTrace,
    StopRule,
    TerminalStatus,
)

__all__ = [
    "Algorithm",
    "ComplexityEstimate",
    "ExperimentConfig",
    "ExperimentRecord",
    "FitResult",
    "IterationRecord",
    "ParabolaFit",
    "ProblemSpec",
    "ScalarMode",
    "SolveTrace",
    "StopRule",
    "TerminalStatus",
]
