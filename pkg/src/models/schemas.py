"""Pydantic schemas for problems, solve traces, complexity estimates and benchmark records."""

from datetime import datetime
from enum import Enum
from fractions import Fraction
from typing import Any
from pydantic import BaseModel, ConfigDict, Field, field_serializer, field_validator, model_validator
import hashlib
import json

SCHEMA_VERSION = "1.0"


class ScalarMode(str, Enum):
    """Scalar field the kernels operate over.

    float    = IEEE binary64
    rational = exact arbitrary-precision fractions
    """

    FLOAT = "float"
    RATIONAL = "rational"


class Algorithm(str, Enum):
    """Solver selectable from the CLI and the benchmark harness."""

    CG = "cg"
    CCG = "ccg"
    MCCG = "mccg"
    SD = "sd"
    CCG_PAR = "ccg-par"


class TerminalStatus(str, Enum):
    """Why a solve stopped."""

    CONVERGED = "converged"
    RANK_COLLAPSE = "rank_collapse"
    MAX_ITERATIONS = "max_iterations"


class StopRule(str, Enum):
    """When a multi-agent solve counts as converged.

    first_agent = stop as soon as the smallest residual meets the tolerance
    all_agents  = retire agents as they converge, stop when none is left
    """

    FIRST_AGENT = "first_agent"
    ALL_AGENTS = "all_agents"


class ProblemSpec(BaseModel):
    """Parameters of a generated test problem."""

    n: int = Field(..., ge=2, description="Dimension")
    p: int = Field(..., ge=1, description="Agent count")
    cond: float = Field(default=1e4, ge=1.0, description="Target condition number κ")
    seed: int = Field(default=0, ge=0, lt=2**64, description="64-bit unsigned seed")
    mode: ScalarMode = Field(default=ScalarMode.FLOAT)

    @model_validator(mode="after")
    def validate_agents(self) -> "ProblemSpec":
        """Require 1 ≤ p < n."""
        if self.p >= self.n:
            raise ValueError(f"need p < n, got p={self.p}, n={self.n}")
        return self


class ProblemMetadata(BaseModel):
    """JSON sidecar written next to generated Matrix Market files."""

    spec: ProblemSpec
    realized_cond: float | None = Field(default=None, description="λmax/λmin of the generated spectrum")
    problem_hash: str
    files: dict[str, str] = Field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION
    created_at: datetime = Field(default_factory=datetime.utcnow)


class IterationRecord(BaseModel):
    """One line of a solve trace."""

    k: int
    p_k: int
    active_agents: list[int]
    residual_norms: list[float]
    minres: float
    a_norm_errors: list[float] | None = None
    mults: int = 0
    wall_ns: int = 0
    barrier_wait_ns: list[int] | None = None
    mults_per_worker: list[int] | None = None
    barriers: int | None = Field(default=None, description="Phase barriers each worker passed")

    @model_validator(mode="after")
    def validate_minres(self) -> "IterationRecord":
        """minres is the minimum over the recorded active residuals."""
        if self.residual_norms and self.minres != min(self.residual_norms):
            raise ValueError("minres must equal the smallest recorded residual norm")
        return self

    def to_jsonl(self) -> str:
        """Convert to JSON Lines format."""
        return json.dumps(self.model_dump(mode="json", exclude_none=True))


class SolveTrace(BaseModel):
    """Per-iteration records plus the final estimates of every agent."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    algorithm: Algorithm
    mode: ScalarMode
    n: int
    p: int
    tol: float
    records: list[IterationRecord] = Field(default_factory=list)
    status: TerminalStatus | None = None
    converged_agent: int | None = Field(default=None, description="Original index of the first agent to converge")
    final_x: Any = Field(default=None, description="n×p block; retired agents frozen at their last value")
    wall_time_s: float = Field(default=0.0, description="Main-loop wall time")
    history: list[Any] | None = Field(default=None, description="AgentBlock per iteration in verification mode")
    barrier_count: int | None = Field(default=None, description="Phase barriers per iteration (parallel runs)")
    final_d: Any = Field(default=None, description="Search directions of the active agents at termination")

    @property
    def iterations(self) -> int:
        return self.records[-1].k if self.records else 0

    @property
    def final_minres(self) -> float:
        return self.records[-1].minres if self.records else float("inf")

    @property
    def converged(self) -> bool:
        return self.status == TerminalStatus.CONVERGED

    def best_agent(self) -> int:
        """Converged agent if any, else the active agent with the smallest last residual."""
        if self.converged_agent is not None:
            return self.converged_agent
        last = self.records[-1]
        if not last.active_agents:
            return 0
        i = min(range(len(last.residual_norms)), key=lambda j: (last.residual_norms[j], j))
        return last.active_agents[i]

    def to_jsonl(self) -> str:
        """All iteration records, one JSON object per line."""
        return "\n".join(r.to_jsonl() for r in self.records) + "\n"


class ComplexityEstimate(BaseModel):
    """Worst-case multiplication count of a p-agent run."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int = Field(..., ge=1)
    p: int = Field(..., ge=1)
    total_mults: Fraction = Field(..., description="N(p) = (n/p)·per_iteration, exact")
    per_iteration: int = Field(..., description="Per-worker multiplications per iteration")
    iterations_assumed: int = Field(..., description="⌊n/p⌋")
    integer_iteration_total: int = Field(..., description="⌊n/p⌋·per_iteration")

    @field_serializer("total_mults")
    def serialize_total(self, value: Fraction) -> str:
        return str(value)


class ExperimentConfig(BaseModel):
    """Flat key-value sweep configuration."""

    dims: list[int] = Field(..., min_length=1, description="Dimensions, ascending")
    cond: float = Field(default=1e4, ge=1.0)
    tols: list[float] = Field(default_factory=lambda: [1e-3], min_length=1)
    trials: int = Field(default=10, ge=1, description="Initial conditions per cell")
    p: int = Field(default=3, ge=1)
    seed_base: int = Field(default=0, ge=0)
    algos: list[Algorithm] = Field(default_factory=lambda: [Algorithm.CG, Algorithm.CCG])
    output_dir: str = Field(default="results")
    mode: ScalarMode = Field(default=ScalarMode.FLOAT)
    max_iters: int | None = Field(default=None, ge=1)

    @field_validator("dims")
    @classmethod
    def validate_dims(cls, v: list[int]) -> list[int]:
        """Dimensions must be sorted ascending."""
        if v != sorted(v):
            raise ValueError(f"dims must be sorted ascending, got {v}")
        return v

    @field_validator("tols")
    @classmethod
    def validate_tols(cls, v: list[float]) -> list[float]:
        if any(t < 0 for t in v):
            raise ValueError("tolerances must be nonnegative")
        return v

    @model_validator(mode="after")
    def validate_agents(self) -> "ExperimentConfig":
        if self.p >= self.dims[0]:
            raise ValueError(f"need p < n for every dimension, got p={self.p}, n={self.dims[0]}")
        return self


class ExperimentRecord(BaseModel):
    """One benchmark row."""

    n: int
    cond: float
    tol: float
    algo: Algorithm
    p: int
    trial: int
    seed: int
    iterations: int
    wall_time_s: float
    converged: bool
    final_minres: float
    problem_hash: str
    error: str | None = None

    @model_validator(mode="after")
    def validate_convergence(self) -> "ExperimentRecord":
        """A converged record must meet its tolerance."""
        if self.converged and not self.final_minres <= self.tol:
            raise ValueError(f"converged record has minres {self.final_minres} > tol {self.tol}")
        return self

    @classmethod
    def generate_id(cls, config: ExperimentConfig) -> str:
        """Deterministic run ID from the sweep configuration."""
        content = config.model_dump_json()
        return hashlib.sha256(content.encode()).hexdigest()[:16]


class FitResult(BaseModel):
    """Ordinary least-squares line."""

    slope: float
    intercept: float
    rss: float = Field(..., description="Residual sum of squares")
    sample_count: int = Field(..., ge=2)
    r_squared: float | None = None


class ParabolaFit(BaseModel):
    """Quadratic fit of time per iteration against n plus the per-multiplication estimate."""

    coefficients: list[float] = Field(..., description="Highest degree first")
    predicted_coefficients: list[float] = Field(
        ..., description="Parabola implied by the multiplication count and the mean time per multiplication"
    )
    seconds_per_mult: float
    seconds_per_mult_std: float
    dims: list[int]
    p: int


class AggregateRow(BaseModel):
    """Paired CG/cCG means for one (n, tol) cell."""

    n: int
    tol: float
    trials: int
    mean_cg_iters: float
    mean_ccg_iters: float
    mean_cg_time: float
    mean_ccg_time: float
    iteration_ratio: float
    speedup: float
    all_converged: bool


class SweepSummary(BaseModel):
    """JSON summary written next to the CSV outputs."""

    run_id: str
    config: ExperimentConfig
    records: int
    failures: int
    mean_iteration_ratio: float | None = None
    mean_speedup: float | None = None
    fits: dict[str, Any] = Field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION
    created_at: datetime = Field(default_factory=datetime.utcnow)
