"""Phase layout of one cooperative iteration and where the barriers go."""

from dataclasses import dataclass, field
from enum import IntEnum


class Phase(IntEnum):
    """The nine per-worker tasks of an iteration; worker i owns column/row i."""

    MATVEC = 1  # AD[:, i] = A·d_i
    GRAM = 2  # G[i, :] = d_iᵀ·AD
    RD = 3  # (RᵀD)[i, :]
    ALPHA_SOLVE = 4  # α_i from M·α_iᵀ = −(RᵀD)[i, :]ᵀ
    R_UPDATE = 5  # r_i += AD·α_iᵀ
    X_UPDATE = 6  # x_i += D·α_iᵀ
    RAD = 7  # (R₊ᵀAD)[i, :]
    BETA_SOLVE = 8  # β_i from M·β_iᵀ = −(R₊ᵀAD)[i, :]ᵀ
    D_UPDATE = 9  # d₊_i = r₊_i + D·β_iᵀ


REFRESH_PHASE = "residual_refresh"

MANDATORY_BARRIERS = frozenset({Phase.MATVEC, Phase.GRAM})
DEFAULT_BARRIERS = frozenset(
    {Phase.MATVEC, Phase.GRAM, Phase.RD, Phase.R_UPDATE, Phase.RAD}
)

# Buffer each phase writes; a worker only writes its own slot.
WRITES: dict[Phase, str] = {
    Phase.MATVEC: "AD",
    Phase.GRAM: "G",
    Phase.R_UPDATE: "R",
    Phase.X_UPDATE: "X",
    Phase.D_UPDATE: "D_next",
}


@dataclass(frozen=True)
class WorkPlan:
    """Worker count plus the set of phases followed by a barrier."""

    p: int
    barriers: frozenset[Phase] = field(default=DEFAULT_BARRIERS)
    validate: bool = True

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError(f"worker count must be positive, got {self.p}")
        if self.validate and not MANDATORY_BARRIERS <= self.barriers:
            missing = sorted(int(ph) for ph in MANDATORY_BARRIERS - self.barriers)
            raise ValueError(f"barriers after phases {missing} are mandatory")

    @classmethod
    def minimal(cls, p: int) -> "WorkPlan":
        return cls(p=p, barriers=MANDATORY_BARRIERS)

    def barrier_after(self, phase: Phase) -> bool:
        return phase in self.barriers

    @property
    def barrier_count(self) -> int:
        return len(self.barriers)

    def published(self, written: Phase, read: Phase) -> bool:
        """True when a barrier lies between a write in ``written`` and a read in ``read``."""
        return any(written <= b < read for b in self.barriers)
