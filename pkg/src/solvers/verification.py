"""Checks of the cooperative iteration's structural properties on stored history.

These run on the AgentBlock history of a verification-mode trace. Float
checks return normalized defects to compare against a threshold; rational
checks return exact values that must be zero.
"""

from fractions import Fraction
from typing import Any

import numpy as np

from src.complexity.model import error_bound
from src.core.dense import SpdMatrix, dot, inner_block, matvec_block, numerical_rank, objective, residual_column
from src.models.schemas import SolveTrace
from src.solvers.trace import AgentBlock


def _max_abs(M: np.ndarray) -> Any:
    if M.size == 0:
        return 0
    return max(abs(v) for v in M.flat)


def _max_diag(M: np.ndarray) -> Any:
    return max((M[i, i] for i in range(M.shape[0])), default=0)


def _normalized(defect: Any, scale: Any) -> Any:
    if isinstance(defect, Fraction):
        return defect
    return float(defect) / float(scale) if scale else float(defect)


def orthogonality_defect(history: list[AgentBlock], upto: int | None = None) -> Any:
    """max_{i≠j} ‖R_iᵀR_j‖_max / max_i ‖R_i‖² (exact ‖R_iᵀR_j‖_max in rational mode)."""
    blocks = history[: upto + 1] if upto is not None else history
    scale = max((_max_diag(inner_block(b.R, b.R)) for b in blocks), default=0)
    worst: Any = 0
    for i, bi in enumerate(blocks):
        for bj in blocks[i + 1:]:
            worst = max(worst, _max_abs(inner_block(bi.R, bj.R)))
    return _normalized(worst, scale)


def a_orthogonality_defect(A: SpdMatrix, history: list[AgentBlock], upto: int | None = None) -> Any:
    """Same statistic for D_iᵀAD_j, normalized by max_i max diag(D_iᵀAD_i)."""
    blocks = history[: upto + 1] if upto is not None else history
    ads = [matvec_block(A, b.D) for b in blocks]
    scale = max((_max_diag(inner_block(b.D, ad)) for b, ad in zip(blocks, ads)), default=0)
    worst: Any = 0
    for i, bi in enumerate(blocks):
        for j in range(i + 1, len(blocks)):
            worst = max(worst, _max_abs(inner_block(bi.D, ads[j])))
    return _normalized(worst, scale)


def concatenate(blocks: list[np.ndarray]) -> np.ndarray:
    return np.asfortranarray(np.concatenate(blocks, axis=1))


def span_dimension(history: list[AgentBlock], upto: int, which: str = "D") -> int:
    """Exact rank of [B_0 … B_upto] for B in {R, D}; rational history only."""
    blocks = [getattr(b, which) for b in history[: upto + 1]]
    return numerical_rank(concatenate(blocks), 0).rank


def krylov_spans(history: list[AgentBlock], upto: int) -> dict[str, int]:
    """Ranks of [R_0 … R_k], [D_0 … D_k] and of both together."""
    Rs = [b.R for b in history[: upto + 1]]
    Ds = [b.D for b in history[: upto + 1]]
    return {
        "R": numerical_rank(concatenate(Rs), 0).rank,
        "D": numerical_rank(concatenate(Ds), 0).rank,
        "RD": numerical_rank(concatenate(Rs + Ds), 0).rank,
    }


def optimality_defect(A: SpdMatrix, b: np.ndarray, history: list[AgentBlock]) -> Any:
    """max over k, i ≤ k, agents j of |D_iᵀ(A·X_{k+1}e_j − b)|.

    Float values are normalized by ‖D_i e_l‖·‖r_j‖.
    """
    worst: Any = 0
    for k in range(len(history) - 1):
        X_next = history[k + 1].X
        for j in range(X_next.shape[1]):
            r = residual_column(A, X_next[:, j], b)
            rr = dot(r, r)
            for block in history[: k + 1]:
                for col in range(block.D.shape[1]):
                    d = block.D[:, col]
                    g = dot(d, r)
                    if isinstance(g, Fraction):
                        worst = max(worst, abs(g))
                    else:
                        scale = float(np.sqrt(dot(d, d) * rr))
                        worst = max(worst, abs(float(g)) / scale if scale else 0.0)
    return worst


def objective_increase(A: SpdMatrix, b: np.ndarray, history: list[AgentBlock]) -> Any:
    """Largest f(X_{k+1}e_j) − f(X_k e_j) over agents present in both blocks (≤ 0 when monotone)."""
    worst: Any = None
    for prev, cur in zip(history, history[1:]):
        for local, agent in enumerate(cur.active):
            if agent not in prev.active:
                continue
            before = objective(A, b, prev.X[:, prev.active.index(agent)])
            after = objective(A, b, cur.X[:, local])
            delta = after - before
            worst = delta if worst is None else max(worst, delta)
    return 0 if worst is None else worst


def residual_drift(A: SpdMatrix, b: np.ndarray, history: list[AgentBlock]) -> Any:
    """max ‖R_k e_j − (A·X_k e_j − b)‖_max over the history, relative to ‖b‖_max in float mode."""
    worst: Any = 0
    for block in history:
        for j in range(block.X.shape[1]):
            diff = block.R[:, j] - residual_column(A, block.X[:, j], b)
            worst = max(worst, _max_abs(diff))
    return _normalized(worst, _max_abs(b))


def bound_violations(trace: SolveTrace, kappa: float, method: str, rel_slack: float = 1e-6, abs_slack: float = 0.0) -> list[int]:
    """Iterations whose A-norm error exceeds the classical bound for ``method``."""
    records = trace.records
    if not records or records[0].a_norm_errors is None:
        raise ValueError("trace carries no A-norm errors; solve with x_star")
    e0 = records[0].a_norm_errors[0]
    bad = []
    for rec in records:
        bound = error_bound(kappa, rec.k, e0, method)
        if rec.a_norm_errors[0] > bound * (1 + rel_slack) + abs_slack * e0:
            bad.append(rec.k)
    return bad
