"""Paired CG/cCG means per (n, tol) cell."""

import logging
import math

import polars as pl

from src.models.schemas import AggregateRow, ExperimentConfig, ExperimentRecord, SweepSummary

logger = logging.getLogger(__name__)

AGGREGATE_COLUMNS = list(AggregateRow.model_fields)


def records_frame(records: list[ExperimentRecord]) -> pl.DataFrame:
    """Records as a DataFrame sorted by (n, tol, algo, trial)."""
    rows = [{**r.model_dump(), "algo": r.algo.value} for r in records]
    schema = {
        "n": pl.Int64,
        "cond": pl.Float64,
        "tol": pl.Float64,
        "algo": pl.Utf8,
        "p": pl.Int64,
        "trial": pl.Int64,
        "seed": pl.UInt64,
        "iterations": pl.Int64,
        "wall_time_s": pl.Float64,
        "converged": pl.Boolean,
        "final_minres": pl.Float64,
        "problem_hash": pl.Utf8,
        "error": pl.Utf8,
    }
    return pl.DataFrame(rows, schema=schema).sort(["n", "tol", "algo", "trial"])


def _ratio(num: float, den: float) -> float:
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return num / den


def aggregate(records: list[ExperimentRecord], baseline: str = "cg", cooperative: str = "ccg") -> pl.DataFrame:
    """Mean iterations and times of both algorithms per (n, tol).

    iteration_ratio = mean baseline iterations / mean cooperative iterations,
    speedup = mean baseline time / mean cooperative time. Records that failed
    with an error are left out of the means; a cell missing either side is
    omitted. Cells with a non-converged trial keep ``all_converged = False``.
    """
    empty = pl.DataFrame(schema={c: pl.Float64 for c in AGGREGATE_COLUMNS})
    if not records:
        logger.warning("No records to aggregate")
        return empty

    df = records_frame(records)
    cells = df.select(["n", "tol"]).unique().sort(["n", "tol"])
    ok = df.filter(pl.col("error").is_null())
    stats = (
        ok.group_by(["n", "tol", "algo"], maintain_order=True)
        .agg(
            pl.len().alias("trials"),
            pl.col("iterations").mean().alias("mean_iters"),
            pl.col("wall_time_s").mean().alias("mean_time"),
            pl.col("converged").all().alias("all_converged"),
        )
    )

    rows = []
    for n, tol in cells.iter_rows():
        cell = stats.filter((pl.col("n") == n) & (pl.col("tol") == tol))
        base = cell.filter(pl.col("algo") == baseline)
        coop = cell.filter(pl.col("algo") == cooperative)
        if base.is_empty() or coop.is_empty():
            logger.warning(f"Omitting cell n={n} tol={tol:g}: no successful {baseline} or {cooperative} records")
            continue
        b, c = base.row(0, named=True), coop.row(0, named=True)
        converged = bool(b["all_converged"] and c["all_converged"])
        errored = df.filter((pl.col("n") == n) & (pl.col("tol") == tol) & pl.col("error").is_not_null()).height
        if not converged or errored:
            logger.warning(f"Cell n={n} tol={tol:g} contains non-converged trials")
            converged = False
        rows.append(
            AggregateRow(
                n=n,
                tol=tol,
                trials=min(b["trials"], c["trials"]),
                mean_cg_iters=b["mean_iters"],
                mean_ccg_iters=c["mean_iters"],
                mean_cg_time=b["mean_time"],
                mean_ccg_time=c["mean_time"],
                iteration_ratio=_ratio(b["mean_iters"], c["mean_iters"]),
                speedup=_ratio(b["mean_time"], c["mean_time"]),
                all_converged=converged,
            ).model_dump()
        )

    if not rows:
        return empty
    return pl.DataFrame(rows).select(AGGREGATE_COLUMNS)


def summary_averages(table: pl.DataFrame) -> tuple[float | None, float | None]:
    """Mean iteration ratio and mean speedup over all aggregated cells."""
    if table.is_empty():
        return None, None
    return float(table["iteration_ratio"].mean()), float(table["speedup"].mean())


def make_summary(
    config: ExperimentConfig,
    records: list[ExperimentRecord],
    table: pl.DataFrame,
    fits: dict | None = None,
) -> SweepSummary:
    ratio, speedup = summary_averages(table)
    return SweepSummary(
        run_id=ExperimentRecord.generate_id(config),
        config=config,
        records=len(records),
        failures=sum(1 for r in records if r.error is not None),
        mean_iteration_ratio=ratio,
        mean_speedup=speedup,
        fits=fits or {},
    )
