"""CSV and JSON outputs of a sweep.

Column order of the records CSV is fixed (``RECORD_COLUMNS``). Wall times
are written with 9 decimals, minres and tolerances with ``repr`` so a
write/read cycle reproduces the records exactly.
"""

import json
import logging
from pathlib import Path

import polars as pl

from src.models.schemas import ExperimentRecord, SweepSummary

logger = logging.getLogger(__name__)

RECORD_COLUMNS = [
    "n",
    "cond",
    "tol",
    "algo",
    "p",
    "trial",
    "seed",
    "iterations",
    "wall_time_s",
    "converged",
    "final_minres",
    "problem_hash",
    "error",
]


def _row(r: ExperimentRecord) -> dict[str, str | None]:
    return {
        "n": str(r.n),
        "cond": repr(r.cond),
        "tol": repr(r.tol),
        "algo": r.algo.value,
        "p": str(r.p),
        "trial": str(r.trial),
        "seed": str(r.seed),
        "iterations": str(r.iterations),
        "wall_time_s": f"{r.wall_time_s:.9f}",
        "converged": "true" if r.converged else "false",
        "final_minres": repr(r.final_minres),
        "problem_hash": r.problem_hash,
        "error": r.error,
    }


def write_records_csv(records: list[ExperimentRecord], path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pl.DataFrame([_row(r) for r in records], schema={c: pl.Utf8 for c in RECORD_COLUMNS})
    df.write_csv(path)
    logger.info(f"Wrote {len(records)} records to {path}")
    return path


def read_records_csv(path: Path | str) -> list[ExperimentRecord]:
    """Read a records CSV back into validated ExperimentRecords."""
    df = pl.read_csv(path, infer_schema_length=0)
    missing = [c for c in RECORD_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"{path} lacks columns {missing}")
    return [ExperimentRecord(**row) for row in df.select(RECORD_COLUMNS).iter_rows(named=True)]


def write_aggregate_csv(table: pl.DataFrame, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.write_csv(path)
    return path


def write_summary_json(summary: SweepSummary, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(summary.model_dump_json(indent=2))
    return path


def read_summary_json(path: Path | str) -> SweepSummary:
    return SweepSummary(**json.loads(Path(path).read_text()))


def write_outputs(
    summary: SweepSummary,
    records: list[ExperimentRecord],
    table: pl.DataFrame,
    output_dir: Path | str,
) -> dict[str, Path]:
    """records.csv, aggregate.csv and summary.json under output_dir/run_id."""
    out = Path(output_dir) / summary.run_id
    paths = {
        "records": write_records_csv(records, out / "records.csv"),
        "aggregate": write_aggregate_csv(table, out / "aggregate.csv"),
        "summary": write_summary_json(summary, out / "summary.json"),
    }
    logger.info(f"Outputs written to {out}")
    return paths
