"""Database query functions."""

import json

import polars as pl

from .connection import get_connection
from src.models.schemas import ExperimentRecord, SweepSummary


def insert_run(summary: SweepSummary, kind: str = "sweep") -> None:
    """Insert or replace a run row."""
    with get_connection() as conn:
        conn.execute("""
            INSERT OR REPLACE INTO runs
            (run_id, kind, config, record_count, failures, mean_iteration_ratio,
             mean_speedup, fits, created_at)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)
        """, [
            summary.run_id,
            kind,
            summary.config.model_dump_json(),
            summary.records,
            summary.failures,
            summary.mean_iteration_ratio,
            summary.mean_speedup,
            json.dumps(summary.fits),
            summary.created_at,
        ])
        conn.commit()


def insert_records(run_id: str, records: list[ExperimentRecord]) -> int:
    """Insert the records of one run, replacing rows with the same key.

    Returns:
        Number of records inserted
    """
    if not records:
        return 0

    with get_connection() as conn:
        for r in records:
            conn.execute("""
                INSERT OR REPLACE INTO records
                (run_id, n, cond, tol, algo, p, trial, seed, iterations,
                 wall_time_s, converged, final_minres, problem_hash, error)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
            """, [
                run_id,
                r.n,
                r.cond,
                r.tol,
                r.algo.value,
                r.p,
                r.trial,
                r.seed,
                r.iterations,
                r.wall_time_s,
                r.converged,
                r.final_minres,
                r.problem_hash,
                r.error,
            ])
        conn.commit()

    return len(records)


def get_records(run_id: str, algo: str | None = None) -> pl.DataFrame:
    """Records of a run, ordered by (n, tol, algo, trial)."""
    query = "SELECT * EXCLUDE (run_id) FROM records WHERE run_id = ?"
    params: list = [run_id]
    if algo:
        query += " AND algo = ?"
        params.append(algo)
    query += " ORDER BY n, tol, algo, trial"
    with get_connection(read_only=True) as conn:
        return conn.execute(query, params).pl()


def load_records(run_id: str) -> list[ExperimentRecord]:
    """Records of a run as validated models."""
    return [ExperimentRecord(**row) for row in get_records(run_id).iter_rows(named=True)]


def get_runs(kind: str | None = None) -> pl.DataFrame:
    """All stored runs, newest first."""
    with get_connection(read_only=True) as conn:
        if kind:
            return conn.execute(
                "SELECT * FROM runs WHERE kind = ? ORDER BY created_at DESC",
                [kind]
            ).pl()
        return conn.execute("SELECT * FROM runs ORDER BY created_at DESC").pl()
