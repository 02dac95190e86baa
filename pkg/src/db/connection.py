"""DuckDB connection management."""

import duckdb
from pathlib import Path
from contextlib import contextmanager
from datetime import datetime
import os

from src.config import get_absolute_path, settings


def get_db_path() -> Path:
    """Get absolute path to the results store."""
    # Environment variable wins over settings so tests can point at a temp file
    env_path = os.environ.get("DATABASE_PATH")
    if env_path:
        return Path(env_path)
    return get_absolute_path(settings.database_path)


@contextmanager
def get_connection(read_only: bool = False):
    """Get a DuckDB connection.

    Args:
        read_only: If True, open in read-only mode (for concurrent reads)

    Yields:
        DuckDB connection object
    """
    db_path = get_db_path()

    if not read_only:
        db_path.parent.mkdir(parents=True, exist_ok=True)

    conn = duckdb.connect(str(db_path), read_only=read_only)
    try:
        yield conn
    finally:
        conn.close()


def init_database() -> None:
    """Initialize database schema."""
    with get_connection() as conn:
        # One row per sweep
        conn.execute("""
            CREATE TABLE IF NOT EXISTS runs (
                run_id VARCHAR PRIMARY KEY,
                kind VARCHAR NOT NULL,
                config JSON NOT NULL,
                record_count INTEGER NOT NULL,
                failures INTEGER NOT NULL,
                mean_iteration_ratio DOUBLE,
                mean_speedup DOUBLE,
                fits JSON,
                created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
            )
        """)

        conn.execute("""
            CREATE TABLE IF NOT EXISTS records (
                run_id VARCHAR NOT NULL,
                n INTEGER NOT NULL,
                cond DOUBLE NOT NULL,
                tol DOUBLE NOT NULL,
                algo VARCHAR NOT NULL,
                p INTEGER NOT NULL,
                trial INTEGER NOT NULL,
                seed UBIGINT NOT NULL,
                iterations INTEGER NOT NULL,
                wall_time_s DOUBLE NOT NULL,
                converged BOOLEAN NOT NULL,
                final_minres DOUBLE NOT NULL,
                problem_hash VARCHAR NOT NULL,
                error VARCHAR,
                PRIMARY KEY (run_id, n, tol, algo, trial)
            )
        """)

        conn.execute("""
            CREATE TABLE IF NOT EXISTS metadata (
                key VARCHAR PRIMARY KEY,
                value VARCHAR,
                updated_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
            )
        """)

        conn.execute("CREATE INDEX IF NOT EXISTS idx_records_cell ON records(run_id, n, tol)")

        conn.execute("""
            INSERT OR REPLACE INTO metadata (key, value, updated_at)
            VALUES ('schema_version', '1.0', CURRENT_TIMESTAMP)
        """)

        conn.commit()


def get_last_run() -> tuple[str, datetime] | None:
    """run_id and time of the most recently stored sweep."""
    try:
        with get_connection(read_only=True) as conn:
            result = conn.execute("""
                SELECT value, updated_at FROM metadata WHERE key = 'last_run'
            """).fetchone()
            if result:
                return result[0], result[1]
    except duckdb.Error:
        pass
    return None


def set_last_run(run_id: str) -> None:
    with get_connection() as conn:
        conn.execute("""
            INSERT OR REPLACE INTO metadata (key, value, updated_at)
            VALUES ('last_run', ?, CURRENT_TIMESTAMP)
        """, [run_id])
        conn.commit()
