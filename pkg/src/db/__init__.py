"""Results store for benchmark runs."""

from .connection import get_connection, get_last_run, init_database, set_last_run
from .queries import (
    get_records,
    get_runs,
    insert_records,
    insert_run,
    load_records,
)

__all__ = [
    "get_connection",
    "init_database",
    "get_last_run",
    "set_last_run",
    "insert_run",
    "insert_records",
    "get_records",
    "load_records",
    "get_runs",
]
