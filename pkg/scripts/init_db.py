#!/usr/bin/env python3
"""Create the results store schema and optionally load finished runs into it.

Usage:
    python -m scripts.init_db
    python -m scripts.init_db --load results/<run_id> [results/<run_id> ...]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent.parent))

from src.bench import read_records_csv
from src.bench.records_io import read_summary_json
from src.config import ensure_dirs
from src.db import insert_records, insert_run, set_last_run
from src.db.connection import init_database, get_db_path
import logging

logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(name)s: %(message)s")
logger = logging.getLogger(__name__)


def load_run(run_dir: Path, kind: str = "sweep") -> str:
    """Insert the summary.json and records.csv written by a sweep."""
    summary = read_summary_json(run_dir / "summary.json")
    records = read_records_csv(run_dir / "records.csv")
    insert_run(summary, kind=kind)
    insert_records(summary.run_id, records)
    logger.info(f"Loaded run {summary.run_id}: {len(records)} records")
    return summary.run_id


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description="Initialize the DuckDB results store")
    parser.add_argument("--load", nargs="*", type=Path, default=[], help="Run directories to import")
    parser.add_argument("--kind", default="sweep", choices=["sweep", "tolerances"])
    args = parser.parse_args(argv)

    ensure_dirs()
    logger.info(f"Initializing database at {get_db_path()}")
    init_database()

    failed = []
    last = None
    for run_dir in args.load:
        try:
            last = load_run(run_dir, kind=args.kind)
        except (FileNotFoundError, ValueError) as e:
            logger.warning(f"Skipping {run_dir}: {e}")
            failed.append(run_dir)
    if last:
        set_last_run(last)

    logger.info("Database initialized successfully")
    return 0 if not failed else 1


if __name__ == "__main__":
    sys.exit(main())
