#!/usr/bin/env python3
"""Desk-scale benchmark pipeline: dimension sweep, tolerance sweep, fits.

Usage:
    python -m scripts.run_desk_bench                 # Full pipeline
    python -m scripts.run_desk_bench --skip-tolerances
    python -m scripts.run_desk_bench --no-db         # CSV/JSON outputs only
"""

import argparse
import json
import sys
from pathlib import Path
import logging

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.bench import (
    aggregate,
    fit_metric,
    fit_parabola_and_mult_time,
    load_config,
    make_summary,
    run_sweep,
    tolerance_sweep,
    write_outputs,
)
from src.config import settings, get_absolute_path, ensure_dirs
from src.db import init_database, insert_records, insert_run, set_last_run

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
)
logger = logging.getLogger(__name__)


def run_pipeline(
    sweep_file: Path | None = None,
    tolerance_file: Path | None = None,
    skip_tolerances: bool = False,
    store: bool = True,
) -> dict:
    """Run the sweeps and fits, write outputs, optionally store in DuckDB.

    Returns:
        Summary dict with results
    """
    ensure_dirs()
    if store:
        init_database()

    checks: dict[str, bool] = {}
    errors: list[str] = []

    config = load_config(sweep_file or get_absolute_path(settings.desk_sweep_file))
    records = run_sweep(config)
    table = aggregate(records)

    fits = {}
    for algo in ("cg", "ccg"):
        for metric in ("time", "iters"):
            try:
                fits[f"{algo}_{metric}"] = fit_metric(records, metric, algo).model_dump()
            except ValueError as e:
                errors.append(f"{algo} {metric} fit: {e}")
    try:
        fits["ccg_parabola"] = fit_parabola_and_mult_time(records).model_dump()
    except ValueError as e:
        errors.append(f"parabola fit: {e}")

    summary = make_summary(config, records, table, fits)
    write_outputs(summary, records, table, get_absolute_path(config.output_dir))
    if store:
        insert_run(summary, kind="sweep")
        insert_records(summary.run_id, records)
        set_last_run(summary.run_id)

    checks["iteration_ratio_above_one"] = bool(
        not table.is_empty() and (table["iteration_ratio"] > 1.0).all()
    )
    if "ccg_time" in fits:
        checks["time_slope_in_range"] = 2.0 <= fits["ccg_time"]["slope"] <= 3.2
    if "ccg_iters" in fits:
        checks["iteration_slope_in_range"] = 0.2 <= fits["ccg_iters"]["slope"] <= 1.2

    tolerance_run_id = None
    if not skip_tolerances:
        tconfig = load_config(tolerance_file or get_absolute_path(settings.tolerance_sweep_file))
        result = tolerance_sweep(tconfig)
        tsummary = make_summary(tconfig, result.records, result.table, {"nondecreasing": result.nondecreasing})
        write_outputs(tsummary, result.records, result.table, get_absolute_path(tconfig.output_dir))
        if store:
            insert_run(tsummary, kind="tolerances")
            insert_records(tsummary.run_id, result.records)
        tolerance_run_id = tsummary.run_id
        checks["tolerance_monotone"] = all(result.nondecreasing.values())
        checks["ccg_not_slower_in_iterations"] = bool(
            (result.table["mean_ccg_iters"] <= result.table["mean_cg_iters"]).all()
        )

    for name, ok in checks.items():
        (logger.info if ok else logger.warning)(f"  {'✓' if ok else '✗'} {name}")

    return {
        "success": summary.failures == 0 and not errors,
        "run_id": summary.run_id,
        "tolerance_run_id": tolerance_run_id,
        "records": summary.records,
        "failures": summary.failures,
        "mean_iteration_ratio": summary.mean_iteration_ratio,
        "mean_speedup": summary.mean_speedup,
        "checks": checks,
        "errors": errors,
    }


def main():
    """CLI entry point."""
    parser = argparse.ArgumentParser(
        description="Run the desk-scale CG vs cCG benchmark pipeline",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--sweep", type=Path, help="Dimension sweep YAML")
    parser.add_argument("--tolerances", type=Path, help="Tolerance sweep YAML")
    parser.add_argument("--skip-tolerances", action="store_true", help="Only run the dimension sweep")
    parser.add_argument("--no-db", action="store_true", help="Do not store runs in DuckDB")
    parser.add_argument("--verbose", "-v", action="store_true", help="Verbose output")

    args = parser.parse_args()

    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    result = run_pipeline(
        sweep_file=args.sweep,
        tolerance_file=args.tolerances,
        skip_tolerances=args.skip_tolerances,
        store=not args.no_db,
    )

    print(json.dumps(result, indent=2, default=str))

    return 0 if result["success"] else 1


if __name__ == "__main__":
    sys.exit(main())
