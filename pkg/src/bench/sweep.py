"""Seeded benchmark sweeps.

One problem is generated per (n, trial) cell and shared by every algorithm
and tolerance in that cell, so CG and cCG are compared on identical A, b and
starting points (CG and steepest descent start from column 0 of X0).
"""

import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import NamedTuple

import polars as pl
import yaml

from src.bench.aggregate import aggregate
from src.config import settings
from src.models.schemas import Algorithm, ExperimentConfig, ExperimentRecord, ProblemSpec
from src.problems.generators import ProblemInstance, derive_seed, make_problem
from src.solvers import get_solver

logger = logging.getLogger(__name__)

SINGLE_START = (Algorithm.CG, Algorithm.SD)


def load_config(path: Path | str) -> ExperimentConfig:
    """Parse a flat key-value YAML sweep file."""
    with open(path) as f:
        data = yaml.safe_load(f) or {}
    return ExperimentConfig(**data)


def _failed(config: ExperimentConfig, spec: ProblemSpec, tol: float, algo: Algorithm, trial: int, h: str, err: str) -> ExperimentRecord:
    return ExperimentRecord(
        n=spec.n,
        cond=config.cond,
        tol=tol,
        algo=algo,
        p=config.p,
        trial=trial,
        seed=spec.seed,
        iterations=0,
        wall_time_s=0.0,
        converged=False,
        final_minres=float("inf"),
        problem_hash=h,
        error=err,
    )


def solve_one(problem: ProblemInstance, algo: Algorithm, tol: float, max_iters: int | None = None):
    """Run one algorithm on a generated problem."""
    solver = get_solver(algo)
    X0 = problem.X0[:, 0] if algo in SINGLE_START else problem.X0
    return solver(problem.A, problem.b, X0, tol=tol, max_iters=max_iters)


def run_cell(config: ExperimentConfig, n: int, trial: int) -> list[ExperimentRecord]:
    """Every (tol, algo) record of one (n, trial) cell."""
    seed = derive_seed(config.seed_base, n, trial)
    spec = ProblemSpec(n=n, p=config.p, cond=config.cond, seed=seed, mode=config.mode)
    try:
        problem = make_problem(spec, with_solution=False)
    except Exception as e:
        logger.warning(f"Problem generation failed for n={n} trial={trial}: {e}")
        return [_failed(config, spec, tol, algo, trial, "none", str(e)) for tol in config.tols for algo in config.algos]

    records = []
    for tol in config.tols:
        for algo in config.algos:
            try:
                trace = solve_one(problem, algo, tol, config.max_iters)
                records.append(
                    ExperimentRecord(
                        n=n,
                        cond=config.cond,
                        tol=tol,
                        algo=algo,
                        p=config.p,
                        trial=trial,
                        seed=seed,
                        iterations=trace.iterations,
                        wall_time_s=round(trace.wall_time_s, 9),
                        converged=trace.converged,
                        final_minres=trace.final_minres,
                        problem_hash=problem.problem_hash,
                    )
                )
            except Exception as e:
                logger.warning(f"{algo.value} failed at n={n} tol={tol} trial={trial}: {e}")
                records.append(_failed(config, spec, tol, algo, trial, problem.problem_hash, str(e)))
    return records


def record_key(r: ExperimentRecord) -> tuple:
    return (r.n, r.tol, r.algo.value, r.trial)


def run_sweep(config: ExperimentConfig, max_workers: int | None = None) -> list[ExperimentRecord]:
    """All records of a sweep, sorted by (n, tol, algo, trial).

    Cells run on a thread pool capped by ``max_workers`` (default from
    settings). Failed solves are kept as records with ``converged=False``.
    """
    workers = max_workers or settings.max_workers
    cells = [(n, trial) for n in config.dims for trial in range(config.trials)]
    logger.info(
        f"Sweep: dims={config.dims} tols={config.tols} algos={[a.value for a in config.algos]} "
        f"trials={config.trials} p={config.p} cond={config.cond:g} workers={workers}"
    )

    records: list[ExperimentRecord] = []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(run_cell, config, n, trial): (n, trial) for n, trial in cells}
        for future in as_completed(futures):
            n, trial = futures[future]
            cell = future.result()
            logger.info(f"Cell n={n} trial={trial}: {sum(r.converged for r in cell)}/{len(cell)} converged")
            records.extend(cell)

    records.sort(key=record_key)
    failed = sum(1 for r in records if r.error is not None)
    logger.info(f"Sweep finished: {len(records) - failed} succeeded, {failed} failed")
    return records


class ToleranceTable(NamedTuple):
    records: list[ExperimentRecord]
    table: pl.DataFrame
    nondecreasing: dict[str, bool]


def tolerance_sweep(config: ExperimentConfig, max_workers: int | None = None) -> ToleranceTable:
    """Per-tolerance means at a single dimension.

    ``nondecreasing`` reports, per algorithm, whether mean iteration counts
    never drop as the tolerance tightens.
    """
    if len(config.dims) != 1:
        raise ValueError(f"tolerance sweep needs a single dimension, got {config.dims}")
    if any(a <= b for a, b in zip(config.tols, config.tols[1:])):
        raise ValueError(f"tolerances must be strictly decreasing, got {config.tols}")

    records = run_sweep(config, max_workers=max_workers)
    table = aggregate(records).sort("tol", descending=True)
    flags = {
        column: all(a <= b for a, b in zip(table[column].to_list(), table[column].to_list()[1:]))
        for column in ("mean_cg_iters", "mean_ccg_iters")
    }
    nondecreasing = {"cg": flags["mean_cg_iters"], "ccg": flags["mean_ccg_iters"]}
    for algo, ok in nondecreasing.items():
        if not ok:
            logger.warning(f"{algo} iteration counts decrease as the tolerance tightens")
    return ToleranceTable(records=records, table=table, nondecreasing=nondecreasing)
