"""Command-line entry point for the cooperative CG solvers and benchmark harness.

Usage:
    ccg gen --n 200 --p 3 --cond 1e4 --seed 7 --out problems/n200
    ccg solve --algo ccg --n 200 --p 3 --seed 7 [--trace-out trace.jsonl]
    ccg solve --algo ccg-par --problem problems/n200 --workers 3
    ccg model --n 1000000 [--p 100]
    ccg bench sweep --config data/desk_sweep.yml [--db]
    ccg bench tolerances --config data/tolerance_sweep.yml
    ccg bench fit --metric time --in results/<run_id>/records.csv

Examples:
    # Exact-arithmetic run that terminates after n/p iterations
    ccg solve --algo ccg --mode rational --n 12 --p 4 --seed 3

    # Multithreaded run with the minimal barrier set
    ccg solve --algo ccg-par --n 500 --p 3 --minimal-barriers
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from rich.console import Console
from rich.table import Table

from src.bench import (
    aggregate,
    fit_metric,
    fit_parabola_and_mult_time,
    load_config,
    make_summary,
    read_records_csv,
    run_sweep,
    tolerance_sweep,
    write_outputs,
)
from src.complexity.model import model_summary
from src.config import ensure_dirs, get_absolute_path, settings
from src.core.errors import (
    DimensionMismatchError,
    NumericalBreakdownError,
    ParallelRuntimeError,
    SpdViolationError,
)
from src.core.matrix_market import read_block, read_spd, write_matrix
from src.db import init_database, insert_records, insert_run, load_records, set_last_run
from src.models.schemas import (
    Algorithm,
    ExperimentRecord,
    ProblemMetadata,
    ProblemSpec,
    ScalarMode,
    SolveTrace,
    StopRule,
)
from src.parallel.plan import WorkPlan
from src.parallel.runtime import parallel_ccg
from src.problems.generators import make_problem, problem_hash
from src.solvers import finish_with_cg, get_solver, solve_with_fallback
from src.solvers.verification import (
    a_orthogonality_defect,
    objective_increase,
    orthogonality_defect,
    residual_drift,
)

logger = logging.getLogger(__name__)
console = Console()

PROBLEM_FILES = {"A": "A.mtx", "b": "b.mtx", "X0": "X0.mtx", "x_star": "x_star.mtx"}


def setup_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )


def _spec_from_args(args: argparse.Namespace) -> ProblemSpec:
    return ProblemSpec(n=args.n, p=args.p, cond=args.cond, seed=args.seed, mode=ScalarMode(args.mode))


def cmd_gen(args: argparse.Namespace) -> int:
    """Generate a problem and write it as Matrix Market files plus a JSON sidecar."""
    spec = _spec_from_args(args)
    problem = make_problem(spec, with_solution=True)
    out = Path(args.out)
    files = {
        "A": write_matrix(out / PROBLEM_FILES["A"], problem.A, layout=args.layout),
        "b": write_matrix(out / PROBLEM_FILES["b"], problem.b),
        "X0": write_matrix(out / PROBLEM_FILES["X0"], problem.X0),
        "x_star": write_matrix(out / PROBLEM_FILES["x_star"], problem.x_star),
    }
    meta = ProblemMetadata(
        spec=spec,
        realized_cond=problem.realized_cond,
        problem_hash=problem.problem_hash,
        files={k: v.name for k, v in files.items()},
    )
    (out / "problem.json").write_text(meta.model_dump_json(indent=2))
    console.print(f"[green]Wrote problem {problem.problem_hash} to {out}[/green]")
    return 0


def _load_problem(args: argparse.Namespace):
    """(A, b, X0, x_star) from --problem DIR or from generation parameters."""
    if args.problem:
        root = Path(args.problem)
        A = read_spd(root / PROBLEM_FILES["A"])
        b = read_block(root / PROBLEM_FILES["b"])[:, 0]
        X0 = read_block(root / PROBLEM_FILES["X0"])
        x_star = None
        if (root / PROBLEM_FILES["x_star"]).exists():
            x_star = read_block(root / PROBLEM_FILES["x_star"])[:, 0]
        logger.info(f"Loaded problem {problem_hash(A, b)} from {root}")
        return A, b, X0, x_star
    problem = make_problem(_spec_from_args(args), with_solution=args.verify)
    return problem.A, problem.b, problem.X0, problem.x_star


def _print_trace(trace: SolveTrace) -> None:
    table = Table(title=f"{trace.algorithm.value} (n={trace.n}, p={trace.p}, {trace.mode.value})")
    table.add_column("status")
    table.add_column("iterations", justify="right")
    table.add_column("minres", justify="right")
    table.add_column("agent", justify="right")
    table.add_column("wall time (s)", justify="right")
    table.add_row(
        trace.status.value,
        str(trace.iterations),
        f"{trace.final_minres:.3e}",
        str(trace.best_agent()),
        f"{trace.wall_time_s:.6f}",
    )
    console.print(table)


def _print_verification(trace: SolveTrace, A, b) -> None:
    table = Table(title="Verification")
    table.add_column("check")
    table.add_column("value", justify="right")
    table.add_row("residual orthogonality", str(orthogonality_defect(trace.history)))
    table.add_row("direction A-orthogonality", str(a_orthogonality_defect(A, trace.history)))
    table.add_row("objective increase", str(objective_increase(A, b, trace.history)))
    table.add_row("residual drift", str(residual_drift(A, b, trace.history)))
    console.print(table)


def cmd_solve(args: argparse.Namespace) -> int:
    A, b, X0, x_star = _load_problem(args)
    algo = Algorithm(args.algo)
    kwargs: dict = {"tol": args.tol, "max_iters": args.max_iters}
    if args.verify:
        kwargs["x_star"] = x_star

    if algo in (Algorithm.CG, Algorithm.SD):
        trace = get_solver(algo)(A, b, X0[:, 0], **kwargs)
    elif algo == Algorithm.CCG_PAR:
        plan = WorkPlan.minimal(X0.shape[1]) if args.minimal_barriers else None
        trace = parallel_ccg(A, b, X0, workers=args.workers, plan=plan, verify=args.verify, debug=args.debug, **kwargs)
    else:
        kwargs["stop_rule"] = StopRule(args.stop_rule)
        if algo == Algorithm.CCG and args.fallback:
            trace = solve_with_fallback(A, b, X0, verify=args.verify, **kwargs)
        else:
            trace = get_solver(algo)(A, b, X0, verify=args.verify, **kwargs)

    _print_trace(trace)
    if args.finish_cg and not trace.converged:
        finished = finish_with_cg(A, b, trace, tol=args.tol, x_star=kwargs.get("x_star"))
        console.print(f"CG finish: {finished.status.value} after {finished.iterations} more iterations")
        _print_trace(finished)
    if args.verify and trace.history:
        _print_verification(trace, A, b)
    if args.trace_out:
        Path(args.trace_out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.trace_out).write_text(trace.to_jsonl())
        console.print(f"Trace written to {args.trace_out}")
    return 0


def cmd_model(args: argparse.Namespace) -> int:
    print(json.dumps(model_summary(args.n, args.p), indent=2))
    return 0


def _print_aggregate(table) -> None:
    out = Table(title="CG vs cCG")
    for column in ("n", "tol", "trials", "mean_cg_iters", "mean_ccg_iters", "iteration_ratio", "speedup", "all_converged"):
        out.add_column(column, justify="right")
    for row in table.iter_rows(named=True):
        out.add_row(
            str(row["n"]),
            f"{row['tol']:g}",
            str(row["trials"]),
            f"{row['mean_cg_iters']:.2f}",
            f"{row['mean_ccg_iters']:.2f}",
            f"{row['iteration_ratio']:.3f}",
            f"{row['speedup']:.3f}",
            "✓" if row["all_converged"] else "✗",
        )
    console.print(out)


def _store(summary, records: list[ExperimentRecord], kind: str) -> None:
    init_database()
    insert_run(summary, kind=kind)
    insert_records(summary.run_id, records)
    set_last_run(summary.run_id)
    logger.info(f"Stored run {summary.run_id} ({len(records)} records)")


def cmd_bench_sweep(args: argparse.Namespace) -> int:
    config = load_config(args.config or get_absolute_path(settings.desk_sweep_file))
    if args.out:
        config = config.model_copy(update={"output_dir": args.out})
    records = run_sweep(config, max_workers=args.workers)
    table = aggregate(records)

    fits = {}
    if len(config.dims) >= 2:
        for metric in ("time", "iters"):
            for algo in ("cg", "ccg"):
                try:
                    fits[f"{algo}_{metric}"] = fit_metric(records, metric, algo).model_dump()
                except ValueError as e:
                    logger.warning(f"Skipping {algo} {metric} fit: {e}")
    if len(config.dims) >= 3:
        try:
            fits["ccg_parabola"] = fit_parabola_and_mult_time(records).model_dump()
        except ValueError as e:
            logger.warning(f"Skipping parabola fit: {e}")

    summary = make_summary(config, records, table, fits)
    write_outputs(summary, records, table, get_absolute_path(config.output_dir))
    if args.db:
        _store(summary, records, "sweep")

    _print_aggregate(table)
    if summary.mean_iteration_ratio is not None:
        console.print(
            f"Mean iteration ratio {summary.mean_iteration_ratio:.3f}, mean speedup {summary.mean_speedup:.3f}"
        )
    return 0 if summary.failures == 0 else 1


def cmd_bench_tolerances(args: argparse.Namespace) -> int:
    config = load_config(args.config or get_absolute_path(settings.tolerance_sweep_file))
    if args.out:
        config = config.model_copy(update={"output_dir": args.out})
    result = tolerance_sweep(config, max_workers=args.workers)
    summary = make_summary(config, result.records, result.table, {"nondecreasing": result.nondecreasing})
    write_outputs(summary, result.records, result.table, get_absolute_path(config.output_dir))
    if args.db:
        _store(summary, result.records, "tolerances")
    _print_aggregate(result.table)
    for algo, ok in result.nondecreasing.items():
        console.print(f"{algo}: iterations nondecreasing as tol tightens: {'yes' if ok else 'no'}")
    return 0 if summary.failures == 0 else 1


def cmd_bench_fit(args: argparse.Namespace) -> int:
    if args.input:
        records = read_records_csv(args.input)
    elif args.run_id:
        records = load_records(args.run_id)
    else:
        console.print("[red]Pass --in <records.csv> or --run-id <id>[/red]")
        return 1

    if args.metric == "parabola":
        result = fit_parabola_and_mult_time(records, algo=args.algo)
    else:
        result = fit_metric(records, args.metric, algo=args.algo)
    print(result.model_dump_json(indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccg", description="Cooperative Conjugate Gradient solvers and benchmarks")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def problem_args(p: argparse.ArgumentParser, required: bool) -> None:
        p.add_argument("--n", type=int, required=required, help="Dimension")
        p.add_argument("--p", type=int, default=3, help="Agent count")
        p.add_argument("--cond", type=float, default=1e4, help="Target condition number")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--mode", choices=[m.value for m in ScalarMode], default="float")

    gen = sub.add_parser("gen", help="Generate a problem as Matrix Market files")
    problem_args(gen, required=True)
    gen.add_argument("--out", required=True, help="Output directory")
    gen.add_argument("--layout", choices=["array", "coordinate"], default="array")
    gen.set_defaults(func=cmd_gen)

    solve = sub.add_parser("solve", help="Solve one problem")
    problem_args(solve, required=False)
    solve.add_argument("--problem", help="Directory written by `ccg gen`")
    solve.add_argument("--algo", choices=[a.value for a in Algorithm], default="ccg")
    solve.add_argument("--workers", type=int, help="Worker threads for ccg-par (must equal p)")
    solve.add_argument("--tol", type=float)
    solve.add_argument("--max-iters", type=int)
    solve.add_argument("--stop-rule", choices=[s.value for s in StopRule], default="first_agent")
    solve.add_argument("--fallback", action="store_true", help="Rerun as mccg on rank collapse")
    solve.add_argument("--finish-cg", action="store_true", help="Continue with CG from the best agent")
    solve.add_argument("--minimal-barriers", action="store_true", help="ccg-par: barriers after phases 1 and 2 only")
    solve.add_argument("--debug", action="store_true", help="ccg-par: check shared reads against epoch stamps and phase tallies against the cost model")
    solve.add_argument("--verify", action="store_true", help="Keep history and report orthogonality checks")
    solve.add_argument("--trace-out", help="Write the iteration records as JSON Lines")
    solve.set_defaults(func=cmd_solve)

    model = sub.add_parser("model", help="Multiplication-count model")
    model.add_argument("--n", type=int, required=True)
    model.add_argument("--p", type=int)
    model.set_defaults(func=cmd_model)

    bench = sub.add_parser("bench", help="Benchmark sweeps and fits")
    bench_sub = bench.add_subparsers(dest="bench_command", required=True)

    sweep = bench_sub.add_parser("sweep", help="Paired CG/cCG sweep over dimensions")
    sweep.add_argument("--config", help="YAML sweep file (default: desk sweep)")
    sweep.add_argument("--out", help="Output directory")
    sweep.add_argument("--workers", type=int, help=f"Concurrent trials (default {settings.max_workers})")
    sweep.add_argument("--db", action="store_true", help="Also store the run in DuckDB")
    sweep.set_defaults(func=cmd_bench_sweep)

    tols = bench_sub.add_parser("tolerances", help="Sweep over tolerances at one dimension")
    tols.add_argument("--config", help="YAML sweep file (default: tolerance sweep)")
    tols.add_argument("--out", help="Output directory")
    tols.add_argument("--workers", type=int)
    tols.add_argument("--db", action="store_true")
    tols.set_defaults(func=cmd_bench_tolerances)

    fit = bench_sub.add_parser("fit", help="Least-squares fits of stored records")
    fit.add_argument("--metric", choices=["time", "iters", "parabola"], required=True)
    fit.add_argument("--in", dest="input", help="records.csv")
    fit.add_argument("--run-id", help="Run stored with --db")
    fit.add_argument("--algo", default="ccg")
    fit.set_defaults(func=cmd_bench_fit)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)
    ensure_dirs()

    if args.command == "solve" and not args.problem and args.n is None:
        parser.error("solve needs --problem or --n")

    try:
        return args.func(args)
    except (DimensionMismatchError, SpdViolationError, NumericalBreakdownError, ParallelRuntimeError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 1
    except (ValueError, FileNotFoundError) as e:
        logger.error(str(e))
        return 1


if __name__ == "__main__":
    sys.exit(main())
