import json

import pytest

from src.bench import read_records_csv, write_records_csv
from src.cli.main import main
from src.db import get_runs, load_records
from src.models.schemas import ExperimentRecord


def test_model_command(capsys):
    assert main(["model", "--n", "5"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["p_star"] == 2
    assert payload["N_star_exact"] == "475/2"
    assert payload["gain"] is True


def test_model_command_with_agents(capsys):
    assert main(["model", "--n", "100", "--p", "2"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["per_iteration"] == 11210
    assert payload["integer_iteration_total"] == 50 * 11210


@pytest.mark.parametrize("mode,n,p", [("float", 40, 3), ("rational", 8, 2)])
def test_gen_then_solve(tmp_path, mode, n, p):
    out = tmp_path / "problem"
    assert main(["gen", "--n", str(n), "--p", str(p), "--seed", "3", "--mode", mode, "--out", str(out)]) == 0
    for name in ("A.mtx", "b.mtx", "X0.mtx", "x_star.mtx", "problem.json"):
        assert (out / name).exists()
    meta = json.loads((out / "problem.json").read_text())
    assert meta["spec"]["n"] == n

    trace_path = tmp_path / "trace.jsonl"
    code = main(["solve", "--problem", str(out), "--algo", "ccg", "--verify", "--trace-out", str(trace_path)])
    assert code == 0
    lines = trace_path.read_text().splitlines()
    assert len(lines) >= 2
    assert json.loads(lines[-1])["k"] >= 1


def test_gen_coordinate_layout(tmp_path):
    out = tmp_path / "problem"
    assert main(["gen", "--n", "20", "--p", "2", "--out", str(out), "--layout", "coordinate"]) == 0
    assert "coordinate" in (out / "A.mtx").read_text().splitlines()[0]
    assert main(["solve", "--problem", str(out), "--algo", "cg"]) == 0


@pytest.mark.parametrize(
    "extra",
    [
        ["--algo", "ccg-par", "--workers", "3", "--minimal-barriers"],
        ["--algo", "ccg-par", "--debug"],
        ["--algo", "mccg", "--stop-rule", "all_agents"],
        ["--algo", "ccg", "--fallback", "--finish-cg", "--max-iters", "5"],
        ["--algo", "sd", "--max-iters", "20"],
    ],
)
def test_solve_variants(extra):
    assert main(["solve", "--n", "60", "--p", "3", "--seed", "2", *extra]) == 0


def test_solve_needs_a_problem():
    with pytest.raises(SystemExit):
        main(["solve", "--algo", "ccg"])


def test_solve_rejects_invalid_problem():
    assert main(["solve", "--n", "3", "--p", "3"]) == 1


def test_solve_rejects_worker_mismatch():
    assert main(["solve", "--n", "30", "--p", "3", "--algo", "ccg-par", "--workers", "2"]) == 1


def fit_records() -> list[ExperimentRecord]:
    records = []
    for n in (100, 200, 400):
        for trial in range(2):
            records.append(
                ExperimentRecord(
                    n=n,
                    cond=1e4,
                    tol=1e-3,
                    algo="ccg",
                    p=3,
                    trial=trial,
                    seed=trial,
                    iterations=n // 2,
                    wall_time_s=1e-9 * n**3,
                    converged=True,
                    final_minres=1e-4,
                    problem_hash=f"{n}-{trial}",
                )
            )
    return records


def test_bench_fit_from_csv(tmp_path, capsys):
    path = write_records_csv(fit_records(), tmp_path / "records.csv")
    assert main(["bench", "fit", "--metric", "iters", "--in", str(path)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["slope"] == pytest.approx(1.0, abs=1e-9)
    assert payload["sample_count"] == 3


def test_bench_fit_parabola(tmp_path, capsys):
    path = write_records_csv(fit_records(), tmp_path / "records.csv")
    assert main(["bench", "fit", "--metric", "parabola", "--in", str(path)]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["dims"] == [100, 200, 400]
    assert payload["p"] == 3


def test_bench_fit_needs_input():
    assert main(["bench", "fit", "--metric", "time"]) == 1


def test_bench_sweep_writes_outputs_and_store(tmp_path, db_path):
    config = tmp_path / "sweep.yml"
    config.write_text("dims: [30, 60]\ncond: 100\ntols: [0.001]\ntrials: 2\np: 3\nseed_base: 1\n")
    out = tmp_path / "results"
    assert main(["bench", "sweep", "--config", str(config), "--out", str(out), "--db"]) == 0

    (run_dir,) = out.iterdir()
    records = read_records_csv(run_dir / "records.csv")
    assert len(records) == 8
    assert (run_dir / "aggregate.csv").exists()
    summary = json.loads((run_dir / "summary.json").read_text())
    assert set(summary["fits"]) == {"cg_time", "cg_iters", "ccg_time", "ccg_iters"}

    runs = get_runs(kind="sweep")
    assert runs["run_id"].to_list() == [run_dir.name]
    assert load_records(run_dir.name) == records


def test_bench_tolerances(tmp_path):
    config = tmp_path / "tols.yml"
    config.write_text("dims: [40]\ncond: 100\ntols: [0.01, 0.0001]\ntrials: 2\np: 3\n")
    out = tmp_path / "results"
    assert main(["bench", "tolerances", "--config", str(config), "--out", str(out)]) == 0
    (run_dir,) = out.iterdir()
    summary = json.loads((run_dir / "summary.json").read_text())
    assert summary["fits"]["nondecreasing"] == {"cg": True, "ccg": True}
