"""Shared fixtures: small generated problems and an isolated results store."""

import pytest

from src.models.schemas import ProblemSpec, ScalarMode
from src.problems.generators import make_problem


@pytest.fixture
def float_problem():
    """n=120, p=3, κ=1e3 float problem with its reference solution."""
    return make_problem(ProblemSpec(n=120, p=3, cond=1e3, seed=11))


@pytest.fixture
def rational_problem():
    """n=12, p=3 exact problem."""
    return make_problem(ProblemSpec(n=12, p=3, seed=5, mode=ScalarMode.RATIONAL))


@pytest.fixture
def db_path(tmp_path, monkeypatch):
    path = tmp_path / "results.duckdb"
    monkeypatch.setenv("DATABASE_PATH", str(path))
    return path
