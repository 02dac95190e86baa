"""Configuration settings for the cooperative CG solver and benchmark harness."""

from pathlib import Path
from typing import Union
from pydantic_settings import BaseSettings
from pydantic import Field


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    # Paths
    project_root: Path = Field(default_factory=lambda: Path(__file__).parent.parent)
    database_path: str = Field(default="data/ccg_results.duckdb", alias="DATABASE_PATH")
    results_dir: Path = Field(default=Path("results"))
    desk_sweep_file: Path = Field(default=Path("data/desk_sweep.yml"))
    tolerance_sweep_file: Path = Field(default=Path("data/tolerance_sweep.yml"))

    # Concurrency
    max_workers: int = Field(default=1, ge=1, alias="CCG_MAX_WORKERS")

    # Numerical kernels
    rank_tol: float = 1e-10  # relative pivot threshold for numerical_rank
    pivot_rtol: float = 1e-14  # LU pivot threshold, relative to the largest |M_ij|
    refresh_every: int = 50  # true residual recompute period
    spd_check_vectors: int = 8
    rational_max_n: int = 64

    # Logging
    log_level: str = Field(default="INFO", alias="CCG_LOG_LEVEL")

    class Config:
        env_file = ".env"
        env_prefix = ""
        populate_by_name = True


# Global settings instance
settings = Settings()


def get_absolute_path(relative_path: Union[Path, str]) -> Path:
    """Convert relative path to absolute path from project root."""
    if isinstance(relative_path, str):
        relative_path = Path(relative_path)
    if relative_path.is_absolute():
        return relative_path
    return settings.project_root / relative_path


def ensure_dirs():
    """Create required directories if they don't exist."""
    dirs = [
        get_absolute_path(settings.results_dir),
        get_absolute_path(Path(settings.database_path)).parent,
    ]
    for d in dirs:
        d.mkdir(parents=True, exist_ok=True)
