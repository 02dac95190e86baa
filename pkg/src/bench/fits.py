"""Least-squares fits of the scaling experiments."""

import logging

import numpy as np
import polars as pl
from scipy import stats

from src.bench.aggregate import records_frame
from src.models.schemas import Algorithm, ExperimentRecord, FitResult, ParabolaFit
from src.parallel.counters import count_iteration_mults

logger = logging.getLogger(__name__)

METRICS = {"time": "wall_time_s", "iters": "iterations"}


def fit_loglog(xs: list[float], ys: list[float]) -> FitResult:
    """Ordinary least squares on (ln x, ln y).

    Raises:
        ValueError: non-positive values, fewer than two points or fewer than
            two distinct abscissae.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"xs and ys differ in length: {x.size} vs {y.size}")
    if x.size < 2:
        raise ValueError(f"need at least 2 samples, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs strictly positive values")
    if np.unique(x).size < 2:
        raise ValueError("log-log fit needs at least 2 distinct abscissae")

    lx, ly = np.log(x), np.log(y)
    slope, intercept, r_value, _, _ = stats.linregress(lx, ly)
    rss = float(np.sum((ly - (intercept + slope * lx)) ** 2))
    return FitResult(
        slope=float(slope),
        intercept=float(intercept),
        rss=rss,
        sample_count=int(x.size),
        r_squared=float(r_value**2),
    )


def per_dimension_means(records: list[ExperimentRecord], metric: str, algo: str = "ccg") -> pl.DataFrame:
    """Mean of ``metric`` per dimension over converged records of one algorithm."""
    if metric not in METRICS:
        raise ValueError(f"Unknown metric: {metric}. Available: {list(METRICS)}")
    column = METRICS[metric]
    df = records_frame(records).filter((pl.col("algo") == algo) & pl.col("converged"))
    return df.group_by("n", maintain_order=True).agg(pl.col(column).mean().alias("value")).sort("n")


def fit_metric(records: list[ExperimentRecord], metric: str, algo: str = "ccg") -> FitResult:
    """Log-log fit of a per-dimension mean metric against n."""
    means = per_dimension_means(records, metric, algo)
    fit = fit_loglog(means["n"].to_list(), means["value"].to_list())
    logger.info(f"{algo} {metric}: slope={fit.slope:.3f} over {fit.sample_count} dimensions")
    return fit


def serial_agents(algo: str, p: int) -> int:
    """Agent workloads one thread executes per iteration.

    Sequential cCG and mcCG run all p agents on the calling thread; the
    threaded runtime spreads them one per worker, and CG and SD have a single
    agent.
    """
    if algo in (Algorithm.CCG.value, Algorithm.MCCG.value):
        return p
    return 1


def fit_parabola_from_timings(
    dims: list[int], seconds_per_iteration: list[float], p: int, serial: int = 1
) -> ParabolaFit:
    """Quadratic fit of time per iteration against n, plus time per multiplication.

    The per-multiplication time at each n is the measured time per iteration
    divided by ``serial`` times the per-worker count n² + 6np + p(p+1)(2p+1)/3;
    its mean and population standard deviation are reported, together with the
    parabola that the count predicts at that mean.
    """
    n = np.asarray(dims, dtype=np.float64)
    t = np.asarray(seconds_per_iteration, dtype=np.float64)
    if n.shape != t.shape:
        raise ValueError(f"dims and timings differ in length: {n.size} vs {t.size}")
    if np.unique(n).size < 3:
        raise ValueError(f"parabola fit needs at least 3 distinct dimensions, got {np.unique(n).size}")
    if serial < 1:
        raise ValueError(f"serial agent count must be positive, got {serial}")

    coefficients = np.polyfit(n, t, 2)
    counts = np.array([serial * count_iteration_mults(int(d), p) for d in dims], dtype=np.float64)
    per_mult = t / counts
    c = float(np.mean(per_mult))
    constant = p * (p + 1) * (2 * p + 1) / 3
    return ParabolaFit(
        coefficients=[float(v) for v in coefficients],
        predicted_coefficients=[c * serial, c * serial * 6 * p, c * serial * constant],
        seconds_per_mult=c,
        seconds_per_mult_std=float(np.std(per_mult)),
        dims=[int(d) for d in dims],
        p=p,
    )


def fit_parabola_and_mult_time(records: list[ExperimentRecord], algo: str = "ccg") -> ParabolaFit:
    """Parabola and per-multiplication time from the converged records of one algorithm."""
    df = records_frame(records).filter(
        (pl.col("algo") == algo) & pl.col("converged") & (pl.col("iterations") > 0)
    )
    if df.is_empty():
        raise ValueError(f"no converged {algo} records with timing")
    ps = df["p"].unique().to_list()
    if len(ps) != 1:
        raise ValueError(f"records mix agent counts {sorted(ps)}")
    p = 1 if algo in (Algorithm.CG.value, Algorithm.SD.value) else int(ps[0])
    per_iter = (
        df.with_columns((pl.col("wall_time_s") / pl.col("iterations")).alias("per_iter"))
        .group_by("n", maintain_order=True)
        .agg(pl.col("per_iter").mean())
        .sort("n")
    )
    fit = fit_parabola_from_timings(
        per_iter["n"].to_list(), per_iter["per_iter"].to_list(), p, serial=serial_agents(algo, p)
    )
    logger.info(
        f"{algo}: {fit.seconds_per_mult * 1e9:.2f} ns per multiplication "
        f"(std {fit.seconds_per_mult_std * 1e9:.2f} ns)"
    )
    return fit
