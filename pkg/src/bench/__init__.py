"""Benchmark sweeps, aggregation and fits."""

from .aggregate import aggregate, make_summary, records_frame, summary_averages
from .fits import fit_loglog, fit_metric, fit_parabola_and_mult_time, fit_parabola_from_timings, serial_agents
from .records_io import RECORD_COLUMNS, read_records_csv, write_outputs, write_records_csv
from .sweep import load_config, run_sweep, tolerance_sweep

__all__ = [
    "RECORD_COLUMNS",
    "aggregate",
    "fit_loglog",
    "fit_metric",
    "fit_parabola_and_mult_time",
    "fit_parabola_from_timings",
    "serial_agents",
    "load_config",
    "make_summary",
    "read_records_csv",
    "records_frame",
    "run_sweep",
    "summary_averages",
    "tolerance_sweep",
    "write_outputs",
    "write_records_csv",
]
