"""Experiment harness: configuration, runs, summaries, and lemma checks."""

from .bounds import check_l1_deviation, check_martingale_bound, check_sum_of_roots, sum_of_roots
from .config import RunConfig
from .runner import run_experiment
from .summary import ScalingReport, export_gnuplot, summarize, summarize_rows

__all__ = [
    "RunConfig",
    "ScalingReport",
    "check_l1_deviation",
    "check_martingale_bound",
    "check_sum_of_roots",
    "export_gnuplot",
    "run_experiment",
    "sum_of_roots",
    "summarize",
    "summarize_rows",
]
