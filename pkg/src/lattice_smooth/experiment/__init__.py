"""Configuration-driven studies and the command-line entry point."""

from .config import ExperimentConfig, GridPolicy, admissibility, load_config, parse_config
from .studies import (
    CSV_HEADER,
    BiasReport,
    RateReport,
    RateRow,
    VarianceReport,
    csv_text,
    fit_slope,
    run_bias_study,
    run_rate_study,
    run_variance_study,
)

__all__ = [
    "CSV_HEADER",
    "BiasReport",
    "ExperimentConfig",
    "GridPolicy",
    "RateReport",
    "RateRow",
    "VarianceReport",
    "admissibility",
    "csv_text",
    "fit_slope",
    "load_config",
    "parse_config",
    "run_bias_study",
    "run_rate_study",
    "run_variance_study",
]
