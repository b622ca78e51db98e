"""Batch experiment runner: configs, preset scenarios and result files."""
from .config import ConfigError, ExperimentConfig, Sweep, SystemSource, load_config, parse_config, preset_names
from .experiments import (
    CONVERGENCE_TOL,
    IdealReport,
    ResultRow,
    SweepPointError,
    Table1Report,
    build_params,
    fig7_source,
    run_encodings_report,
    run_fig6_sweep,
    run_fig7_sweep,
    run_ideal_verification,
    run_table1_check,
)
from .io import COLUMNS, emit_results

__all__ = [
    "ConfigError", "ExperimentConfig", "Sweep", "SystemSource", "load_config", "parse_config",
    "preset_names", "CONVERGENCE_TOL", "IdealReport", "ResultRow", "SweepPointError", "Table1Report",
    "build_params", "fig7_source", "run_encodings_report", "run_fig6_sweep", "run_fig7_sweep",
    "run_ideal_verification", "run_table1_check", "COLUMNS", "emit_results",
]
