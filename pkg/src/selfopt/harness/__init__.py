"""Configuration, experiment runs, the necessity demonstration and the command line."""

from .config import (ConfigError, ExperimentConfig, build_member, load_experiment,
                     parse_experiment, three_mdp_class_config)
from .experiment import CSV_COLUMNS, RunSummary, run_all, run_experiment, simulate, write_trajectory
from .necessity import NecessityReport, ProbePolicy, demo_necessity

__all__ = [
    "CSV_COLUMNS", "ConfigError", "ExperimentConfig", "NecessityReport", "ProbePolicy",
    "RunSummary", "build_member", "demo_necessity", "load_experiment", "parse_experiment",
    "run_all", "run_experiment", "simulate", "three_mdp_class_config", "write_trajectory",
]
