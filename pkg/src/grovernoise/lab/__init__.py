"""Experiment harness: noisy runs, thresholds, relaxation scans and fits."""
from .config import LabConfig, RunSettings, load_config, parse_config
from .experiment import (
    DEFAULT_SHOTS,
    Distribution,
    RelaxationPoint,
    SelectivityReport,
    ThresholdResult,
    default_relaxation_grid,
    find_error_threshold,
    log_grid,
    noise_for,
    parse_grid,
    relaxation_scan,
    run_shots,
    selectivity,
    selectivity_value,
    thermal_model,
)
from .fitting import FitResult, extrapolate, fit_scaling
from .report import export_relaxation, export_report, read_fit

__all__ = [
    "DEFAULT_SHOTS",
    "Distribution",
    "FitResult",
    "LabConfig",
    "RelaxationPoint",
    "RunSettings",
    "SelectivityReport",
    "ThresholdResult",
    "default_relaxation_grid",
    "export_relaxation",
    "export_report",
    "extrapolate",
    "find_error_threshold",
    "fit_scaling",
    "load_config",
    "log_grid",
    "noise_for",
    "parse_config",
    "parse_grid",
    "read_fit",
    "relaxation_scan",
    "run_shots",
    "selectivity",
    "selectivity_value",
    "thermal_model",
]
