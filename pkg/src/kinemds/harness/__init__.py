"""Experiment configuration, Monte-Carlo engine, presets and report writers."""

from .config import (
    ESTIMATORS,
    SWEEP_PARAMETERS,
    EstimationConfig,
    ExperimentConfig,
    MonteCarloConfig,
    RangingConfig,
    ReportConfig,
    build_scenario,
    config_from_dict,
    config_to_dict,
    load_config,
)
from .montecarlo import (
    ExperimentReport,
    ReportRow,
    estimate_all,
    point_bounds,
    rmse,
    run_monte_carlo,
    setup_point,
    trajectory_rmse_over_time,
    trial_seed,
)
from .presets import PRESETS, preset
from .report import emit_report, read_results

__all__ = [
    "ESTIMATORS",
    "PRESETS",
    "SWEEP_PARAMETERS",
    "EstimationConfig",
    "ExperimentConfig",
    "ExperimentReport",
    "MonteCarloConfig",
    "RangingConfig",
    "ReportConfig",
    "ReportRow",
    "build_scenario",
    "config_from_dict",
    "config_to_dict",
    "emit_report",
    "estimate_all",
    "load_config",
    "point_bounds",
    "preset",
    "read_results",
    "rmse",
    "run_monte_carlo",
    "setup_point",
    "trajectory_rmse_over_time",
    "trial_seed",
]
