"""Named experiment presets mirroring the reference figures at desk scale."""

from __future__ import annotations

from dataclasses import replace

from ..errors import ConfigError
from .config import EstimationConfig, ExperimentConfig, MonteCarloConfig, RangingConfig, ReportConfig

__all__ = ["PRESETS", "preset"]

K_SWEEP = (10, 20, 40, 60, 80, 100)


def _fig2(trials: int) -> ExperimentConfig:
    return ExperimentConfig(
        ranging=RangingConfig(K=10, sigma_m=0.1, order_L=3),
        estimation=EstimationConfig(max_order_M=0, estimators=(), constraints=()),
        montecarlo=MonteCarloConfig(trials=trials, sweep_parameter="K", sweep_values=K_SWEEP),
    )


def _fig3(trials: int) -> ExperimentConfig:
    return ExperimentConfig(
        ranging=RangingConfig(sigma_m=0.1, order_L=3),
        estimation=EstimationConfig(max_order_M=2, estimators=("MDS", "LLS", "WLLS")),
        montecarlo=MonteCarloConfig(trials=trials, sweep_parameter="K", sweep_values=K_SWEEP),
    )


def _fig4(trials: int) -> ExperimentConfig:
    return ExperimentConfig(
        scenario={"preset": "paper", "constant_velocity": True},
        ranging=RangingConfig(sigma_m=0.1, order_L=2),
        estimation=EstimationConfig(max_order_M=1, estimators=("MDS", "LMDS", "LLS", "WLLS"), lmds_order_L=3),
        montecarlo=MonteCarloConfig(trials=trials, sweep_parameter="K", sweep_values=K_SWEEP),
    )


def _fig5(trials: int) -> ExperimentConfig:
    return ExperimentConfig(
        ranging=RangingConfig(sigma_m=0.1, order_L=3),
        estimation=EstimationConfig(max_order_M=2, estimators=("MDS", "GLLS", "WGLLS")),
        montecarlo=MonteCarloConfig(trials=trials, sweep_parameter="K", sweep_values=K_SWEEP),
    )


def _fig6(trials: int) -> ExperimentConfig:
    times = tuple(round(-1.0 + 0.25 * k, 2) for k in range(9))
    return ExperimentConfig(
        ranging=RangingConfig(sigma_m=1.0, order_L=3),
        estimation=EstimationConfig(
            max_order_M=2, estimators=("MDS", "LLS", "WLLS", "GLLS", "WGLLS"), trajectory_times=times
        ),
        montecarlo=MonteCarloConfig(trials=trials, sweep_parameter="K", sweep_values=(50, 100, 500)),
    )


def _fig7(trials: int) -> ExperimentConfig:
    return ExperimentConfig(
        scenario={"preset": "paper", "shared_motion_nodes": 6},
        ranging=RangingConfig(K=100, sigma_m=0.1, order_L=3),
        estimation=EstimationConfig(max_order_M=2, estimators=("LLS", "WLLS", "GLLS", "WGLLS")),
        montecarlo=MonteCarloConfig(trials=trials, sweep_parameter="n_constraints", sweep_values=(2, 3, 4, 5, 6)),
        report=ReportConfig(rmse_normalization=1),
    )


PRESETS = {"fig2": _fig2, "fig3": _fig3, "fig4": _fig4, "fig5": _fig5, "fig6": _fig6, "fig7": _fig7}


def preset(name: str, trials: int = 500, **montecarlo) -> ExperimentConfig:
    """Build preset ``name``; ``montecarlo`` overrides fields such as ``master_seed`` or ``workers``."""
    try:
        build = PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    cfg = build(int(trials))
    if montecarlo:
        cfg = replace(cfg, montecarlo=replace(cfg.montecarlo, **montecarlo))
    return cfg.validate()
