"""Experiment configuration (JSON) and its validation."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..gtwr import SPEED_OF_LIGHT
from ..scenario import KinematicEnsemble, ensemble_from_dict, ensemble_to_dict, load_scenario, paper_scenario

ESTIMATORS = ("MDS", "LMDS", "LLS", "WLLS", "GLLS", "WGLLS")
SWEEP_PARAMETERS = ("K", "sigma_m", "n_constraints")

__all__ = [
    "ESTIMATORS",
    "SWEEP_PARAMETERS",
    "EstimationConfig",
    "ExperimentConfig",
    "MonteCarloConfig",
    "RangingConfig",
    "ReportConfig",
    "build_scenario",
    "config_from_dict",
    "config_to_dict",
    "load_config",
]


def constant_velocity(e: KinematicEnsemble) -> KinematicEnsemble:
    """Drop every derivative above velocity."""
    return e.with_derivatives(e.derivatives[:1])


def shared_motion(e: KinematicEnsemble, n: int) -> KinematicEnsemble:
    """Give nodes ``2..n`` the derivatives of node 1 so that they move as one rigid group."""
    ys = []
    for y in e.derivatives:
        y = np.array(y)
        y[:, 1:n] = y[:, :1]
        ys.append(y)
    return e.with_derivatives(ys)


def build_scenario(spec) -> KinematicEnsemble:
    """Resolve a scenario spec: ``"paper"``, a preset dict, a file reference or an inline document."""
    if isinstance(spec, KinematicEnsemble):
        return spec
    if spec is None or spec == "paper":
        spec = {"preset": "paper"}
    if isinstance(spec, str):
        spec = {"file": spec}
    if not isinstance(spec, dict):
        raise ConfigError(f"invalid scenario specification {spec!r}")
    if "file" in spec:
        e = load_scenario(spec["file"])
    elif "preset" in spec:
        if spec["preset"] != "paper":
            raise ConfigError(f"unknown scenario preset {spec['preset']!r}")
        e = paper_scenario()
    else:
        e = ensemble_from_dict(spec)
    if spec.get("constant_velocity"):
        e = constant_velocity(e)
    if spec.get("shared_motion_nodes"):
        e = shared_motion(e, int(spec["shared_motion_nodes"]))
    return e


@dataclass(frozen=True)
class RangingConfig:
    K: int = 10
    interval: tuple = (-1.0, 1.0)
    sigma_m: float = 0.1
    order_L: int = 3
    T0: float | None = None
    delay_model: str = "geometric"
    noise_mode: str = "delay"
    c: float = SPEED_OF_LIGHT


@dataclass(frozen=True)
class EstimationConfig:
    max_order_M: int = 2
    estimators: tuple = ("MDS", "LLS", "WLLS", "GLLS", "WGLLS")
    constraints: tuple = ({"type": "immobile", "nodes": [1, 2]},)
    anchors: tuple = ()
    n_anchor_entries: int | None = None
    lmds_order_L: int = 3
    trajectory_times: tuple = ()


@dataclass(frozen=True)
class MonteCarloConfig:
    trials: int = 100
    master_seed: int = 0
    workers: int = 1
    sweep_parameter: str | None = None
    sweep_values: tuple = ()


@dataclass(frozen=True)
class ReportConfig:
    output_dir: str | None = None
    emit_plots: bool = False
    rmse_normalization: int | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: object = "paper"
    ranging: RangingConfig = field(default_factory=RangingConfig)
    estimation: EstimationConfig = field(default_factory=EstimationConfig)
    montecarlo: MonteCarloConfig = field(default_factory=MonteCarloConfig)
    report: ReportConfig = field(default_factory=ReportConfig)

    def sweep_points(self) -> list:
        if self.montecarlo.sweep_parameter is None:
            return [None]
        return list(self.montecarlo.sweep_values)

    def validate(self) -> "ExperimentConfig":
        r, est, mc = self.ranging, self.estimation, self.montecarlo
        if mc.trials < 1:
            raise ConfigError("trials must be >= 1")
        if mc.workers < 1:
            raise ConfigError("workers must be >= 1")
        if r.order_L < 1:
            raise ConfigError("order_L must be >= 1")
        if r.sigma_m < 0:
            raise ConfigError("sigma_m must be non-negative")
        if not r.interval[0] < r.interval[1]:
            raise ConfigError(f"invalid interval {r.interval}")
        if r.delay_model not in ("geometric", "polynomial"):
            raise ConfigError(f"unknown delay_model {r.delay_model!r}")
        if r.noise_mode not in ("delay", "timestamp"):
            raise ConfigError(f"unknown noise_mode {r.noise_mode!r}")
        unknown = set(est.estimators) - set(ESTIMATORS)
        if unknown:
            raise ConfigError(f"unknown estimators {sorted(unknown)}")
        if "WLLS" in est.estimators and "LLS" not in est.estimators:
            raise ConfigError("WLLS needs the LLS pass for its plug-in weights")
        if "WGLLS" in est.estimators and "GLLS" not in est.estimators:
            raise ConfigError("WGLLS needs the GLLS pass for its plug-in weights")
        kin = {"LLS", "WLLS", "GLLS", "WGLLS"} & set(est.estimators)
        if kin and est.max_order_M < 1:
            raise ConfigError("kinematic estimators need max_order_M >= 1")
        if kin and est.max_order_M > 2 and {"WLLS", "WGLLS"} & set(est.estimators):
            raise ConfigError("weighted estimators are limited to max_order_M <= 2")
        if kin and est.max_order_M >= r.order_L:
            raise ConfigError(f"order M={est.max_order_M} needs ranging order L >= {est.max_order_M + 1}")
        if "LMDS" in est.estimators and est.lmds_order_L < 3:
            raise ConfigError("LMDS needs range parameters up to the second derivative (lmds_order_L >= 3)")
        if mc.sweep_parameter is not None:
            if mc.sweep_parameter not in SWEEP_PARAMETERS:
                raise ConfigError(f"sweep parameter must be one of {SWEEP_PARAMETERS}")
            if not mc.sweep_values:
                raise ConfigError("sweep needs at least one value")
            for v in mc.sweep_values:
                if mc.sweep_parameter == "K":
                    need = max(r.order_L, est.lmds_order_L if "LMDS" in est.estimators else 0)
                    if int(v) < need:
                        raise ConfigError(f"swept K={v} is below the polynomial order {need}")
                elif mc.sweep_parameter == "sigma_m" and float(v) < 0:
                    raise ConfigError(f"swept sigma_m={v} is negative")
                elif mc.sweep_parameter == "n_constraints" and int(v) < 2:
                    raise ConfigError(f"n_constraints={v} must be >= 2")
        elif r.K < r.order_L:
            raise ConfigError(f"K={r.K} is below the polynomial order L={r.order_L}")
        return self


def _tuple(v):
    return tuple(v) if isinstance(v, (list, tuple)) else v


def _section(cls, doc, name):
    doc = doc or {}
    if not isinstance(doc, dict):
        raise ConfigError(f"section {name!r} must be an object")
    allowed = set(cls.__dataclass_fields__)
    extra = set(doc) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(extra)}")
    try:
        return cls(**{k: _tuple(v) for k, v in doc.items()})
    except TypeError as exc:
        raise ConfigError(f"invalid {name!r} section: {exc}") from exc


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    extra = set(doc) - {"scenario", "ranging", "estimation", "montecarlo", "report"}
    if extra:
        raise ConfigError(f"unknown top-level keys {sorted(extra)}")
    mc = dict(doc.get("montecarlo") or {})
    sweep = mc.pop("sweep", None)
    if sweep:
        if not isinstance(sweep, dict) or "parameter" not in sweep:
            raise ConfigError("sweep must be {parameter, values}")
        mc["sweep_parameter"] = sweep["parameter"]
        mc["sweep_values"] = sweep.get("values", [])
    est = dict(doc.get("estimation") or {})
    if "constraint" in est:
        c = est.pop("constraint")
        est["constraints"] = c if isinstance(c, list) else [c]
    try:
        cfg = ExperimentConfig(
            scenario=doc.get("scenario", "paper"),
            ranging=_section(RangingConfig, doc.get("ranging"), "ranging"),
            estimation=_section(EstimationConfig, est, "estimation"),
            montecarlo=_section(MonteCarloConfig, mc, "montecarlo"),
            report=_section(ReportConfig, doc.get("report"), "report"),
        )
        cfg = ExperimentConfig(
            cfg.scenario,
            RangingConfig(
                int(cfg.ranging.K), tuple(float(x) for x in cfg.ranging.interval), float(cfg.ranging.sigma_m),
                int(cfg.ranging.order_L), None if cfg.ranging.T0 is None else float(cfg.ranging.T0),
                cfg.ranging.delay_model, cfg.ranging.noise_mode, float(cfg.ranging.c),
            ),
            cfg.estimation,
            MonteCarloConfig(
                int(cfg.montecarlo.trials), int(cfg.montecarlo.master_seed), int(cfg.montecarlo.workers),
                cfg.montecarlo.sweep_parameter, tuple(cfg.montecarlo.sweep_values),
            ),
            cfg.report,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration value: {exc}") from exc
    return cfg.validate()


def config_to_dict(cfg: ExperimentConfig) -> dict:
    scen = cfg.scenario
    if isinstance(scen, KinematicEnsemble):
        scen = ensemble_to_dict(scen)
    mc = cfg.montecarlo
    mc_doc = {"trials": mc.trials, "master_seed": mc.master_seed, "workers": mc.workers}
    if mc.sweep_parameter is not None:
        mc_doc["sweep"] = {"parameter": mc.sweep_parameter, "values": list(mc.sweep_values)}

    def plain(obj):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in obj.__dict__.items()}

    return {
        "scenario": copy.deepcopy(scen),
        "ranging": plain(cfg.ranging),
        "estimation": plain(cfg.estimation),
        "montecarlo": mc_doc,
        "report": plain(cfg.report),
    }


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    scen = doc.get("scenario")
    if isinstance(scen, dict) and "file" in scen and not Path(scen["file"]).is_absolute():
        doc["scenario"] = dict(scen, file=str(path.parent / scen["file"]))
    elif isinstance(scen, str) and scen != "paper" and not Path(scen).is_absolute():
        doc["scenario"] = str(path.parent / scen)
    return config_from_dict(doc)
