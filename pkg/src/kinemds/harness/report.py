"""Deterministic report writers: results CSV, config echo, timing and optional SVG charts."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from ..errors import ConfigError
from .config import ExperimentConfig, config_to_dict
from .montecarlo import ExperimentReport

__all__ = ["RESULT_COLUMNS", "emit_report", "format_value", "read_results"]

RESULT_COLUMNS = ("sweep_value", "estimator", "quantity", "rmse", "rcrb_constrained", "rcrb_unconstrained", "trials")


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.10e}"
    return str(v)


def _mkdir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path}: {exc}") from exc
    return path


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _results_text(report: ExperimentReport) -> str:
    lines = [",".join(RESULT_COLUMNS)]
    for r in report.rows:
        sv = format_value(float(r.sweep_value)) if isinstance(r.sweep_value, float) else format_value(r.sweep_value)
        lines.append(
            ",".join(
                [sv, r.estimator, r.quantity, format_value(r.rmse), format_value(r.rcrb_constrained),
                 format_value(r.rcrb_unconstrained), str(r.trials)]
            )
        )
    return "\n".join(lines) + "\n"


def read_results(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _plot(report: ExperimentReport, out: Path) -> list[Path]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    # fixed metadata keeps the SVG bytes reproducible
    plt.rcParams["svg.hashsalt"] = "kinemds"
    quantities = sorted({r.quantity for r in report.rows}, key=lambda q: [r.quantity for r in report.rows].index(q))
    written = []
    numeric_sweep = report.sweep_parameter is not None
    for q in quantities:
        rows = [r for r in report.rows if r.quantity == q]
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        for est in dict.fromkeys(r.estimator for r in rows):
            sel = [r for r in rows if r.estimator == est]
            xs = [float(r.sweep_value) if numeric_sweep else 0.0 for r in sel]
            ax.plot(xs, [r.rmse for r in sel], marker="o", label=f"{est} RMSE")
            if any(math.isfinite(r.rcrb_constrained) for r in sel):
                ax.plot(xs, [r.rcrb_constrained for r in sel], linestyle="--", label=f"{est} RCCRB")
        if numeric_sweep and report.sweep_parameter in ("K", "sigma_m"):
            ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel(report.sweep_parameter or "run")
        ax.set_ylabel(q)
        ax.legend(fontsize=6)
        fig.tight_layout()
        name = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in q)
        path = out / f"rmse_{name}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
        written.append(path)
    return written


def emit_report(report: ExperimentReport, out_dir, cfg: ExperimentConfig | None = None, plots: bool | None = None) -> list[Path]:
    """Write ``results.csv``, ``timing.csv``, ``config.echo.json`` and optional charts.

    Wall-clock times go to ``timing.csv`` so that ``results.csv`` stays
    byte-identical across runs and thread counts.
    """
    out = _mkdir(Path(out_dir))
    written = []
    path = out / "results.csv"
    _write(path, _results_text(report))
    written.append(path)
    path = out / "timing.csv"
    _write(path, "sweep_value,wallclock_s\n" + "".join(f"{format_value(v)},{t:.6f}\n" for v, t in report.wallclock))
    written.append(path)
    if cfg is not None:
        path = out / "config.echo.json"
        try:
            doc = config_to_dict(cfg)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"configuration cannot be serialized: {exc}") from exc
        _write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
        written.append(path)
    if plots is None:
        plots = bool(cfg is not None and cfg.report.emit_plots)
    if plots and report.rows:
        written.extend(_plot(report, out))
    return written
