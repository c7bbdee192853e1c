"""Command-line entry point: ``kinemds {simulate,estimate,bounds,montecarlo}``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .bounds import save_bounds
from .errors import ConfigError, NumericalError
from .gtwr import DelayMeasurements, TimestampTable, as_generator, load_timestamps, measure_delays, save_timestamps
from .harness.config import ExperimentConfig, build_scenario, config_to_dict, load_config
from .harness.montecarlo import estimate_all, point_bounds, run_monte_carlo, setup_point, trial_seed
from .harness.presets import preset
from .harness.report import emit_report
from .ranging import save_range_parameters
from .scenario import relative_state, save_scenario

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def _first_point(cfg: ExperimentConfig):
    return cfg.sweep_points()[0]


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _echo(cfg: ExperimentConfig, out: Path) -> None:
    (out / "config.echo.json").write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n")


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, montecarlo=replace(cfg.montecarlo, master_seed=args.seed))
    out = _out_dir(args.out)
    pt = setup_point(cfg, _first_point(cfg), build_scenario(cfg.scenario))
    meas = measure_delays(pt.table, pt.sigma_m, as_generator(trial_seed(cfg.montecarlo.master_seed, 0, 0)),
                          cfg.ranging.noise_mode)
    t = meas.table
    # delay-mode noise lives on the delay, so it is carried by the receive marker
    observed = TimestampTable(t.n_nodes, t.transmit, t.transmit + meas.tau_matrix, t.T0, t.c)
    if meas.mode == "timestamp":
        observed = t
    save_timestamps(observed, out / "timestamps.csv")
    save_scenario(pt.truth, out / "truth.json")
    save_range_parameters(pt.params_true.truncated(cfg.ranging.order_L), out / "range_truth.csv")
    _echo(cfg, out)
    print(f"wrote {out / 'timestamps.csv'} ({t.K} exchanges on {len(t.pairs)} links)")
    return EXIT_OK


def cmd_estimate(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args.out)
    table = load_timestamps(args.timestamps)
    pt = setup_point(cfg, _first_point(cfg), build_scenario(cfg.scenario), table)
    meas = DelayMeasurements(table.delays().reshape(-1), (pt.sigma_m / table.c) ** 2, table, "delay")
    res = estimate_all(pt, meas)
    save_range_parameters(res.params, out / "range_params.csv")
    doc = {"T0": table.T0, "K": table.K}
    if res.X_hat is not None:
        doc["X"] = res.X_hat.tolist()
        doc["X_true_rel"] = relative_state(pt.truth).X_rel.tolist()
    doc["kinematics"] = {name: [y.tolist() for y in ys] for name, ys in res.kinematics.items()}
    (out / "estimates.json").write_text(json.dumps(doc, indent=2) + "\n")
    _echo(cfg, out)
    print(f"wrote {out / 'estimates.json'} ({', '.join(res.kinematics) or 'ranging only'})")
    return EXIT_OK


_BOUND_NAMES = {"LLS": "Ybar", "GLLS": "Y"}


def cmd_bounds(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args.out)
    rows = []
    for value in cfg.sweep_points():
        pt = setup_point(cfg, value, build_scenario(cfg.scenario))
        tag = "" if value is None else f"@{cfg.montecarlo.sweep_parameter}={value}"
        for (est, q), (con, unc) in point_bounds(pt).items():
            if est == "DR":
                rows.append((q + tag, ("r", "rdot", "rddot").index(q), "crb", unc))
            elif est == "MDS":
                rows.append(("X" + tag, 0, "oracle", unc))
            elif est in _BOUND_NAMES:
                name, order = _BOUND_NAMES[est] + tag, int(q[1:])
                rows.append((name, order, "ccrb", con))
                rows.append((name, order, "oracle", unc))
    save_bounds(rows, out / "bounds.csv")
    _echo(cfg, out)
    print(f"wrote {out / 'bounds.csv'} ({len(rows)} rows)")
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    if (args.config is None) == (args.preset is None):
        raise ConfigError("give exactly one of --config or --preset")
    if args.preset is not None:
        cfg = preset(args.preset, trials=args.trials or 500)
    else:
        cfg = load_config(args.config)
    mc = cfg.montecarlo
    if args.trials is not None:
        mc = replace(mc, trials=args.trials)
    if args.seed is not None:
        mc = replace(mc, master_seed=args.seed)
    if args.workers is not None:
        mc = replace(mc, workers=args.workers)
    cfg = replace(cfg, montecarlo=mc)
    if args.plots:
        cfg = replace(cfg, report=replace(cfg.report, emit_plots=True))
    cfg.validate()
    report = run_monte_carlo(cfg, progress=lambda v: print(f"sweep point {v} done", file=sys.stderr))
    written = emit_report(report, args.out, cfg)
    print(f"wrote {len(report.rows)} rows to {written[0]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kinemds", description="Anchorless kinematics from pairwise two-way ranging.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate noisy two-way ranging timestamps")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate range parameters and kinematics from a timestamp CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--timestamps", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("bounds", help="compute Cramer-Rao bounds for the configured scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("montecarlo", help="run a Monte-Carlo sweep and write results.csv")
    p.add_argument("--config")
    p.add_argument("--preset")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--plots", action="store_true", help="also write SVG charts")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_montecarlo)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"kinemds: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"kinemds: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
