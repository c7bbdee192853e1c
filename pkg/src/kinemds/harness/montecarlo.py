"""Monte-Carlo engine: simulate, estimate, score against truth and Cramer-Rao bounds."""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ..abs_kinematics import anchor_constraints, anchors_from_json, build_generalized_system, glls, min_anchors, wglls
from ..bounds import (
    absolute_ay,
    covariance_b,
    covariance_rho,
    crb_kinematics,
    crb_position,
    crb_range_iid,
    rcrb,
    relative_ay,
    weighting_matrix,
)
from ..errors import ConfigError
from ..gtwr import as_generator, generate_timestamps, measure_delays
from ..kernels import impl as _kernels
from ..linalg_core import centering_matrix, vec
from ..ranging import build_centered_grams, dynamic_ranging
from ..rel_kinematics import (
    build_lyapunov_system,
    build_measurement_matrix,
    centering_constraints,
    constraints_from_json,
    immobility_constraints,
    lls,
    lmds,
    reconstruct_relative_trajectory,
    stack_constraints,
    wlls,
)
from ..rel_position import mds_position, procrustes_align
from ..scenario import KinematicEnsemble, evaluate_trajectory, range_derivative_oracle, reexpand, relative_state
from .config import ExperimentConfig, build_scenario

__all__ = [
    "ExperimentReport",
    "PipelineEstimates",
    "ReportRow",
    "SweepPoint",
    "estimate_all",
    "point_bounds",
    "rmse",
    "run_monte_carlo",
    "setup_point",
    "trajectory_rmse_over_time",
    "trial_seed",
]

ESTIMATOR_ORDER = ("DR", "MDS", "LMDS", "LLS", "WLLS", "GLLS", "WGLLS")
RANGE_QUANTITIES = ("r", "rdot", "rddot")


@dataclass(frozen=True)
class ReportRow:
    sweep_value: object
    estimator: str
    quantity: str
    rmse: float
    rcrb_constrained: float
    rcrb_unconstrained: float
    trials: int


@dataclass(frozen=True)
class ExperimentReport:
    sweep_parameter: str | None
    rows: tuple
    wallclock: tuple = ()

    def lookup(self, estimator: str, quantity: str, sweep_value=None) -> ReportRow:
        for r in self.rows:
            if r.estimator == estimator and r.quantity == quantity and (sweep_value is None or r.sweep_value == sweep_value):
                return r
        raise KeyError((estimator, quantity, sweep_value))

    def select(self, estimator: str, quantity: str) -> list[ReportRow]:
        return [r for r in self.rows if r.estimator == estimator and r.quantity == quantity]


def rmse(estimates, truth, n_z: int | None = None) -> float:
    """``N_z^-1 sqrt(mean_i ||z_i - z||^2)``; ``N_z`` defaults to the vector length."""
    truth = np.asarray(truth, dtype=float).reshape(-1)
    estimates = [np.asarray(z, dtype=float).reshape(-1) for z in estimates]
    if not estimates:
        raise ConfigError("rmse needs at least one estimate")
    for z in estimates:
        if z.shape != truth.shape:
            raise ConfigError(f"estimate length {z.size} differs from truth length {truth.size}")
    n_z = truth.size if n_z is None else n_z
    sq = sum(float(np.sum((z - truth) ** 2)) for z in estimates)
    return math.sqrt(sq / len(estimates)) / n_z


def trial_seed(master_seed: int, sweep_index: int, trial_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(sweep_index, trial_index))


def _quantity_time(t: float) -> str:
    return f"S(t={t:g})"


@dataclass
class SweepPoint:
    """Everything shared by the trials of one sweep value."""

    value: object
    cfg: ExperimentConfig
    truth: KinematicEnsemble
    table: object
    params_true: object
    range_crb: object
    rel_constraints: tuple | None
    abs_constraints: dict
    n_z: int | None
    sigma_m: float

    @property
    def P(self) -> int:
        return self.truth.dims

    @property
    def N(self) -> int:
        return self.truth.nodes


def _default_anchors(truth: KinematicEnsemble, M: int, count: int) -> list:
    y = vec(truth.Y(M))
    return [(k, float(y[k])) for k in range(count)]


def _node_anchors(truth: KinematicEnsemble, M: int, n: int) -> list:
    y = vec(truth.Y(M))
    P = truth.dims
    return [(k, float(y[k])) for k in range(n * P)]


def setup_point(cfg: ExperimentConfig, value, base: KinematicEnsemble, table=None) -> SweepPoint:
    """Truth, nominal timestamps, constraint sets and range CRB for one sweep value.

    A given ``table`` (e.g. loaded from CSV) replaces the simulated exchange schedule.
    """
    r, est = cfg.ranging, cfg.estimation
    param = cfg.montecarlo.sweep_parameter
    K, sigma = r.K, r.sigma_m
    n_constraints = None
    if param == "K":
        K = int(value)
    elif param == "sigma_m":
        sigma = float(value)
    elif param == "n_constraints":
        n_constraints = int(value)
    if table is None:
        T0 = r.T0 if r.T0 is not None else 0.5 * (r.interval[0] + r.interval[1])
        table = generate_timestamps(base, K, r.interval, T0, r.c, r.delay_model, r.order_L)
    else:
        T0 = table.T0
        if table.n_nodes != base.nodes:
            raise ConfigError(f"timestamps cover {table.n_nodes} nodes, scenario has {base.nodes}")
    truth = reexpand(base, T0)
    P, N = truth.dims, truth.nodes
    L = max(r.order_L, est.lmds_order_L if "LMDS" in est.estimators else 0, 3)
    params_true = range_derivative_oracle(truth, L - 1)
    range_crb = crb_range_iid(table, sigma, r.order_L)

    rel_constraints = None
    abs_constraints = {}
    if n_constraints is not None:
        if n_constraints > N:
            raise ConfigError(f"n_constraints={n_constraints} exceeds N={N}")
        rel_constraints = immobility_constraints(list(range(n_constraints)), P, N)
        for M in range(1, est.max_order_M + 1):
            abs_constraints[M] = anchor_constraints(_node_anchors(truth, M, n_constraints), P, N)
    else:
        if est.constraints:
            rel_constraints = constraints_from_json(list(est.constraints), P, N)
        given = {}
        for doc in est.anchors:
            order, known = anchors_from_json(doc, P)
            given.setdefault(order, []).extend(known)
        count = est.n_anchor_entries or min_anchors(P)
        for M in range(1, est.max_order_M + 1):
            known = given.get(M) or _default_anchors(truth, M, count)
            abs_constraints[M] = anchor_constraints(known, P, N)
    n_z = cfg.report.rmse_normalization
    if n_z is None and n_constraints is not None:
        n_z = 1
    return SweepPoint(value, cfg, truth, table, params_true, range_crb, rel_constraints, abs_constraints, n_z, sigma)


def _relative_full_constraints(pt: SweepPoint):
    blocks = [pt.rel_constraints, centering_constraints(pt.P, pt.N)]
    return stack_constraints(*[b for b in blocks if b is not None])


_identity_warned = False


def _weight_or_identity(Sigma_rho: np.ndarray) -> np.ndarray:
    global _identity_warned
    W = weighting_matrix(Sigma_rho)
    if not np.any(W):
        if not _identity_warned:
            warnings.warn("residual covariance vanished; weighting with identity", RuntimeWarning, stacklevel=3)
            _identity_warned = True
        return np.eye(Sigma_rho.shape[0])
    return W


def _family(pt: SweepPoint, params, grams, Xa, Sigma_x, absolute: bool):
    """Run the unweighted and (optionally) weighted solvers of one family over all orders.

    Returns ``{name: [Y_1, Y_2, ...]}`` with absolute or relative matrices.
    """
    est = pt.cfg.estimation
    base, weighted = ("GLLS", "WGLLS") if absolute else ("LLS", "WLLS")
    want_w = weighted in est.estimators
    N = pt.N
    Pc = centering_matrix(N)
    out = {base: [], weighted: []} if want_w else {base: []}
    sigma_xdot = None
    for M in range(1, est.max_order_M + 1):
        for name in out:
            lower_rel = [y @ Pc for y in out[name]] if absolute else list(out[name])
            B_M = build_measurement_matrix(M, grams, lower_rel)
            if absolute:
                system = build_generalized_system(Xa, B_M, pt.abs_constraints[M])
            else:
                system = build_lyapunov_system(Xa, B_M, pt.rel_constraints)
            if name == base:
                out[name].append((glls if absolute else lls)(system).Y_hat)
                continue
            Y_base = out[base][M - 1]
            A_y = absolute_ay(Y_base) if absolute else relative_ay(Y_base)
            if M == 1:
                S_b = covariance_b(1, params, pt.range_crb)
            else:
                Y1 = out[name][0]
                A_y1 = absolute_ay(Y1) if absolute else relative_ay(Y1)
                S_b = covariance_b(2, params, pt.range_crb, A_y1, sigma_xdot)
            S_rho = covariance_rho(A_y, Sigma_x, S_b)
            W = _weight_or_identity(S_rho)
            out[name].append((wglls if absolute else wlls)(system, W).Y_hat)
            if M == 1 and est.max_order_M > 1:
                if np.any(S_rho):
                    sigma_xdot = crb_kinematics(system.A, S_rho, (system.C, system.d)).constrained
                else:
                    sigma_xdot = np.zeros((system.A.shape[1],) * 2)
    return out


@dataclass(frozen=True)
class PipelineEstimates:
    """One pass of the estimation chain on a set of delay measurements."""

    params: object
    X_hat: np.ndarray | None
    kinematics: dict

    def trajectory(self, name: str, t: float, t0: float) -> np.ndarray:
        return reconstruct_relative_trajectory(self.X_hat, self.kinematics[name], t, t0)


def estimate_all(pt: SweepPoint, meas) -> PipelineEstimates:
    """Dynamic ranging, MDS aligned to the true relative frame, then every enabled kinematic solver."""
    r, est = pt.cfg.ranging, pt.cfg.estimation
    params = dynamic_ranging(meas, r.order_L)
    estimators = set(est.estimators)
    if not estimators:
        return PipelineEstimates(params, None, {})
    rel = relative_state(pt.truth)
    grams = build_centered_grams(params)
    X_hat = mds_position(grams.B0, pt.P).X_hat
    Xa, _ = procrustes_align(X_hat, rel.X_rel)
    kin = {}
    if "LMDS" in estimators:
        g = grams
        if grams.max_order < 2:
            g = build_centered_grams(dynamic_ranging(meas, est.lmds_order_L), 2)
        kin["LMDS"] = [lmds(g, Xa).Y_hat]
    weighted = {"WLLS", "WGLLS"} & estimators
    Sigma_x = crb_position(Xa, pt.range_crb.Sigma_r) if weighted else None
    for absolute in (False, True):
        if ("GLLS" if absolute else "LLS") in estimators:
            kin.update(_family(pt, params, grams, Xa, Sigma_x, absolute))
    return PipelineEstimates(params, Xa, kin)


def _run_trial(pt: SweepPoint, seed) -> dict:
    r, est = pt.cfg.ranging, pt.cfg.estimation
    meas = measure_delays(pt.table, pt.sigma_m, as_generator(seed), r.noise_mode)
    res = estimate_all(pt, meas)
    out = {}
    for m, q in enumerate(RANGE_QUANTITIES[: r.order_L]):
        out[("DR", q)] = res.params.vector(m) - pt.params_true.vector(m)
    if res.X_hat is None:
        return out
    rel = relative_state(pt.truth)
    out[("MDS", "X")] = vec(res.X_hat - rel.X_rel)
    for name, ys in res.kinematics.items():
        absolute = name in ("GLLS", "WGLLS")
        for M, Y in enumerate(ys, start=1):
            truth = pt.truth.Y(M) if absolute else rel.Y(M)
            out[(name, f"Y{M}")] = vec(Y - truth)
        if name == "LMDS":
            continue
        for t in est.trajectory_times:
            S_true = evaluate_trajectory(pt.truth, t)
            if absolute:
                # constant term is the centered position, motion stays absolute
                S_true = S_true - pt.truth.X.mean(axis=1, keepdims=True)
            else:
                S_true = S_true @ centering_matrix(pt.N)
            out[(name, _quantity_time(t))] = vec(res.trajectory(name, t, pt.truth.t0) - S_true)
    return out


def point_bounds(pt: SweepPoint) -> dict:
    """RCRBs from the true parameters: ``{(estimator, quantity): (constrained, unconstrained)}``."""
    cfg = pt.cfg
    est = cfg.estimation
    nan = float("nan")
    out = {}
    crb = pt.range_crb
    for m, q in enumerate(RANGE_QUANTITIES[: cfg.ranging.order_L]):
        v = rcrb(crb.block(m), pt.n_z)
        out[("DR", q)] = (v, v)
    estimators = set(est.estimators)
    if not estimators - {"DR"}:
        return out
    rel = relative_state(pt.truth)
    X = rel.X_rel
    zero = pt.sigma_m == 0.0
    Sigma_x = crb_position(X, crb.Sigma_r) if not zero else np.zeros((pt.N * pt.P,) * 2)
    out[("MDS", "X")] = (nan, rcrb(Sigma_x, pt.n_z))
    params = pt.params_true.truncated(3)

    def family(absolute):
        A = _kernels.generalized_lyapunov_matrix(X) if absolute else _kernels.lyapunov_matrix(X)
        res = {}
        sigma_xdot = None
        for M in range(1, est.max_order_M + 1):
            C = pt.abs_constraints[M] if absolute else _relative_full_constraints(pt)
            Y = pt.truth.Y(M) if absolute else rel.Y(M)
            A_y = absolute_ay(Y) if absolute else relative_ay(Y)
            if zero:
                res[M] = (0.0, 0.0)
                continue
            if M == 1:
                S_b = covariance_b(1, params, crb)
            else:
                Y1 = pt.truth.Y(1) if absolute else rel.Y(1)
                A_y1 = absolute_ay(Y1) if absolute else relative_ay(Y1)
                S_b = covariance_b(2, params, crb, A_y1, sigma_xdot)
            kc = crb_kinematics(A, covariance_rho(A_y, Sigma_x, S_b), C, M)
            if M == 1:
                sigma_xdot = kc.constrained
            res[M] = (rcrb(kc.constrained, pt.n_z), rcrb(kc.unconstrained, pt.n_z))
        return res

    if estimators & {"LLS", "WLLS", "LMDS"} and est.max_order_M >= 1:
        rb = family(False)
        for name in ("LLS", "WLLS"):
            for M, v in rb.items():
                out[(name, f"Y{M}")] = v
        out[("LMDS", "Y1")] = rb[1]
    if estimators & {"GLLS", "WGLLS"}:
        ab = family(True)
        for name in ("GLLS", "WGLLS"):
            for M, v in ab.items():
                out[(name, f"Y{M}")] = v
    return out


def _quantity_key(q: str):
    fixed = {"r": 0, "rdot": 1, "rddot": 2, "X": 3}
    if q in fixed:
        return (fixed[q], 0.0)
    if q.startswith("Y"):
        return (4, float(q[1:]))
    return (5, float(q[4:-1]))


def run_monte_carlo(cfg: ExperimentConfig, progress=None) -> ExperimentReport:
    """Run every sweep point; trials are merged in index order so output is schedule independent."""
    cfg.validate()
    base = build_scenario(cfg.scenario)
    rows = []
    clock = []
    n_trials = cfg.montecarlo.trials
    for s_idx, value in enumerate(cfg.sweep_points()):
        start = time.perf_counter()
        pt = setup_point(cfg, value, base)
        seeds = [trial_seed(cfg.montecarlo.master_seed, s_idx, k) for k in range(n_trials)]
        if cfg.montecarlo.workers > 1:
            with ThreadPoolExecutor(cfg.montecarlo.workers) as pool:
                results = list(pool.map(lambda sd: _run_trial(pt, sd), seeds))
        else:
            results = [_run_trial(pt, sd) for sd in seeds]
        sums = {}
        for res in results:
            for key, err in res.items():
                sums[key] = sums.get(key, 0.0) + float(np.dot(err, err))
        sizes = {key: err.size for key, err in results[0].items()}
        bounds = point_bounds(pt)
        keys = sorted(sums, key=lambda k: (ESTIMATOR_ORDER.index(k[0]), _quantity_key(k[1])))
        nan = float("nan")
        for key in keys:
            n_z = pt.n_z or sizes[key]
            value_rmse = math.sqrt(sums[key] / n_trials) / n_z
            c, u = bounds.get(key, (nan, nan))
            rows.append(ReportRow(value, key[0], key[1], value_rmse, c, u, n_trials))
        clock.append((value, time.perf_counter() - start))
        if progress is not None:
            progress(value)
    return ExperimentReport(cfg.montecarlo.sweep_parameter, tuple(rows), tuple(clock))


def trajectory_rmse_over_time(cfg: ExperimentConfig, times) -> list[ReportRow]:
    """Rows for ``S(t)`` at each requested time, for every enabled kinematic estimator."""
    est = replace(cfg.estimation, trajectory_times=tuple(float(t) for t in times))
    report = run_monte_carlo(replace(cfg, estimation=est))
    return [r for r in report.rows if r.quantity.startswith("S(t=")]
