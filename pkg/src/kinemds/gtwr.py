"""Generalized two-way ranging: timestamp exchanges and noisy propagation delays."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError, ParameterError
from .params import n_links, nodes_from_links, pair_indices, pair_list
from .scenario import KinematicEnsemble, evaluate_trajectory, range_derivative_oracle

SPEED_OF_LIGHT = 3e8

__all__ = [
    "SPEED_OF_LIGHT",
    "DelayMeasurements",
    "TimestampTable",
    "as_generator",
    "generate_timestamps",
    "load_timestamps",
    "measure_delays",
    "save_timestamps",
]


@dataclass(frozen=True)
class TimestampTable:
    """Per-link transmit/receive markers for ``K`` exchanges.

    ``transmit`` and ``receive`` have shape ``(N_bar, K)`` in pair-major
    link order. ``flight_times``, when present, holds the exact simulated
    delays so that noiseless runs do not lose digits to the subtraction
    ``receive - transmit``.
    """

    n_nodes: int
    transmit: np.ndarray
    receive: np.ndarray
    T0: float = 0.0
    c: float = SPEED_OF_LIGHT
    flight_times: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        tx = np.array(self.transmit, dtype=float, ndmin=2)
        rx = np.array(self.receive, dtype=float, ndmin=2)
        if tx.shape != rx.shape:
            raise DimensionError(f"transmit {tx.shape} and receive {rx.shape} shapes differ")
        if tx.shape[0] != n_links(self.n_nodes):
            raise DimensionError(f"{tx.shape[0]} links given, N={self.n_nodes} needs {n_links(self.n_nodes)}")
        if tx.shape[1] < 1:
            raise ParameterError("K must be >= 1")
        if tx.shape[1] > 1 and np.any(np.diff(tx, axis=1) <= 0):
            raise ParameterError("transmit times must be strictly increasing per link")
        if np.any(rx < tx):
            raise ParameterError("receive time precedes transmit time")
        if self.c <= 0:
            raise ParameterError("propagation speed must be positive")
        object.__setattr__(self, "transmit", tx)
        object.__setattr__(self, "receive", rx)
        if self.flight_times is not None:
            ft = np.asarray(self.flight_times, dtype=float)
            if ft.shape != tx.shape:
                raise DimensionError("flight_times must match the timestamp shape")
            object.__setattr__(self, "flight_times", ft)

    @property
    def K(self) -> int:
        return self.transmit.shape[1]

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return pair_list(self.n_nodes)

    def delays(self) -> np.ndarray:
        """True delays ``|receive - transmit|`` as an ``(N_bar, K)`` array."""
        if self.flight_times is not None:
            return self.flight_times
        return np.abs(self.receive - self.transmit)


@dataclass(frozen=True)
class DelayMeasurements:
    """Noisy delays stacked pair-major, exchange-minor.

    The noise is i.i.d. with variance ``noise_variance`` (s^2); the dense
    covariance is only built on request because it is ``N_bar K`` square.
    ``table`` holds the timestamps as observed (noisy in timestamp mode).
    """

    tau: np.ndarray
    noise_variance: float
    table: TimestampTable
    mode: str = "delay"

    @property
    def tau_matrix(self) -> np.ndarray:
        return self.tau.reshape(self.table.transmit.shape)

    @property
    def noise_covariance(self) -> np.ndarray:
        return self.noise_variance * np.eye(self.tau.size)


def as_generator(seed) -> np.random.Generator:
    """Counter-based (Philox) generator from an int, SeedSequence or Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def generate_timestamps(
    e: KinematicEnsemble,
    K: int,
    interval: tuple[float, float] = (-1.0, 1.0),
    T0: float | None = None,
    c: float = SPEED_OF_LIGHT,
    delay_model: str = "geometric",
    order_L: int = 3,
) -> TimestampTable:
    """Simulate ``K`` exchanges per link with linearly spaced transmit times.

    ``delay_model="geometric"`` uses the true distance at each transmit time.
    ``delay_model="polynomial"`` replaces it by its Taylor polynomial of
    degree ``order_L - 1`` around ``t0``, which the ranging model of order
    ``order_L`` represents exactly.
    """
    K = int(K)
    if K < 1:
        raise ParameterError("K must be >= 1")
    lo, hi = map(float, interval)
    if not lo < hi:
        raise ParameterError(f"interval start must be below its end, got {interval}")
    if T0 is None:
        T0 = 0.5 * (lo + hi)
    times = np.linspace(lo, hi, K) if K > 1 else np.array([0.5 * (lo + hi)])
    n_bar = n_links(e.nodes)
    i, j = pair_indices(e.nodes)
    if delay_model == "geometric":
        dist = np.empty((n_bar, K))
        for k, t in enumerate(times):
            S = evaluate_trajectory(e, t)
            dist[:, k] = np.sqrt(np.sum((S[:, i] - S[:, j]) ** 2, axis=0))
    elif delay_model == "polynomial":
        if order_L < 1:
            raise ParameterError("order_L must be >= 1")
        ders = range_derivative_oracle(e, order_L - 1)
        dt = times - e.t0
        dist = sum(
            np.outer(ders.vector(m), dt**m / math.factorial(m)) for m in range(order_L)
        )
    else:
        raise ConfigError(f"unknown delay model {delay_model!r}")
    flight = dist / c
    tx = np.tile(times, (n_bar, 1))
    return TimestampTable(e.nodes, tx, tx + flight, float(T0), float(c), flight)


def measure_delays(t: TimestampTable, sigma_m: float, seed=None, mode: str = "delay") -> DelayMeasurements:
    """Add Gaussian noise of ``sigma_m`` meters (``sigma_m / c`` seconds) to the delays.

    ``mode="timestamp"`` perturbs both markers of every exchange by
    independent noise of ``sigma_m / (c sqrt 2)`` seconds instead, so the
    delay noise has the same variance but the regression times are noisy
    as well.
    """
    sigma_m = float(sigma_m)
    if not sigma_m >= 0.0:
        raise ParameterError(f"sigma_m must be non-negative, got {sigma_m}")
    rng = as_generator(seed)
    sigma_t = sigma_m / t.c
    shape = t.transmit.shape
    if mode == "delay":
        tau = t.delays() + sigma_t * rng.standard_normal(shape)
        observed = t
    elif mode == "timestamp":
        s = sigma_t / math.sqrt(2.0)
        tx = t.transmit + s * rng.standard_normal(shape)
        rx = t.receive + s * rng.standard_normal(shape)
        tau = np.abs(rx - tx)
        if sigma_m == 0.0:
            tau = t.delays().copy()
        observed = TimestampTable(t.n_nodes, tx, rx, t.T0, t.c)
    else:
        raise ConfigError(f"unknown noise mode {mode!r}")
    return DelayMeasurements(tau.reshape(-1), sigma_t**2, observed, mode)


def _sidecar(path: Path) -> Path:
    return path.with_suffix(".json")


def save_timestamps(t: TimestampTable, path) -> None:
    """Write ``i,j,k,t_transmit,t_receive`` (1-based) plus a JSON sidecar with T0 and c."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "k", "t_transmit", "t_receive"])
        for p, (i, j) in enumerate(t.pairs):
            for k in range(t.K):
                w.writerow([i + 1, j + 1, k + 1, f"{t.transmit[p, k]:.17g}", f"{t.receive[p, k]:.17g}"])
    _sidecar(path).write_text(json.dumps({"T0": t.T0, "c": t.c, "nodes": t.n_nodes, "K": t.K}, indent=2) + "\n")


def load_timestamps(path) -> TimestampTable:
    path = Path(path)
    try:
        meta = json.loads(_sidecar(path).read_text()) if _sidecar(path).exists() else {}
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read timestamps {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path} contains no exchanges")
    try:
        recs = [(int(r["i"]) - 1, int(r["j"]) - 1, int(r["k"]) - 1, float(r["t_transmit"]), float(r["t_receive"])) for r in rows]
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed timestamp row in {path}: {exc}") from exc
    n = int(meta.get("nodes", 1 + max(max(r[0], r[1]) for r in recs)))
    K = 1 + max(r[2] for r in recs)
    index = {pair: p for p, pair in enumerate(pair_list(n))}
    tx = np.full((n_links(n), K), np.nan)
    rx = np.full((n_links(n), K), np.nan)
    for i, j, k, a, b in recs:
        key = (min(i, j), max(i, j))
        if key not in index or k < 0:
            raise ConfigError(f"invalid link/exchange ({i + 1},{j + 1},{k + 1}) in {path}")
        tx[index[key], k], rx[index[key], k] = a, b
    if np.isnan(tx).any():
        raise ConfigError(f"{path} does not cover every link for all K={K} exchanges")
    nodes_from_links(tx.shape[0])
    return TimestampTable(n, tx, rx, float(meta.get("T0", 0.0)), float(meta.get("c", SPEED_OF_LIGHT)))
