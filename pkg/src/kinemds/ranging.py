"""Dynamic ranging: polynomial delay regression and double-centered derivative matrices."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg as sla

from .errors import ConfigError, DependencyError, DimensionError, IdentifiabilityError
from .gtwr import SPEED_OF_LIGHT, DelayMeasurements, TimestampTable
from .kernels import impl as _kernels
from .linalg_core import centering_matrix, numeric_rank
from .params import RangeParameterSet, n_links, nodes_from_links, pair_list

__all__ = [
    "CenteredGramSet",
    "RangeParameterSet",
    "build_centered_grams",
    "build_vandermonde",
    "dynamic_ranging",
    "estimate_theta",
    "estimate_theta_per_link",
    "gamma_vector",
    "load_range_parameters",
    "save_range_parameters",
    "theta_to_range_params",
]


def gamma_vector(L: int, c: float = SPEED_OF_LIGHT) -> np.ndarray:
    """``c [0!, 1!, ..., (L-1)!]``."""
    return c * np.array([math.factorial(m) for m in range(L)], dtype=float)


def _times_and_tau(source) -> tuple[TimestampTable, np.ndarray, np.ndarray]:
    if isinstance(source, DelayMeasurements):
        table, tau = source.table, source.tau_matrix
    elif isinstance(source, TimestampTable):
        table, tau = source, source.delays()
    else:
        raise ConfigError(f"expected TimestampTable or DelayMeasurements, got {type(source).__name__}")
    return table, table.transmit - table.T0, tau


def build_vandermonde(t, L: int) -> tuple[np.ndarray, np.ndarray]:
    """Stacked regression ``tau = V theta`` over all links.

    Columns are ordered by power first and link second, matching
    ``theta = [r_, rdot_, rddot_, ...]`` with each block of length ``N_bar``.
    """
    table, times, tau = _times_and_tau(t)
    n_bar, K = times.shape
    if K < L:
        raise IdentifiabilityError(f"K={K} exchanges cannot identify an order L={L} polynomial")
    V = np.zeros((n_bar * K, n_bar * L))
    rows = np.arange(n_bar * K)
    link = rows // K
    flat_t = times.reshape(-1)
    for l in range(L):
        V[rows, l * n_bar + link] = flat_t**l
    return V, tau.reshape(-1)


def _whiten(Sigma, n: int):
    """Return a function applying ``Sigma^{-1/2}`` (as a Cholesky factor solve)."""
    if Sigma is None or np.ndim(Sigma) == 0:
        return lambda a: a
    S = np.asarray(Sigma, dtype=float)
    if S.ndim == 1:
        if S.size != n or np.any(S <= 0):
            raise DimensionError("diagonal Sigma must be positive with one entry per delay")
        inv_sd = 1.0 / np.sqrt(S)
        return lambda a: (a.T * inv_sd).T
    if S.shape != (n, n):
        raise DimensionError(f"Sigma must be {n}x{n}, got {S.shape}")
    try:
        Lc = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise IdentifiabilityError("Sigma is not positive definite") from exc
    return lambda a: sla.solve_triangular(Lc, a, lower=True)


def estimate_theta(V: np.ndarray, tau_hat: np.ndarray, Sigma=None) -> np.ndarray:
    """Weighted least squares ``(V^T S^-1 V)^-1 V^T S^-1 tau``.

    ``Sigma`` may be ``None`` or a scalar (ordinary LS), a vector of
    variances, or a full covariance matrix.
    """
    V = np.asarray(V, dtype=float)
    tau_hat = np.asarray(tau_hat, dtype=float).reshape(-1)
    if V.shape[0] != tau_hat.size:
        raise DimensionError(f"V has {V.shape[0]} rows but tau has {tau_hat.size} entries")
    w = _whiten(Sigma, tau_hat.size)
    Vw, tw = w(V), w(tau_hat)
    if numeric_rank(Vw, 1e-12) < V.shape[1]:
        raise IdentifiabilityError("normal matrix V^T Sigma^-1 V is singular (degenerate time spacing)")
    Q, R = np.linalg.qr(Vw)
    return sla.solve_triangular(R, Q.T @ tw)


def estimate_theta_per_link(t, L: int, weights: np.ndarray | None = None) -> np.ndarray:
    """Same estimate as :func:`estimate_theta` for block-diagonal noise, solved link by link.

    ``weights`` are inverse variances of shape ``(N_bar, K)``; ``None`` means
    i.i.d. noise.
    """
    table, times, tau = _times_and_tau(t)
    if times.shape[1] < L:
        raise IdentifiabilityError(f"K={times.shape[1]} exchanges cannot identify an order L={L} polynomial")
    coeffs, bad = _kernels.polyfit_links(times, tau, int(L), weights)
    if bad >= 0:
        i, j = table.pairs[bad]
        raise IdentifiabilityError(f"singular normal matrix on link ({i + 1},{j + 1}); degenerate time spacing")
    return coeffs.T.reshape(-1)


def theta_to_range_params(theta: np.ndarray, L: int, c: float = SPEED_OF_LIGHT, n: int | None = None) -> RangeParameterSet:
    """Scale Taylor coefficients by ``gamma`` to get range, range rate, ..."""
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if theta.size % L:
        raise DimensionError(f"theta length {theta.size} is not a multiple of L={L}")
    n_bar = theta.size // L
    if n is None:
        n = nodes_from_links(n_bar)
    elif n_links(n) != n_bar:
        raise DimensionError(f"theta has {n_bar} links per order, N={n} needs {n_links(n)}")
    g = gamma_vector(L, c)
    blocks = theta.reshape(L, n_bar)
    return RangeParameterSet.from_vectors([g[m] * blocks[m] for m in range(L)], n)


def dynamic_ranging(t, L: int = 3, weights: np.ndarray | None = None) -> RangeParameterSet:
    """Timestamps or delay measurements straight to range parameters."""
    table = t.table if isinstance(t, DelayMeasurements) else t
    theta = estimate_theta_per_link(t, L, weights)
    return theta_to_range_params(theta, L, table.c, table.n_nodes)


@dataclass(frozen=True)
class CenteredGramSet:
    """Double-centered matrices ``B^(0), B^(1), ...`` of the squared-distance derivatives."""

    grams: tuple

    def gram(self, m: int) -> np.ndarray:
        if m >= len(self.grams):
            raise DependencyError(f"B^({m}) needs range derivatives up to order {m}")
        return self.grams[m]

    @property
    def B0(self) -> np.ndarray:
        return self.gram(0)

    @property
    def B1(self) -> np.ndarray:
        return self.gram(1)

    @property
    def B2(self) -> np.ndarray:
        return self.gram(2)

    @property
    def max_order(self) -> int:
        return len(self.grams) - 1


def build_centered_grams(p: RangeParameterSet, max_order: int | None = None) -> CenteredGramSet:
    """``B^(M) = -1/2 P [sum_k C(M,k) D^(k) o D^(M-k)] P`` for ``M = 0..max_order``.

    This gives ``-1/2 P R o R P``, ``-P (R o Rdot) P`` and
    ``-P (R o Rddot + Rdot o Rdot) P`` for the first three orders.
    """
    if max_order is None:
        max_order = p.order - 1
    if max_order >= p.order:
        raise DependencyError(f"B^({max_order}) needs range parameters of order L >= {max_order + 1}")
    Pc = centering_matrix(p.n_nodes)
    D = p.derivatives
    out = []
    for M in range(max_order + 1):
        S = sum(math.comb(M, k) * D[k] * D[M - k] for k in range(M + 1))
        B = -0.5 * Pc @ S @ Pc
        out.append(0.5 * (B + B.T))
    return CenteredGramSet(tuple(out))


_COLUMNS = ("r", "rdot", "rddot")


def save_range_parameters(p: RangeParameterSet, path) -> None:
    """CSV ``i,j,r,rdot,rddot`` with 1-based node indices; missing orders are ``nan``."""
    cols = [p.vector(m) if m < p.order else np.full(n_links(p.n_nodes), np.nan) for m in range(3)]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", *_COLUMNS])
        for q, (i, j) in enumerate(pair_list(p.n_nodes)):
            w.writerow([i + 1, j + 1, *(f"{c[q]:.17g}" for c in cols)])


def load_range_parameters(path) -> RangeParameterSet:
    try:
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        i = np.array([int(r["i"]) for r in rows]) - 1
        j = np.array([int(r["j"]) for r in rows]) - 1
        vals = np.array([[float(r[c]) for c in _COLUMNS] for r in rows])
    except (OSError, KeyError, ValueError) as exc:
        raise ConfigError(f"cannot read range parameters {path}: {exc}") from exc
    n = int(max(i.max(), j.max())) + 1
    order = int(np.sum(~np.all(np.isnan(vals), axis=0)))
    mats = []
    for m in range(order):
        R = np.zeros((n, n))
        R[i, j] = vals[:, m]
        R[j, i] = vals[:, m]
        mats.append(R)
    return RangeParameterSet(tuple(mats))
