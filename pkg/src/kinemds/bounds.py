"""Cramer-Rao bounds and BLUE weighting matrices.

Covariances of pair-indexed quantities (length ``N_bar``) are lifted to the
``N^2`` vec layout by duplicating each link into entries ``(i, j)`` and
``(j, i)`` with full correlation; diagonal entries carry zero variance.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionError,
    IdentifiabilityError,
    InsufficientConstraintError,
    NotSupportedError,
    SingularGeometryError,
)
from .gtwr import SPEED_OF_LIGHT, TimestampTable
from .kernels import impl as _kernels
from .linalg_core import (
    DEFAULT_RCOND,
    centering_matrix,
    clip_psd,
    nullspace,
    numeric_rank,
    pseudo_inverse,
    vec,
)
from .params import RangeParameterSet, n_links, pair_indices
from .ranging import _whiten, gamma_vector

__all__ = [
    "KinematicCrb",
    "RangeCrb",
    "absolute_ay",
    "covariance_b",
    "covariance_rho",
    "crb_kinematics",
    "crb_position",
    "crb_range",
    "crb_range_iid",
    "distance_jacobian",
    "fim_position",
    "lift_matrix",
    "rcrb",
    "relative_ay",
    "save_bounds",
    "weighting_matrix",
]


@dataclass(frozen=True)
class RangeCrb:
    """Bound on ``[r; rdot; rddot; ...]`` (each block ``N_bar`` long)."""

    full: np.ndarray
    n_links: int

    @property
    def order(self) -> int:
        return self.full.shape[0] // self.n_links

    def block(self, m: int, k: int | None = None) -> np.ndarray:
        k = m if k is None else k
        nb = self.n_links
        if max(m, k) >= self.order:
            raise IdentifiabilityError(f"range CRB has order {self.order}; block {m} unavailable")
        return self.full[m * nb : (m + 1) * nb, k * nb : (k + 1) * nb]

    @property
    def Sigma_r(self) -> np.ndarray:
        return self.block(0)

    @property
    def Sigma_rdot(self) -> np.ndarray:
        return self.block(1)

    @property
    def Sigma_rddot(self) -> np.ndarray:
        return self.block(2)


@dataclass(frozen=True)
class KinematicCrb:
    order: int
    fim: np.ndarray
    unconstrained: np.ndarray
    constrained: np.ndarray | None = field(default=None)


def crb_range(V: np.ndarray, Sigma, L: int, c: float = SPEED_OF_LIGHT) -> RangeCrb:
    """``Gamma (V^T Sigma^-1 V)^-1 Gamma`` with ``Gamma = diag(gamma) kron I``."""
    V = np.asarray(V, dtype=float)
    if V.shape[1] % L:
        raise DimensionError(f"V has {V.shape[1]} columns, not a multiple of L={L}")
    nb = V.shape[1] // L
    Vw = _whiten(Sigma, V.shape[0])(V)
    if Sigma is not None and np.ndim(Sigma) == 0:
        Vw = Vw / math.sqrt(float(Sigma))
    if numeric_rank(Vw, 1e-12) < V.shape[1]:
        raise IdentifiabilityError("V^T Sigma^-1 V is singular")
    cov = np.linalg.inv(Vw.T @ Vw)
    g = np.repeat(gamma_vector(L, c), nb)
    return RangeCrb(g[:, None] * cov * g[None, :], nb)


def crb_range_iid(table: TimestampTable, sigma_m: float, L: int) -> RangeCrb:
    """Same bound for i.i.d. delay noise of ``sigma_m`` meters, assembled link by link."""
    times = table.transmit - table.T0
    nb, K = times.shape
    if K < L:
        raise IdentifiabilityError(f"K={K} exchanges cannot identify order L={L}")
    var = (sigma_m / table.c) ** 2
    g = gamma_vector(L, table.c)
    full = np.zeros((nb * L, nb * L))
    powers = times[:, :, None] ** np.arange(L)
    G = np.einsum("lka,lkb->lab", powers, powers)
    for l in range(nb):
        try:
            inv = np.linalg.inv(G[l])
        except np.linalg.LinAlgError as exc:
            raise IdentifiabilityError(f"singular normal matrix on link {l}") from exc
        idx = np.arange(L) * nb + l
        full[np.ix_(idx, idx)] = var * g[:, None] * inv * g[None, :]
    return RangeCrb(full, nb)


def distance_jacobian(X: np.ndarray) -> np.ndarray:
    """Jacobian of pair-major distances with respect to ``vec(X)`` (``N_bar x NP``)."""
    X = np.asarray(X, dtype=float)
    P, N = X.shape
    i, j = pair_indices(N)
    diff = X[:, i] - X[:, j]
    r = np.sqrt(np.sum(diff**2, axis=0))
    if np.any(r <= 0):
        raise SingularGeometryError("coincident nodes make the distance Jacobian undefined")
    u = (diff / r).T
    Jx = np.zeros((i.size, N * P))
    rows = np.arange(i.size)
    for p in range(P):
        Jx[rows, i * P + p] = u[:, p]
        Jx[rows, j * P + p] = -u[:, p]
    return Jx


def fim_position(X: np.ndarray, Sigma_r: np.ndarray) -> np.ndarray:
    """``J_x^T Sigma_r^-1 J_x`` for range-only measurements."""
    Jx = distance_jacobian(X)
    Sr = np.asarray(Sigma_r, dtype=float)
    if Sr.shape != (Jx.shape[0], Jx.shape[0]):
        raise DimensionError(f"Sigma_r must be {Jx.shape[0]}x{Jx.shape[0]}, got {Sr.shape}")
    F = Jx.T @ pseudo_inverse(Sr, hermitian=True) @ Jx
    return 0.5 * (F + F.T)


def crb_position(X: np.ndarray, Sigma_r: np.ndarray) -> np.ndarray:
    """Oracle bound on the relative position (pseudo-inverse of the singular FIM)."""
    return clip_psd(pseudo_inverse(fim_position(X, Sigma_r), hermitian=True))


def lift_matrix(N: int) -> np.ndarray:
    """``N^2 x N_bar`` map placing link ``(i, j)`` at vec positions ``(i, j)`` and ``(j, i)``."""
    i, j = pair_indices(N)
    Lm = np.zeros((N * N, n_links(N)))
    cols = np.arange(i.size)
    Lm[i + j * N, cols] = 1.0
    Lm[j + i * N, cols] = 1.0
    return Lm


def covariance_b(
    M: int,
    params: RangeParameterSet,
    crb: RangeCrb,
    A_y1: np.ndarray | None = None,
    Sigma_xdot: np.ndarray | None = None,
) -> np.ndarray:
    """First-order covariance of ``vec(B_M)`` for ``M`` in {1, 2}.

    The order-2 expression adds ``4 A_y1 Sigma_xdot A_y1^T`` for the
    plugged-in velocity when both are given. Cross-covariances between
    different range-parameter orders are neglected.
    """
    if M not in (1, 2):
        raise NotSupportedError(f"Sigma_b is only available for M in (1, 2), got {M}")
    N = params.n_nodes
    Lm = lift_matrix(N)
    Pt = np.kron(centering_matrix(N), centering_matrix(N))

    def sandwich(psi_mat, m):
        s = vec(psi_mat)
        return s[:, None] * (Lm @ crb.block(m) @ Lm.T) * s[None, :]

    if M == 1:
        inner = sandwich(params.R, 1) + sandwich(params.Rdot, 0)
    else:
        inner = sandwich(params.R, 2) + sandwich(params.Rddot, 0) + 4.0 * sandwich(params.Rdot, 1)
    S = Pt @ inner @ Pt
    if M == 2 and A_y1 is not None and Sigma_xdot is not None:
        S = S + 4.0 * A_y1 @ Sigma_xdot @ A_y1.T
    return clip_psd(S)


def relative_ay(Y_rel: np.ndarray) -> np.ndarray:
    """``(I + J)(I kron Y^T)``: sensitivity of the relative residual to position errors."""
    return _kernels.lyapunov_matrix(np.asarray(Y_rel, dtype=float))


def absolute_ay(Y: np.ndarray) -> np.ndarray:
    """``(I + J)(P kron (Y P)^T)``: doubly-centered sensitivity for the absolute system."""
    Y = np.asarray(Y, dtype=float)
    return _kernels.generalized_lyapunov_matrix(Y @ centering_matrix(Y.shape[1]))


def covariance_rho(A_y: np.ndarray, Sigma_x: np.ndarray, Sigma_b: np.ndarray) -> np.ndarray:
    """``A_y Sigma_x A_y^T + Sigma_b``, clipped to PSD."""
    return clip_psd(A_y @ Sigma_x @ A_y.T + Sigma_b)


def weighting_matrix(Sigma_rho: np.ndarray, tol: float = DEFAULT_RCOND) -> np.ndarray:
    """``Sigma_rho^+``; zero when the covariance vanishes."""
    W = pseudo_inverse(Sigma_rho, tol, hermitian=True)
    return 0.5 * (W + W.T)


def crb_kinematics(
    A: np.ndarray,
    Sigma_rho: np.ndarray,
    constraints: tuple[np.ndarray, np.ndarray] | None = None,
    order: int = 0,
    tol: float = DEFAULT_RCOND,
) -> KinematicCrb:
    """FIM ``A^T Sigma_rho^+ A``, its pseudo-inverse, and the constrained bound.

    Raises
    ------
    InsufficientConstraintError
        If the constraints leave a direction without information.
    """
    F = A.T @ weighting_matrix(Sigma_rho, tol) @ A
    F = 0.5 * (F + F.T)
    n = F.shape[0]
    if not np.any(F):
        zero = np.zeros((n, n))
        return KinematicCrb(order, F, zero, None if constraints is None else zero)
    unconstrained = clip_psd(pseudo_inverse(F, tol, hermitian=True))
    constrained = None
    if constraints is not None:
        U = nullspace(constraints[0])
        G = U.T @ F @ U
        if numeric_rank(G, 1e-9) < G.shape[0]:
            raise InsufficientConstraintError("constraints do not resolve the FIM rank deficiency")
        constrained = clip_psd(U @ np.linalg.solve(G, U.T))
    return KinematicCrb(order, F, unconstrained, constrained)


def rcrb(cov: np.ndarray, n_z: int | None = None) -> float:
    """``sqrt(trace(cov)) / N_z`` with ``N_z`` defaulting to the dimension."""
    n_z = cov.shape[0] if n_z is None else n_z
    return math.sqrt(max(float(np.trace(cov)), 0.0)) / n_z


def save_bounds(rows, path) -> None:
    """Write ``quantity,order,bound_type,value`` rows."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["quantity", "order", "bound_type", "value"])
        for q, m, kind, v in rows:
            w.writerow([q, m, kind, f"{v:.17g}"])
