"""Relative kinematics: measurement matrices, LMDS, and the constrained Lyapunov-like solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla

from .errors import (
    AmbiguityError,
    ConfigError,
    DependencyError,
    DimensionError,
    InsufficientConstraintError,
)
from .kernels import impl as _kernels
from .linalg_core import (
    ConstrainedLsProblem,
    commutation_matrix,
    numeric_rank,
    solve_kkt,
    unvec,
    vec,
)
from .ranging import CenteredGramSet
from .rel_position import embed_top_eigenpairs

__all__ = [
    "KinematicEstimate",
    "LyapunovSystem",
    "MeasurementMatrix",
    "build_lyapunov_system",
    "build_measurement_matrix",
    "centering_constraints",
    "constraints_from_json",
    "estimate_rotation",
    "immobility_constraints",
    "lls",
    "lmds",
    "lmds_velocity",
    "reconstruct_relative_trajectory",
    "stack_constraints",
    "wlls",
]


@dataclass(frozen=True)
class MeasurementMatrix:
    order: int
    B: np.ndarray


@dataclass(frozen=True)
class KinematicEstimate:
    order: int
    Y_hat: np.ndarray
    multipliers: np.ndarray
    method: str


@dataclass(frozen=True)
class LyapunovSystem:
    """``A y = b`` with ``A = (I + J)(I kron X^T)`` plus equality constraints ``C y = d``."""

    A: np.ndarray
    b: np.ndarray
    C: np.ndarray
    d: np.ndarray
    X: np.ndarray
    order: int
    weight: np.ndarray | None = None

    def with_weight(self, weight: np.ndarray | None) -> "LyapunovSystem":
        return replace(self, weight=None if weight is None else np.asarray(weight, dtype=float))

    def problem(self) -> ConstrainedLsProblem:
        return ConstrainedLsProblem(self.A, self.b, self.C, self.d, self.weight)


def _as_matrix(y) -> np.ndarray:
    return y.Y_hat if isinstance(y, KinematicEstimate) else np.asarray(y, dtype=float)


def build_measurement_matrix(M: int, grams: CenteredGramSet, lower=()) -> MeasurementMatrix:
    """``B_M = B^(M) - sum_{m=1}^{M-1} C(M,m) Y_{M-m}^T Y_m`` from centered lower orders.

    ``lower[m-1]`` is the (estimated) centered kinematic matrix of order ``m``.
    """
    if M < 1:
        raise ConfigError("measurement matrices start at order 1")
    lower = [_as_matrix(y) for y in lower]
    if len(lower) < M - 1:
        raise DependencyError(f"B_{M} needs relative kinematics of orders 1..{M - 1}, got {len(lower)}")
    B = np.array(grams.gram(M), dtype=float)
    for m in range(1, M):
        B -= math.comb(M, m) * lower[M - m - 1].T @ lower[m - 1]
    return MeasurementMatrix(M, 0.5 * (B + B.T))


def lmds_velocity(B2_gram: np.ndarray, P: int) -> np.ndarray:
    """Relative velocity up to an orthogonal transform, from ``B^(2) / 2 = Y^T Y``."""
    Yt, _ = embed_top_eigenpairs(0.5 * np.asarray(B2_gram, dtype=float), P, "B^(2)/2")
    return Yt


def _skew_basis(P: int) -> list[np.ndarray]:
    out = []
    for a in range(P):
        for b in range(a + 1, P):
            G = np.zeros((P, P))
            G[a, b], G[b, a] = 1.0, -1.0
            out.append(G)
    return out


def estimate_rotation(
    B1_gram: np.ndarray, X_hat: np.ndarray, Ytilde1: np.ndarray, max_iter: int = 50, tol: float = 1e-14
) -> np.ndarray:
    """Orthogonal ``H`` minimizing ``||Phi vec(H) - vec(B^(1))||`` with ``Phi = (I + J)(Yt^T kron X^T)``.

    The unconstrained least-squares solution is projected onto the
    orthogonal group and then refined by Gauss-Newton steps
    ``H <- H expm(S)`` over skew-symmetric ``S``.

    Raises
    ------
    AmbiguityError
        If ``Phi`` does not have full column rank.
    """
    X_hat = np.asarray(X_hat, dtype=float)
    Yt = np.asarray(Ytilde1, dtype=float)
    P, N = X_hat.shape
    if Yt.shape != (P, N):
        raise DimensionError(f"velocity shape {Yt.shape} does not match positions {X_hat.shape}")
    J = commutation_matrix(N)
    K = np.kron(Yt.T, X_hat.T)
    Phi = K + J @ K
    if numeric_rank(Phi) < P * P:
        raise AmbiguityError("rotation is not identifiable: Phi is rank deficient")
    b = vec(B1_gram)
    h0, *_ = np.linalg.lstsq(Phi, b, rcond=None)
    U, _, Vt = np.linalg.svd(unvec(h0, P, P))
    H = U @ Vt
    gens = _skew_basis(P)
    for _ in range(max_iter):
        if not gens:
            break
        r = Phi @ vec(H) - b
        Jac = np.column_stack([Phi @ vec(H @ G) for G in gens])
        step, *_ = np.linalg.lstsq(Jac, -r, rcond=None)
        H = H @ sla.expm(sum(s * G for s, G in zip(step, gens)))
        if np.linalg.norm(step) < tol:
            break
    # re-orthonormalize against accumulated round-off
    U, _, Vt = np.linalg.svd(H)
    return U @ Vt


def lmds(grams: CenteredGramSet, X_hat: np.ndarray) -> KinematicEstimate:
    """Constant-velocity relative velocity: eigen-embedding of ``B^(2)`` plus rotation recovery."""
    P = np.asarray(X_hat).shape[0]
    Yt = lmds_velocity(grams.B2, P)
    H = estimate_rotation(grams.B1, X_hat, Yt)
    return KinematicEstimate(1, H @ Yt, np.zeros(0), "LMDS")


def immobility_constraints(nodes, P: int, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows forcing the kinematic columns of ``nodes`` (0-based) to equal the first one."""
    nodes = [int(n) for n in nodes]
    if len(nodes) < 2:
        raise InsufficientConstraintError("relative immobility needs at least two nodes")
    if len(set(nodes)) != len(nodes):
        raise ConfigError(f"repeated node in immobility set {nodes}")
    if min(nodes) < 0 or max(nodes) >= N:
        raise ConfigError(f"immobile node index out of range for N={N}: {nodes}")
    pivot = nodes[0]
    rows = []
    for n in nodes[1:]:
        block = np.zeros((P, N * P))
        block[:, pivot * P : (pivot + 1) * P] = np.eye(P)
        block[:, n * P : (n + 1) * P] = -np.eye(P)
        rows.append(block)
    C = np.vstack(rows)
    return C, np.zeros(C.shape[0])


def centering_constraints(P: int, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Rows forcing ``Y 1 = 0``."""
    return np.kron(np.ones((1, N)), np.eye(P)), np.zeros(P)


def stack_constraints(*blocks) -> tuple[np.ndarray, np.ndarray]:
    blocks = [b for b in blocks if b is not None]
    if not blocks:
        raise ConfigError("no constraint blocks to stack")
    return np.vstack([b[0] for b in blocks]), np.concatenate([b[1] for b in blocks])


def build_lyapunov_system(
    X_hat: np.ndarray,
    B_M: MeasurementMatrix,
    constraints: tuple[np.ndarray, np.ndarray] | None = None,
    center: bool = True,
) -> LyapunovSystem:
    """Vectorized ``X^T Y + Y^T X = B_M``.

    ``center`` appends ``Y 1 = 0`` to the user constraints. The relative
    solution is centered by definition, and the weighted problem has no
    information along translations, so this row block keeps it well posed.
    """
    X_hat = np.asarray(X_hat, dtype=float)
    P, N = X_hat.shape
    B = np.asarray(B_M.B, dtype=float)
    if B.shape != (N, N):
        raise DimensionError(f"B_M is {B.shape}, expected {N}x{N}")
    A = _kernels.lyapunov_matrix(X_hat)
    blocks = [constraints, centering_constraints(P, N) if center else None]
    blocks = [b for b in blocks if b is not None]
    if blocks:
        C, d = stack_constraints(*blocks)
    else:
        C, d = np.zeros((0, N * P)), np.zeros(0)
    if C.shape[1] != N * P:
        raise DimensionError(f"constraints have {C.shape[1]} columns, expected {N * P}")
    return LyapunovSystem(A, vec(B).copy(), C, d, X_hat, B_M.order)


def _solve(system, method: str) -> KinematicEstimate:
    y, lam = solve_kkt(system.problem())
    P, N = system.X.shape
    return KinematicEstimate(system.order, unvec(y, P, N), lam, method)


def lls(system: LyapunovSystem) -> KinematicEstimate:
    """Constrained least squares ignoring any stored weight."""
    return _solve(system.with_weight(None), "LLS")


def wlls(system: LyapunovSystem, weight: np.ndarray | None = None) -> KinematicEstimate:
    """Weighted constrained least squares; ``weight`` overrides the stored one."""
    if weight is not None:
        system = system.with_weight(weight)
    if system.weight is None:
        raise DependencyError("WLLS needs a weighting matrix")
    return _solve(system, "WLLS")


def reconstruct_relative_trajectory(X_hat: np.ndarray, estimates, t: float, t0: float = 0.0) -> np.ndarray:
    """``X + sum_m Y_m (t - t0)^m / m!`` with ``estimates`` ordered by order."""
    S = np.array(X_hat, dtype=float)
    dt = float(t) - t0
    for m, y in enumerate(estimates, start=1):
        S = S + _as_matrix(y) * (dt**m / math.factorial(m))
    return S


def constraints_from_json(doc, P: int, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Parse ``{"type": "immobile", "nodes": [1, 2]}`` (1-based) or a list of such entries."""
    docs = doc if isinstance(doc, list) else [doc]
    blocks = []
    for item in docs:
        if not isinstance(item, dict) or item.get("type") != "immobile":
            raise ConfigError(f"unsupported relative constraint {item!r}")
        try:
            nodes = [int(n) - 1 for n in item["nodes"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"malformed immobility constraint {item!r}") from exc
        blocks.append(immobility_constraints(nodes, P, N))
    return stack_constraints(*blocks)
