"""Absolute kinematics from the generalized Lyapunov-like system with anchor constraints."""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, DependencyError, DimensionError, InsufficientConstraintError
from .kernels import impl as _kernels
from .linalg_core import vec
from .rel_kinematics import (
    KinematicEstimate,
    LyapunovSystem,
    MeasurementMatrix,
    _solve,
    reconstruct_relative_trajectory,
)

__all__ = [
    "GeneralizedSystem",
    "anchor_constraints",
    "anchors_from_json",
    "build_generalized_system",
    "glls",
    "min_anchors",
    "reconstruct_absolute_trajectory",
    "wglls",
]


class GeneralizedSystem(LyapunovSystem):
    """``A y = b`` with ``A = (I + J)(P kron X^T)``; same fields as the relative system."""


def min_anchors(P: int) -> int:
    return P * (P + 1) // 2


def build_generalized_system(
    X_hat: np.ndarray, B_M: MeasurementMatrix, constraints: tuple[np.ndarray, np.ndarray] | None = None
) -> GeneralizedSystem:
    X_hat = np.asarray(X_hat, dtype=float)
    P, N = X_hat.shape
    B = np.asarray(B_M.B, dtype=float)
    if B.shape != (N, N):
        raise DimensionError(f"B_M is {B.shape}, expected {N}x{N}")
    A = _kernels.generalized_lyapunov_matrix(X_hat)
    if constraints is None:
        C, d = np.zeros((0, N * P)), np.zeros(0)
    else:
        C, d = (np.atleast_2d(np.asarray(constraints[0], dtype=float)), np.asarray(constraints[1], dtype=float))
        if C.shape[1] != N * P:
            raise DimensionError(f"constraints have {C.shape[1]} columns, expected {N * P}")
    return GeneralizedSystem(A, vec(B).copy(), C, d, X_hat, B_M.order)


def anchor_constraints(known, P: int, N: int) -> tuple[np.ndarray, np.ndarray]:
    """Selection rows for known entries ``(flat index into vec(Y), value)``.

    ``flat = coord + node * P`` with 0-based node and coordinate.
    """
    known = [(int(i), float(v)) for i, v in known]
    need = min_anchors(P)
    if len(known) < need:
        raise InsufficientConstraintError(f"{len(known)} anchors given, at least {need} required for P={P}")
    C = np.zeros((len(known), N * P))
    d = np.zeros(len(known))
    for r, (idx, val) in enumerate(known):
        if not 0 <= idx < N * P:
            raise ConfigError(f"anchor index {idx} outside 0..{N * P - 1}")
        C[r, idx] = 1.0
        d[r] = val
    return C, d


def anchors_from_json(doc, P: int) -> tuple[int, list[tuple[int, float]]]:
    """Parse ``{"type":"anchored","order":1,"entries":[{"node":1,"coord":1,"value":-5.0}]}``.

    Node and coordinate are 1-based. Returns ``(order, [(flat index, value), ...])``.
    """
    if not isinstance(doc, dict) or doc.get("type") != "anchored":
        raise ConfigError(f"unsupported anchor specification {doc!r}")
    try:
        order = int(doc["order"])
        known = [((int(e["coord"]) - 1) + (int(e["node"]) - 1) * P, float(e["value"])) for e in doc["entries"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed anchor specification: {exc}") from exc
    for e in doc["entries"]:
        if not 1 <= int(e["coord"]) <= P or int(e["node"]) < 1:
            raise ConfigError(f"anchor entry out of range: {e}")
    return order, known


def glls(system: GeneralizedSystem) -> KinematicEstimate:
    if system.C.shape[0] == 0:
        raise InsufficientConstraintError("GLLS needs anchor constraints")
    return _solve(system.with_weight(None), "GLLS")


def wglls(system: GeneralizedSystem, weight: np.ndarray | None = None) -> KinematicEstimate:
    if weight is not None:
        system = system.with_weight(weight)
    if system.weight is None:
        raise DependencyError("WGLLS needs a weighting matrix")
    if system.C.shape[0] == 0:
        raise InsufficientConstraintError("WGLLS needs anchor constraints")
    return _solve(system, "WGLLS")


def reconstruct_absolute_trajectory(X_hat: np.ndarray, estimates, t: float, t0: float = 0.0) -> np.ndarray:
    """``X + sum_m Y_m (t - t0)^m / m!`` with the relative position as the constant term."""
    return reconstruct_relative_trajectory(X_hat, estimates, t, t0)
