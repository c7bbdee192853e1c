"""Ground-truth node kinematics, trajectories, EDMs and range-derivative oracles."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError, ParameterError, SingularGeometryError
from .linalg_core import centering_matrix
from .params import RangeParameterSet, pair_indices

__all__ = [
    "Edm",
    "KinematicEnsemble",
    "RelativeState",
    "edm_at",
    "ensemble_from_dict",
    "ensemble_to_dict",
    "evaluate_trajectory",
    "finite_difference_range_derivatives",
    "load_scenario",
    "paper_scenario",
    "range_derivative_oracle",
    "reexpand",
    "relative_state",
    "save_scenario",
]


@dataclass(frozen=True)
class KinematicEnsemble:
    """Positions ``X`` (P x N) and derivatives ``Y_1 .. Y_M`` at time ``t0``."""

    X: np.ndarray
    derivatives: tuple = ()
    t0: float = 0.0

    def __post_init__(self):
        X = np.array(self.X, dtype=float, ndmin=2)
        P, N = X.shape
        if N <= P:
            raise DimensionError(f"need more nodes than dimensions, got P={P}, N={N}")
        ys = tuple(np.array(y, dtype=float, ndmin=2) for y in self.derivatives)
        for m, y in enumerate(ys, start=1):
            if y.shape != X.shape:
                raise DimensionError(f"Y_{m} has shape {y.shape}, expected {X.shape}")
        if not np.all(np.isfinite(X)) or not all(np.all(np.isfinite(y)) for y in ys):
            raise ParameterError("kinematic matrices must be finite")
        if not math.isfinite(self.t0):
            raise ParameterError("t0 must be finite")
        X.setflags(write=False)
        for y in ys:
            y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "derivatives", ys)
        object.__setattr__(self, "t0", float(self.t0))

    @property
    def dims(self) -> int:
        return self.X.shape[0]

    @property
    def nodes(self) -> int:
        return self.X.shape[1]

    @property
    def max_order(self) -> int:
        return len(self.derivatives)

    def Y(self, m: int) -> np.ndarray:
        """Derivative of order ``m`` (zero beyond the stored orders)."""
        if m == 0:
            return self.X
        if m <= self.max_order:
            return self.derivatives[m - 1]
        return np.zeros_like(self.X)

    def with_derivatives(self, derivatives) -> "KinematicEnsemble":
        return KinematicEnsemble(self.X, tuple(derivatives), self.t0)


@dataclass(frozen=True)
class RelativeState:
    """Centered counterparts ``X P`` and ``Y_m P``."""

    X_rel: np.ndarray
    derivatives_rel: tuple

    def Y(self, m: int) -> np.ndarray:
        if m == 0:
            return self.X_rel
        if m <= len(self.derivatives_rel):
            return self.derivatives_rel[m - 1]
        return np.zeros_like(self.X_rel)


@dataclass(frozen=True)
class Edm:
    """Euclidean distance matrix."""

    D: np.ndarray

    def pairs(self) -> np.ndarray:
        i, j = pair_indices(self.D.shape[0])
        return self.D[i, j]


def evaluate_trajectory(e: KinematicEnsemble, t: float) -> np.ndarray:
    """Position matrix ``S(t) = X + sum_m Y_m (t - t0)^m / m!``."""
    dt = float(t) - e.t0
    S = e.X.copy()
    for m, y in enumerate(e.derivatives, start=1):
        S += y * (dt**m / math.factorial(m))
    return S


def reexpand(e: KinematicEnsemble, t: float) -> KinematicEnsemble:
    """Same motion with the Taylor expansion point moved to ``t``."""
    dt = float(t) - e.t0
    M = e.max_order
    ys = []
    for m in range(M + 1):
        y = sum(e.Y(k) * (dt ** (k - m) / math.factorial(k - m)) for k in range(m, M + 1))
        ys.append(np.asarray(y, dtype=float))
    return KinematicEnsemble(ys[0], tuple(ys[1:]), float(t))


def relative_state(e: KinematicEnsemble) -> RelativeState:
    Pc = centering_matrix(e.nodes)
    return RelativeState(e.X @ Pc, tuple(y @ Pc for y in e.derivatives))


def _edm(S: np.ndarray) -> np.ndarray:
    diff = S[:, :, None] - S[:, None, :]
    return np.sqrt(np.einsum("pij,pij->ij", diff, diff))


def edm_at(e: KinematicEnsemble, t: float) -> Edm:
    return Edm(_edm(evaluate_trajectory(e, t)))


def _pair_difference_derivatives(e: KinematicEnsemble, order: int) -> list[np.ndarray]:
    """``delta_m = y_i - y_j`` for every link, each of shape (P, N_bar)."""
    i, j = pair_indices(e.nodes)
    return [e.Y(m)[:, i] - e.Y(m)[:, j] for m in range(order + 1)]


def range_derivative_oracle(e: KinematicEnsemble, order: int = 2) -> RangeParameterSet:
    """Exact distance derivatives of orders ``0..order`` at ``t0``.

    Differentiating ``d^2 = |delta|^2`` repeatedly gives the recursion
    ``2 d d^(n) = f^(n) - sum_{k=1}^{n-1} C(n,k) d^(k) d^(n-k)`` with
    ``f^(n) = sum_k C(n,k) delta_k . delta_{n-k}``. For ``n <= 2`` this is
    the familiar ``rdot = delta.deltadot / r`` and
    ``rddot = (|deltadot|^2 + delta.deltaddot - rdot^2) / r``.

    Raises
    ------
    SingularGeometryError
        If two nodes coincide at ``t0``.
    """
    if order < 0:
        raise ParameterError("order must be non-negative")
    deltas = _pair_difference_derivatives(e, order)
    r = np.sqrt(np.sum(deltas[0] ** 2, axis=0))
    if np.any(r <= 0.0):
        raise SingularGeometryError("coincident nodes at t0; range derivatives are undefined")
    d = [r]
    for n in range(1, order + 1):
        f_n = sum(math.comb(n, k) * np.sum(deltas[k] * deltas[n - k], axis=0) for k in range(n + 1))
        cross = sum((math.comb(n, k) * d[k] * d[n - k] for k in range(1, n)), np.zeros_like(r))
        d.append((f_n - cross) / (2.0 * r))
    return RangeParameterSet.from_vectors(d, e.nodes)


def finite_difference_range_derivatives(
    e: KinematicEnsemble, order: int = 2, steps: tuple[float, ...] = (1e-4, 1e-2)
) -> RangeParameterSet:
    """Independent oracle: 5-point central differences of ``d_ij(t)`` with Richardson.

    ``steps[m-1]`` is the base step for derivative order ``m``; the second
    derivative needs a larger step because round-off grows as ``h^-2``.
    """
    if order > 2:
        raise ParameterError("finite-difference oracle supports order <= 2")
    i, j = pair_indices(e.nodes)

    def d(t):
        S = evaluate_trajectory(e, t)
        return np.sqrt(np.sum((S[:, i] - S[:, j]) ** 2, axis=0))

    t0 = e.t0

    def first(h):
        return (-d(t0 + 2 * h) + 8 * d(t0 + h) - 8 * d(t0 - h) + d(t0 - 2 * h)) / (12 * h)

    def second(h):
        return (
            -d(t0 + 2 * h) + 16 * d(t0 + h) - 30 * d(t0) + 16 * d(t0 - h) - d(t0 - 2 * h)
        ) / (12 * h * h)

    out = [d(t0)]
    for m, stencil in zip(range(1, order + 1), (first, second)):
        h = steps[m - 1]
        out.append((16.0 * stencil(h / 2) - stencil(h)) / 15.0)
    return RangeParameterSet.from_vectors(out, e.nodes)


_PAPER_X = [
    [-244, 385, 81, -19, -792, -554, -965, -985, -49, -503],
    [-588, -456, -992, -730, 879, 970, 155, 318, -858, 419],
]
_PAPER_Y1 = [
    [-5, -5, -6, 6, -1, 2, 1, -5, 9, -5],
    [-8, -8, -7, -9, -3, -2, -2, -10, 2, -1],
]
_PAPER_Y2 = [
    [-0.17, -0.17, 0.22, -0.07, 0.21, -0.15, 0.55, -0.72, -0.49, -0.34],
    [0.42, 0.42, 0.98, 0.73, 0.48, 0.08, -0.43, -0.14, 0.56, 0.91],
]


def paper_scenario() -> KinematicEnsemble:
    """Reference network: N=10 nodes in 2-D, t0=0, nodes 1 and 2 share their motion."""
    return KinematicEnsemble(np.array(_PAPER_X, float), (np.array(_PAPER_Y1, float), np.array(_PAPER_Y2, float)), 0.0)


def ensemble_to_dict(e: KinematicEnsemble) -> dict:
    return {
        "dims": e.dims,
        "nodes": e.nodes,
        "t0": e.t0,
        "X": e.X.tolist(),
        "Y": [y.tolist() for y in e.derivatives],
    }


def ensemble_from_dict(doc: dict) -> KinematicEnsemble:
    try:
        X = np.asarray(doc["X"], dtype=float)
        Y = tuple(np.asarray(y, dtype=float) for y in doc.get("Y", []))
        t0 = float(doc.get("t0", 0.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed scenario document: {exc}") from exc
    if X.ndim != 2:
        raise ConfigError("scenario X must be a 2-D array (rows = coordinates, columns = nodes)")
    if "dims" in doc and int(doc["dims"]) != X.shape[0]:
        raise ConfigError(f"dims={doc['dims']} disagrees with X rows ({X.shape[0]})")
    if "nodes" in doc and int(doc["nodes"]) != X.shape[1]:
        raise ConfigError(f"nodes={doc['nodes']} disagrees with X columns ({X.shape[1]})")
    return KinematicEnsemble(X, Y, t0)


def load_scenario(path) -> KinematicEnsemble:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return ensemble_from_dict(doc)


def save_scenario(e: KinematicEnsemble, path) -> None:
    Path(path).write_text(json.dumps(ensemble_to_dict(e), indent=2) + "\n")
