"""Classical MDS for the relative position and orthogonal Procrustes alignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError, DimensionError
from .linalg_core import symmetric_eig

__all__ = ["PositionEstimate", "embed_top_eigenpairs", "mds_position", "procrustes_align"]


@dataclass(frozen=True)
class PositionEstimate:
    X_hat: np.ndarray
    eigenvalues_used: np.ndarray
    residual: float


def embed_top_eigenpairs(G: np.ndarray, P: int, what: str = "Gram matrix") -> tuple[np.ndarray, np.ndarray]:
    """``Lambda^(1/2) V^T`` from the ``P`` largest eigenpairs of a symmetric matrix.

    Raises
    ------
    DegenerateGeometryError
        If fewer than ``P`` eigenvalues are positive.
    """
    G = np.asarray(G, dtype=float)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DimensionError(f"{what} must be square, got {G.shape}")
    if not 1 <= P < G.shape[0]:
        raise DimensionError(f"embedding dimension must satisfy 1 <= P < N, got P={P}, N={G.shape[0]}")
    w, V = symmetric_eig(G)
    scale = max(np.abs(w).max(), np.finfo(float).tiny)
    positive = w > 1e-12 * scale
    if np.count_nonzero(positive[:P]) < P or w[0] <= 0:
        raise DegenerateGeometryError(
            f"{what} has {int(np.count_nonzero(w > 1e-12 * scale))} positive eigenvalues, {P} required"
        )
    lam = w[:P]
    return np.sqrt(lam)[:, None] * V[:, :P].T, lam


def mds_position(B0: np.ndarray, P: int) -> PositionEstimate:
    """Relative positions ``Lambda^(1/2) V^T`` from the top-``P`` eigenpairs of ``B0``.

    Examples
    --------
    >>> X = np.array([[1.0, -1.0, 0.0], [0.0, 0.0, 0.0]])
    >>> est = mds_position(X.T @ X, 1)
    >>> np.round(np.abs(est.X_hat), 6).tolist()
    [[1.0, 1.0, 0.0]]
    """
    X_hat, lam = embed_top_eigenpairs(B0, P, "B0")
    residual = float(np.linalg.norm(np.asarray(B0) - X_hat.T @ X_hat))
    return PositionEstimate(X_hat, lam, residual)


def procrustes_align(estimate: np.ndarray, reference: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Orthogonal ``Q`` (reflections allowed) minimizing ``||Q estimate - reference||_F``."""
    estimate = np.asarray(estimate, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if estimate.shape != reference.shape:
        raise DimensionError(f"shapes differ: {estimate.shape} vs {reference.shape}")
    U, _, Vt = np.linalg.svd(reference @ estimate.T)
    Q = U @ Vt
    return Q @ estimate, Q
