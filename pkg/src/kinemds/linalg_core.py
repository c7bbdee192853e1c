"""Dense linear-algebra kernel shared by every estimator.

All routines take and return plain :class:`numpy.ndarray` objects. ``vec``
stacks columns (Fortran order), so ``vec(A B C) = (C^T kron A) vec(B)``
holds throughout the package.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, RankDeficiencyError

DEFAULT_RCOND = 1e-10

__all__ = [
    "DEFAULT_RCOND",
    "ConstrainedLsProblem",
    "centering_matrix",
    "clip_psd",
    "commutation_matrix",
    "nullspace",
    "numeric_rank",
    "pseudo_inverse",
    "psd_sqrt",
    "solve_kkt",
    "symmetric_eig",
    "unvec",
    "vec",
]


def _check_count(n: int, name: str = "n") -> int:
    n = int(n)
    if n < 1:
        raise DimensionError(f"{name} must be >= 1, got {n}")
    return n


def centering_matrix(n: int) -> np.ndarray:
    """Return ``I_n - 1 1^T / n``."""
    n = _check_count(n)
    return np.eye(n) - np.full((n, n), 1.0 / n)


def commutation_matrix(n: int) -> np.ndarray:
    """Return the ``n^2 x n^2`` permutation ``J`` with ``J vec(A) = vec(A^T)``."""
    n = _check_count(n)
    # vec(A)[i + j n] = A[i, j]; vec(A^T)[i + j n] = A[j, i] = vec(A)[j + i n]
    idx = np.arange(n * n)
    i, j = idx % n, idx // n
    J = np.zeros((n * n, n * n))
    J[idx, j + i * n] = 1.0
    return J


def vec(a: np.ndarray) -> np.ndarray:
    """Stack the columns of ``a`` into one vector."""
    return np.asarray(a).reshape(-1, order="F")


def unvec(v: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v)
    if v.size != rows * cols:
        raise DimensionError(f"cannot reshape vector of length {v.size} to {rows}x{cols}")
    return v.reshape((rows, cols), order="F")


def symmetric_eig(m: np.ndarray, fix_signs: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    With ``fix_signs`` each eigenvector is flipped so that its
    largest-magnitude entry is positive, which makes the output
    reproducible across LAPACK builds.
    """
    m = np.asarray(m, dtype=float)
    w, V = np.linalg.eigh(0.5 * (m + m.T))
    order = np.argsort(w)[::-1]
    w, V = w[order], V[:, order]
    if fix_signs and V.size:
        pivot = np.argmax(np.abs(V), axis=0)
        signs = np.sign(V[pivot, np.arange(V.shape[1])])
        signs[signs == 0] = 1.0
        V = V * signs
    return w, V


def pseudo_inverse(m: np.ndarray, tol: float = DEFAULT_RCOND, hermitian: bool = False) -> np.ndarray:
    """Moore-Penrose inverse; singular values below ``tol * s_max`` are dropped."""
    m = np.asarray(m, dtype=float)
    if m.size == 0:
        return np.zeros(m.shape[::-1])
    if hermitian:
        w, V = np.linalg.eigh(0.5 * (m + m.T))
        scale = np.max(np.abs(w))
        if scale == 0.0:
            return np.zeros_like(m)
        keep = np.abs(w) > tol * scale
        return (V[:, keep] / w[keep]) @ V[:, keep].T
    U, s, Vt = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(m.shape[::-1])
    keep = s > tol * s[0]
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def numeric_rank(m: np.ndarray, tol: float = DEFAULT_RCOND) -> int:
    """Number of singular values above ``tol * s_max``."""
    s = np.linalg.svd(np.asarray(m, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def nullspace(m: np.ndarray, tol: float = DEFAULT_RCOND) -> np.ndarray:
    """Orthonormal basis (as columns) of the null space of ``m``."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    n = m.shape[1]
    if m.shape[0] == 0:
        return np.eye(n)
    _, s, Vt = np.linalg.svd(m, full_matrices=True)
    rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    return Vt[rank:].T.copy()


def clip_psd(m: np.ndarray, rel_tol: float = DEFAULT_RCOND) -> np.ndarray:
    """Symmetrize and zero out negative eigenvalues.

    Eigenvalues below ``-rel_tol * trace`` trigger a warning since they are
    larger than round-off can explain.
    """
    m = np.asarray(m, dtype=float)
    sym = 0.5 * (m + m.T)
    w, V = np.linalg.eigh(sym)
    if w.size == 0 or np.all(w >= 0):
        return sym
    scale = max(np.sum(np.abs(w)), np.finfo(float).tiny)
    if w.min() < -rel_tol * scale:
        warnings.warn(
            f"clipping negative eigenvalue {w.min():.3e} (trace scale {scale:.3e})",
            RuntimeWarning,
            stacklevel=2,
        )
    w = np.clip(w, 0.0, None)
    return (V * w) @ V.T


def psd_sqrt(w: np.ndarray, rel_tol: float = DEFAULT_RCOND) -> np.ndarray:
    """Symmetric square root of a positive semi-definite matrix."""
    w = np.asarray(w, dtype=float)
    lam, V = np.linalg.eigh(0.5 * (w + w.T))
    scale = max(np.max(np.abs(lam)) if lam.size else 0.0, np.finfo(float).tiny)
    if lam.size and lam.min() < -rel_tol * scale:
        warnings.warn(
            f"weight matrix has negative eigenvalue {lam.min():.3e}; clipped to zero",
            RuntimeWarning,
            stacklevel=2,
        )
    lam = np.sqrt(np.clip(lam, 0.0, None))
    return (V * lam) @ V.T


@dataclass(frozen=True)
class ConstrainedLsProblem:
    """``min ||W^(1/2) (design y - rhs)||^2`` subject to ``constraint_lhs y = constraint_rhs``."""

    design: np.ndarray
    rhs: np.ndarray
    constraint_lhs: np.ndarray | None = None
    constraint_rhs: np.ndarray | None = None
    weight: np.ndarray | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.design, dtype=float))
        b = np.asarray(self.rhs, dtype=float).reshape(-1)
        if A.shape[0] != b.size:
            raise DimensionError(f"design has {A.shape[0]} rows but rhs has length {b.size}")
        n = A.shape[1]
        if self.constraint_lhs is None:
            C = np.zeros((0, n))
        else:
            C = np.asarray(self.constraint_lhs, dtype=float)
            if C.size == 0:
                C = np.zeros((0, n))
            elif C.ndim == 1:
                C = C[None, :]
            if C.ndim != 2 or C.shape[1] != n:
                raise DimensionError(f"constraint_lhs must have {n} columns, got shape {C.shape}")
        if self.constraint_rhs is None:
            d = np.zeros(C.shape[0])
        else:
            d = np.asarray(self.constraint_rhs, dtype=float).reshape(-1)
        if d.size != C.shape[0]:
            raise DimensionError(f"{C.shape[0]} constraint rows but constraint_rhs has length {d.size}")
        object.__setattr__(self, "design", A)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "constraint_lhs", C)
        object.__setattr__(self, "constraint_rhs", d)
        if self.weight is not None:
            W = np.asarray(self.weight, dtype=float)
            if W.shape != (b.size, b.size):
                raise DimensionError(f"weight must be {b.size}x{b.size}, got {W.shape}")
            object.__setattr__(self, "weight", W)

    @property
    def n_unknowns(self) -> int:
        return self.design.shape[1]


def _reject_duplicate_rows(C: np.ndarray) -> None:
    if C.shape[0] < 2:
        return
    _, counts = np.unique(C, axis=0, return_counts=True)
    if np.any(counts > 1):
        raise RankDeficiencyError("constraint block contains duplicated rows")


def solve_kkt(problem: ConstrainedLsProblem, tol: float = DEFAULT_RCOND) -> tuple[np.ndarray, np.ndarray]:
    """Solve an equality-constrained (weighted) least-squares problem.

    The saddle-point system ``[[2 A^T A, C^T], [C, 0]] [y; lam] = [2 A^T b; d]``
    is factorized with partial pivoting. A weight is folded in by
    pre-multiplying design and rhs with its symmetric square root.

    Returns
    -------
    solution : ndarray
    multipliers : ndarray
        Lagrange multipliers for the constraint rows (empty if there are none).

    Raises
    ------
    RankDeficiencyError
        If the constraint rows are dependent or ``[A; C]`` is not full column rank.
    """
    A, b = problem.design, problem.rhs
    C, d = problem.constraint_lhs, problem.constraint_rhs
    if problem.weight is not None:
        S = psd_sqrt(problem.weight)
        A, b = S @ A, S @ b
    n, k = A.shape[1], C.shape[0]

    H = 2.0 * A.T @ A
    g = 2.0 * A.T @ b
    if k == 0:
        if numeric_rank(A, tol) < n:
            raise RankDeficiencyError(f"design block has rank {numeric_rank(A, tol)} < {n} unknowns")
        y, *_ = np.linalg.lstsq(A, b, rcond=None)
        return y, np.zeros(0)

    _reject_duplicate_rows(C)
    c_rank = numeric_rank(C, tol)
    if c_rank < k:
        raise RankDeficiencyError(f"constraint block has rank {c_rank} < {k} rows (redundant constraints)")
    # balance the constraint block against the Hessian before factorizing
    h_norm = np.linalg.norm(H)
    s = h_norm / np.linalg.norm(C) if h_norm > 0 else 1.0
    stacked_rank = numeric_rank(np.vstack([np.sqrt(2.0) * A, np.sqrt(s) * C]), tol)
    if stacked_rank < n:
        raise RankDeficiencyError(
            f"stacked design/constraint block has rank {stacked_rank} < {n} unknowns"
        )
    Cs = s * C
    K = np.block([[H, Cs.T], [Cs, np.zeros((k, k))]])
    rhs = np.concatenate([g, s * d])
    lu = sla.lu_factor(K, check_finite=False)
    z = sla.lu_solve(lu, rhs, check_finite=False)
    z += sla.lu_solve(lu, rhs - K @ z, check_finite=False)
    return z[:n], s * z[n:]
