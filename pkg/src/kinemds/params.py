"""Pair indexing helpers and the range-parameter container.

Links are ordered pair-major: ``(0, 1), (0, 2), ..., (0, N-1), (1, 2), ...``.
All indices in the Python API are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DependencyError, DimensionError

__all__ = [
    "RangeParameterSet",
    "matrix_to_pairs",
    "n_links",
    "nodes_from_links",
    "pair_indices",
    "pair_list",
    "pairs_to_matrix",
]


def n_links(n: int) -> int:
    return n * (n - 1) // 2


def nodes_from_links(n_bar: int) -> int:
    """Invert ``N(N-1)/2``; raises if ``n_bar`` is not triangular."""
    n = int(round((1 + np.sqrt(1 + 8 * n_bar)) / 2))
    if n_links(n) != n_bar or n < 2:
        raise DimensionError(f"{n_bar} is not a valid number of links")
    return n


def pair_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column index arrays of the strictly upper triangle, pair-major."""
    return np.triu_indices(n, 1)


def pair_list(n: int) -> list[tuple[int, int]]:
    i, j = pair_indices(n)
    return list(zip(i.tolist(), j.tolist()))


def pairs_to_matrix(v: np.ndarray, n: int | None = None) -> np.ndarray:
    """Symmetric hollow ``N x N`` matrix from a pair-major vector."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if n is None:
        n = nodes_from_links(v.size)
    elif v.size != n_links(n):
        raise DimensionError(f"expected {n_links(n)} pair values for N={n}, got {v.size}")
    i, j = pair_indices(n)
    m = np.zeros((n, n))
    m[i, j] = v
    m[j, i] = v
    return m


def matrix_to_pairs(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    i, j = pair_indices(m.shape[0])
    return m[i, j].copy()


_NAMES = ("range", "range rate", "rate of range rate")


@dataclass(frozen=True)
class RangeParameterSet:
    """Distance derivatives at the expansion time.

    ``derivatives[m]`` is the ``N x N`` matrix of ``d^m d_ij / dt^m``, so
    ``derivatives[0]`` is ``R``, ``derivatives[1]`` is ``Rdot`` and so on.
    The number of stored matrices is the polynomial order ``L``.
    """

    derivatives: tuple

    def __post_init__(self):
        mats = tuple(np.asarray(d, dtype=float) for d in self.derivatives)
        if not mats:
            raise DimensionError("at least the range matrix is required")
        n = mats[0].shape[0]
        for m in mats:
            if m.shape != (n, n):
                raise DimensionError(f"range matrices must all be {n}x{n}, got {m.shape}")
        object.__setattr__(self, "derivatives", mats)

    @classmethod
    def from_vectors(cls, vectors, n: int | None = None) -> "RangeParameterSet":
        return cls(tuple(pairs_to_matrix(v, n) for v in vectors))

    @property
    def order(self) -> int:
        return len(self.derivatives)

    @property
    def n_nodes(self) -> int:
        return self.derivatives[0].shape[0]

    def derivative(self, m: int) -> np.ndarray:
        if m >= self.order:
            name = _NAMES[m] if m < len(_NAMES) else f"order-{m} range derivative"
            raise DependencyError(f"{name} not available (range parameters have order L={self.order})")
        return self.derivatives[m]

    def vector(self, m: int) -> np.ndarray:
        return matrix_to_pairs(self.derivative(m))

    @property
    def R(self) -> np.ndarray:
        return self.derivative(0)

    @property
    def Rdot(self) -> np.ndarray:
        return self.derivative(1)

    @property
    def Rddot(self) -> np.ndarray:
        return self.derivative(2)

    @property
    def r(self) -> np.ndarray:
        return self.vector(0)

    @property
    def rdot(self) -> np.ndarray:
        return self.vector(1)

    @property
    def rddot(self) -> np.ndarray:
        return self.vector(2)

    def truncated(self, order: int) -> "RangeParameterSet":
        """Keep only the first ``order`` matrices."""
        if order > self.order:
            raise DependencyError(f"cannot truncate order {self.order} to {order}")
        return RangeParameterSet(self.derivatives[:order])
