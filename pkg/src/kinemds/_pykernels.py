"""Pure-numpy implementations of the compiled kernels (same signatures)."""

from __future__ import annotations

import numpy as np


def polyfit_links(times, tau, L, weights=None, tol=1e-13):
    t = np.asarray(times, dtype=float)
    y = np.asarray(tau, dtype=float)
    powers = t[:, :, None] ** np.arange(L)
    wp = powers if weights is None else powers * np.asarray(weights, dtype=float)[:, :, None]
    G = np.einsum("lka,lkb->lab", wp, powers)
    h = np.einsum("lka,lk->la", wp, y)
    out = np.zeros((t.shape[0], L))
    for l in range(t.shape[0]):
        try:
            c = np.linalg.cholesky(G[l])
        except np.linalg.LinAlgError:
            return out, l
        if np.min(np.diag(c)) ** 2 <= tol * np.max(np.diag(G[l])):
            return out, l
        out[l] = np.linalg.solve(c.T, np.linalg.solve(c, h[l]))
    return out, -1


def _swap_rows(N):
    idx = np.arange(N * N)
    return (idx // N) + (idx % N) * N


def lyapunov_matrix(X):
    X = np.asarray(X, dtype=float)
    N = X.shape[1]
    K = np.kron(np.eye(N), X.T)
    return K + K[_swap_rows(N)]


def generalized_lyapunov_matrix(X):
    X = np.asarray(X, dtype=float)
    N = X.shape[1]
    K = np.kron(np.eye(N) - 1.0 / N, X.T)
    return K + K[_swap_rows(N)]
