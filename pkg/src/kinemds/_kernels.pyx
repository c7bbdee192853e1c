# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: batched per-link polynomial fits and Lyapunov operator assembly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs

cnp.import_array()


cdef int _cholesky_solve(double[:, ::1] G, double[::1] h, int L, double tol) noexcept nogil:
    """In-place Cholesky solve of the L x L system; returns 1 on loss of definiteness."""
    cdef int a, b, k
    cdef double s, scale = 0.0
    for a in range(L):
        if G[a, a] > scale:
            scale = G[a, a]
    if scale <= 0.0:
        return 1
    for a in range(L):
        s = G[a, a]
        for k in range(a):
            s -= G[a, k] * G[a, k]
        if s <= tol * scale:
            return 1
        G[a, a] = sqrt(s)
        for b in range(a + 1, L):
            s = G[b, a]
            for k in range(a):
                s -= G[b, k] * G[a, k]
            G[b, a] = s / G[a, a]
    for a in range(L):
        s = h[a]
        for k in range(a):
            s -= G[a, k] * h[k]
        h[a] = s / G[a, a]
    for a in range(L - 1, -1, -1):
        s = h[a]
        for k in range(a + 1, L):
            s -= G[k, a] * h[k]
        h[a] = s / G[a, a]
    return 0


def polyfit_links(times, tau, int L, weights=None, double tol=1e-13):
    """Weighted polynomial least squares for every link.

    Returns ``(coeffs, bad)`` with ``coeffs`` of shape (n_links, L) and ``bad``
    the index of the first link whose normal matrix is singular, or -1.
    """
    cdef double[:, ::1] t = np.ascontiguousarray(times, dtype=np.float64)
    cdef double[:, ::1] y = np.ascontiguousarray(tau, dtype=np.float64)
    cdef Py_ssize_t n_bar = t.shape[0], K = t.shape[1]
    cdef double[:, ::1] w
    cdef bint weighted = weights is not None
    if weighted:
        w = np.ascontiguousarray(weights, dtype=np.float64)
    out = np.zeros((n_bar, L), dtype=np.float64)
    cdef double[:, ::1] c = out
    cdef double[:, ::1] G = np.zeros((L, L), dtype=np.float64)
    cdef double[::1] h = np.zeros(L, dtype=np.float64)
    cdef double[::1] pw = np.zeros(2 * L, dtype=np.float64)
    cdef Py_ssize_t l, k, a, b
    cdef double wk, tk
    cdef int bad = -1
    with nogil:
        for l in range(n_bar):
            for a in range(L):
                h[a] = 0.0
                for b in range(L):
                    G[a, b] = 0.0
            for k in range(K):
                wk = w[l, k] if weighted else 1.0
                tk = t[l, k]
                pw[0] = wk
                for a in range(1, 2 * L - 1):
                    pw[a] = pw[a - 1] * tk
                for a in range(L):
                    h[a] += pw[a] * y[l, k]
                    for b in range(a + 1):
                        G[a, b] += pw[a + b]
            for a in range(L):
                for b in range(a + 1, L):
                    G[a, b] = G[b, a]
            if _cholesky_solve(G, h, L, tol):
                bad = l
                break
            for a in range(L):
                c[l, a] = h[a]
    return out, bad


def lyapunov_matrix(X):
    """``(I + J)(I_N kron X^T)`` filled entry by entry."""
    cdef double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t P = x.shape[0], N = x.shape[1]
    out = np.zeros((N * N, N * P), dtype=np.float64)
    cdef double[:, ::1] A = out
    cdef Py_ssize_t i, j, p
    with nogil:
        for j in range(N):
            for i in range(N):
                for p in range(P):
                    A[i + j * N, p + j * P] += x[p, i]
                    A[i + j * N, p + i * P] += x[p, j]
    return out


def generalized_lyapunov_matrix(X):
    """``(I + J)(P_N kron X^T)`` with ``P_N`` the centering matrix."""
    cdef double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t P = x.shape[0], N = x.shape[1]
    out = np.zeros((N * N, N * P), dtype=np.float64)
    cdef double[:, ::1] A = out
    cdef Py_ssize_t i, j, n, p
    cdef double inv_n = 1.0 / N, cjn, cin
    with nogil:
        for j in range(N):
            for i in range(N):
                for n in range(N):
                    cjn = (1.0 if j == n else 0.0) - inv_n
                    cin = (1.0 if i == n else 0.0) - inv_n
                    for p in range(P):
                        A[i + j * N, p + n * P] = cjn * x[p, i] + cin * x[p, j]
    return out
