import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinemds import kernels
from kinemds.errors import IdentifiabilityError
from kinemds.gtwr import TimestampTable
from kinemds.linalg_core import centering_matrix, commutation_matrix
from kinemds.ranging import estimate_theta_per_link

BACKENDS = kernels.available_backends()


def test_python_backend_always_available():
    assert "python" in BACKENDS
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@pytest.mark.parametrize("backend", BACKENDS)
def test_lyapunov_matrix_definition(backend, rng):
    k = kernels.get_backend(backend)
    X = rng.normal(size=(3, 7))
    J = commutation_matrix(7)
    ref = (np.eye(49) + J) @ np.kron(np.eye(7), X.T)
    np.testing.assert_allclose(k.lyapunov_matrix(X), ref, atol=1e-14)
    ref_g = (np.eye(49) + J) @ np.kron(centering_matrix(7), X.T)
    np.testing.assert_allclose(k.generalized_lyapunov_matrix(X), ref_g, atol=1e-14)


@pytest.mark.parametrize("backend", BACKENDS)
def test_polyfit_matches_lstsq(backend, rng):
    k = kernels.get_backend(backend)
    times = np.tile(np.linspace(-1, 1, 11), (4, 1))
    tau = rng.normal(size=(4, 11))
    coeffs, bad = k.polyfit_links(times, tau, 3, None)
    assert bad == -1
    for l in range(4):
        ref = np.polynomial.polynomial.polyfit(times[l], tau[l], 2)
        np.testing.assert_allclose(coeffs[l], ref, atol=1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_polyfit_flags_singular_link(backend):
    k = kernels.get_backend(backend)
    times = np.array([[0.0, 1.0, 2.0], [1.0, 1.0, 1.0]])
    _, bad = k.polyfit_links(times, np.ones((2, 3)), 2, None)
    assert bad == 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_backends_agree(seed, L):
    r = np.random.default_rng(seed)
    X = r.normal(size=(2, 6))
    times = np.sort(r.uniform(-1, 1, size=(5, 9)), axis=1)
    tau = r.normal(size=(5, 9))
    w = r.uniform(0.5, 2.0, size=(5, 9))
    outs = []
    for name in BACKENDS:
        k = kernels.get_backend(name)
        outs.append((k.lyapunov_matrix(X), k.generalized_lyapunov_matrix(X), k.polyfit_links(times, tau, L, w)[0]))
    for other in outs[1:]:
        for a, b in zip(outs[0], other):
            np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)


def test_identifiability_error_names_link():
    tx = np.array([[0.0, 1.0, 2.0], [0.0, 1.0, 2.0], [0.0, 1.0, 2.0]])
    t = TimestampTable(3, tx, tx + 1e-6)
    # weights of zero on two samples leave a single effective point
    w = np.ones_like(tx)
    w[2, 1:] = 0.0
    with pytest.raises(IdentifiabilityError, match=r"\(2,3\)"):
        estimate_theta_per_link(t, 2, w)


def test_env_forces_python_backend():
    env = dict(os.environ, KINEMDS_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import kinemds; print(kinemds.BACKEND)"], env=env, capture_output=True, text=True, check=True
    )
    assert out.stdout.strip() == "python"
