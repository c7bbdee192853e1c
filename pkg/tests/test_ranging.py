import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kinemds.errors import DependencyError, IdentifiabilityError
from kinemds.gtwr import SPEED_OF_LIGHT, TimestampTable, generate_timestamps, measure_delays
from kinemds.linalg_core import centering_matrix
from kinemds.params import RangeParameterSet
from kinemds.ranging import (
    build_centered_grams,
    build_vandermonde,
    dynamic_ranging,
    estimate_theta,
    estimate_theta_per_link,
    gamma_vector,
    load_range_parameters,
    save_range_parameters,
    theta_to_range_params,
)
from kinemds.scenario import KinematicEnsemble, range_derivative_oracle, relative_state


def two_node_table(times, T0=0.0):
    tx = np.asarray([times], dtype=float)
    return TimestampTable(2, tx, tx + 1e-6, T0)


def test_vandermonde_small():
    V, tau = build_vandermonde(two_node_table([-1.0, 1.0]), 2)
    np.testing.assert_array_equal(V, [[1.0, -1.0], [1.0, 1.0]])
    assert tau.shape == (2,)


def test_vandermonde_constant_model(scenario):
    t = generate_timestamps(scenario, 4)
    V, _ = build_vandermonde(t, 1)
    np.testing.assert_array_equal(V, np.kron(np.eye(45), np.ones((4, 1))))


def test_vandermonde_shape(scenario):
    V, tau = build_vandermonde(generate_timestamps(scenario, 10), 3)
    assert V.shape == (450, 135) and tau.shape == (450,)


def test_vandermonde_identifiability():
    with pytest.raises(IdentifiabilityError):
        build_vandermonde(two_node_table([0.0, 1.0]), 3)


def test_theta_recovers_planted(rng):
    t = two_node_table(np.linspace(-1, 1, 7))
    V, _ = build_vandermonde(t, 3)
    planted = np.array([2e-6, 3e-8, -1e-9])
    theta = estimate_theta(V, V @ planted)
    np.testing.assert_allclose(theta, planted, rtol=1e-10)
    np.testing.assert_array_equal(estimate_theta(V, np.zeros(7)), 0.0)
    noisy = V @ planted + rng.normal(scale=1e-9, size=7)
    np.testing.assert_allclose(estimate_theta(V, noisy, 4e-18), estimate_theta(V, noisy), rtol=1e-12)
    np.testing.assert_allclose(estimate_theta(V, noisy, 4e-18 * np.eye(7)), estimate_theta(V, noisy), rtol=1e-10)


def test_theta_singular_spacing():
    V = np.ones((3, 2))
    with pytest.raises(IdentifiabilityError):
        estimate_theta(V, np.ones(3))


def test_gamma_scaling():
    assert gamma_vector(3).tolist() == [SPEED_OF_LIGHT, SPEED_OF_LIGHT, 2 * SPEED_OF_LIGHT]
    p = theta_to_range_params(np.array([1e-6, 0.0, 1e-9]), 3, n=2)
    assert p.r[0] == pytest.approx(300.0)
    assert p.rddot[0] == pytest.approx(0.6)


def test_per_link_equals_block_system(scenario, rng):
    t = generate_timestamps(scenario, 9)
    m = measure_delays(t, 0.1, seed=11)
    V, tau = build_vandermonde(m, 3)
    np.testing.assert_allclose(estimate_theta_per_link(m, 3), estimate_theta(V, tau), rtol=1e-9, atol=1e-20)
    w = rng.uniform(0.5, 2.0, size=(45, 9))
    Sigma = 1.0 / w.reshape(-1)
    np.testing.assert_allclose(
        estimate_theta_per_link(m, 3, w), estimate_theta(V, tau, Sigma), rtol=1e-9, atol=1e-20
    )


def test_noiseless_roundtrip_polynomial(scenario):
    t = generate_timestamps(scenario, 10, delay_model="polynomial", order_L=3)
    p = dynamic_ranging(t, 3)
    truth = range_derivative_oracle(scenario)
    assert np.max(np.abs(p.r - truth.r)) <= 1e-8
    np.testing.assert_allclose(p.rdot, truth.rdot, atol=1e-8)
    np.testing.assert_allclose(p.rddot, truth.rddot, atol=1e-7)


def test_order_monotonicity(scenario):
    t = generate_timestamps(scenario, 12, delay_model="polynomial", order_L=2)
    p2 = dynamic_ranging(t, 2)
    p3 = dynamic_ranging(t, 3)
    np.testing.assert_allclose(p3.r, p2.r, atol=1e-8)
    np.testing.assert_allclose(p3.rdot, p2.rdot, atol=1e-8)


def test_blue_covariance(scenario):
    e = KinematicEnsemble(scenario.X[:, :3], tuple(y[:, :3] for y in scenario.derivatives))
    t = generate_timestamps(e, 20, delay_model="polynomial")
    V, tau0 = build_vandermonde(t, 3)
    sigma_t = 0.1 / SPEED_OF_LIGHT
    samples = np.array([estimate_theta_per_link(measure_delays(t, 0.1, seed=k), 3) for k in range(500)])
    emp = np.trace(np.cov(samples.T) / sigma_t**2)
    model = np.trace(np.linalg.inv(V.T @ V))
    assert emp == pytest.approx(model, rel=0.15)


def test_grams_trivial_and_centered(scenario, rel):
    static = RangeParameterSet.from_vectors([range_derivative_oracle(scenario).r, np.zeros(45), np.zeros(45)], 10)
    g = build_centered_grams(static)
    assert not np.any(g.B1) and not np.any(g.B2)
    g = build_centered_grams(range_derivative_oracle(scenario))
    G = rel.X_rel.T @ rel.X_rel
    assert np.linalg.norm(g.B0 - G) <= 1e-8 * np.linalg.norm(G)
    for B in (g.B0, g.B1, g.B2):
        np.testing.assert_allclose(B, B.T)
        assert np.max(np.abs(B.sum(axis=1))) <= 1e-9 * np.linalg.norm(B)
    with pytest.raises(DependencyError):
        build_centered_grams(range_derivative_oracle(scenario, 1), 2)
    with pytest.raises(DependencyError):
        g.gram(3)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_second_order_gram_identity(seed):
    r = np.random.default_rng(seed)
    e = KinematicEnsemble(r.uniform(-500, 500, (2, 7)), (r.normal(size=(2, 7)) * 5, r.normal(size=(2, 7))))
    rs = relative_state(e)
    g = build_centered_grams(range_derivative_oracle(e))
    lhs = g.B2 - 2 * rs.Y(1).T @ rs.Y(1)
    rhs = rs.X_rel.T @ rs.Y(2) + rs.Y(2).T @ rs.X_rel
    assert np.linalg.norm(lhs - rhs) <= 1e-6 * np.linalg.norm(rhs)


def test_gram_general_order_leibniz():
    # B^(3) is the third derivative of the centered Gram S^T S at t0
    r = np.random.default_rng(5)
    e = KinematicEnsemble(r.uniform(-100, 100, (2, 5)), tuple(r.normal(size=(2, 5)) for _ in range(3)))
    rs = relative_state(e)
    g = build_centered_grams(range_derivative_oracle(e, 3))
    Y = [rs.Y(m) for m in range(4)]
    ref = sum(math.comb(3, k) * Y[k].T @ Y[3 - k] for k in range(4))
    np.testing.assert_allclose(g.gram(3), ref, rtol=1e-8, atol=1e-8 * np.abs(ref).max())


def test_range_csv(tmp_path, scenario):
    p = range_derivative_oracle(scenario)
    path = tmp_path / "r.csv"
    save_range_parameters(p, path)
    assert path.read_text().splitlines()[0] == "i,j,r,rdot,rddot"
    back = load_range_parameters(path)
    for m in range(3):
        np.testing.assert_array_equal(back.vector(m), p.vector(m))
    short = p.truncated(2)
    save_range_parameters(short, path)
    assert load_range_parameters(path).order == 2
