import csv

import numpy as np
import pytest

from kinemds.bounds import (
    RangeCrb,
    absolute_ay,
    covariance_b,
    covariance_rho,
    crb_kinematics,
    crb_position,
    crb_range,
    crb_range_iid,
    distance_jacobian,
    fim_position,
    lift_matrix,
    rcrb,
    relative_ay,
    save_bounds,
    weighting_matrix,
)
from kinemds.errors import IdentifiabilityError, InsufficientConstraintError, NotSupportedError, SingularGeometryError
from kinemds.gtwr import SPEED_OF_LIGHT, TimestampTable, generate_timestamps, measure_delays
from kinemds.kernels import impl
from kinemds.linalg_core import centering_matrix, nullspace, vec
from kinemds.params import RangeParameterSet, pair_indices
from kinemds.ranging import build_centered_grams, build_vandermonde, dynamic_ranging
from kinemds.rel_kinematics import centering_constraints, immobility_constraints, stack_constraints
from kinemds.scenario import KinematicEnsemble, range_derivative_oracle


@pytest.fixture(scope="module")
def setup(scenario):
    table = generate_timestamps(scenario, 10)
    crb = crb_range_iid(table, 0.1, 3)
    return table, crb


def test_range_crb_block_and_iid_agree(scenario):
    e = KinematicEnsemble(scenario.X[:, :4], tuple(y[:, :4] for y in scenario.derivatives))
    t = generate_timestamps(e, 8)
    V, _ = build_vandermonde(t, 3)
    sigma_t2 = (0.1 / SPEED_OF_LIGHT) ** 2
    full = crb_range(V, sigma_t2 * np.eye(V.shape[0]), 3)
    iid = crb_range_iid(t, 0.1, 3)
    atol = 1e-12 * np.abs(iid.full).max()
    np.testing.assert_allclose(full.full, iid.full, rtol=1e-8, atol=atol)
    scalar = crb_range(V, sigma_t2, 3)
    np.testing.assert_allclose(scalar.full, iid.full, rtol=1e-8, atol=atol)


def test_range_crb_scaling(setup):
    table, crb = setup
    double = crb_range_iid(table, 0.2, 3)
    np.testing.assert_allclose(double.full, 4 * crb.full, rtol=1e-12)
    assert crb.Sigma_r.shape == (45, 45)
    np.testing.assert_allclose(crb.Sigma_r, crb.Sigma_r.T)


def test_range_crb_constant_model():
    K = 9
    tx = np.linspace(-1, 1, K)[None, :]
    t = TimestampTable(2, tx, tx + 1e-6)
    crb = crb_range_iid(t, 0.3, 1)
    sigma_t = 0.3 / SPEED_OF_LIGHT
    assert crb.Sigma_r[0, 0] == pytest.approx(SPEED_OF_LIGHT**2 * sigma_t**2 / K, rel=1e-12)


def test_range_crb_slope(scenario):
    Ks = np.array([10, 20, 40, 100])
    sd = [np.sqrt(np.mean(np.diag(crb_range_iid(generate_timestamps(scenario, K), 0.1, 3).Sigma_r))) for K in Ks]
    slope = np.polyfit(np.log(Ks), np.log(sd), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.05)


def test_range_crb_errors():
    tx = np.array([[0.0, 1.0]])
    with pytest.raises(IdentifiabilityError):
        crb_range_iid(TimestampTable(2, tx, tx + 1e-6), 0.1, 3)
    with pytest.raises(IdentifiabilityError):
        crb_range(np.ones((4, 2)), None, 2)
    with pytest.raises(IdentifiabilityError):
        RangeCrb(np.eye(2), 1).block(2)


def test_jacobian_finite_differences(rel):
    X = rel.X_rel
    J = distance_jacobian(X)
    i, j = pair_indices(10)

    def d(v):
        Y = v.reshape(10, 2).T
        return np.linalg.norm(Y[:, i] - Y[:, j], axis=0)

    x0 = vec(X)
    h = 1e-4
    fd = np.column_stack([(d(x0 + h * e) - d(x0 - h * e)) / (2 * h) for e in np.eye(20)])
    assert np.max(np.abs(fd - J)) <= 1e-6
    with pytest.raises(SingularGeometryError):
        distance_jacobian(np.zeros((2, 3)))


def test_position_fim_nullspace(rel, setup):
    _, crb = setup
    X = rel.X_rel
    F = fim_position(X, crb.Sigma_r)
    h = np.array([[3.0], [-1.0]])
    np.testing.assert_allclose(F @ vec(h @ np.ones((1, 10))), 0.0, atol=1e-8 * np.abs(F).max())
    G = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert np.linalg.norm(F @ vec(G @ X)) <= 1e-8 * np.linalg.norm(F) * np.linalg.norm(X)
    assert nullspace(F / np.abs(F).max(), 1e-8).shape[1] == 3
    cov = crb_position(X, crb.Sigma_r)
    np.testing.assert_allclose(cov, cov.T)


def test_lift_matrix():
    Lm = lift_matrix(3)
    v = np.array([1.0, 2.0, 3.0])
    M = (Lm @ v).reshape(3, 3, order="F")
    np.testing.assert_array_equal(M, [[0, 1, 2], [1, 0, 3], [2, 3, 0]])


def test_covariance_b_trivial(scenario, setup):
    _, crb = setup
    p = range_derivative_oracle(scenario)
    zero = RangeCrb(np.zeros_like(crb.full), crb.n_links)
    assert not np.any(covariance_b(1, p, zero))
    assert not np.any(covariance_b(2, p, zero))
    with pytest.raises(NotSupportedError):
        covariance_b(3, p, crb)
    S1 = covariance_b(1, p, crb)
    np.testing.assert_allclose(S1, S1.T)
    assert np.linalg.eigvalsh(S1).min() >= -1e-10 * np.trace(S1)


def test_covariance_b2_velocity_term_vanishes(scenario, setup):
    _, crb = setup
    p = range_derivative_oracle(scenario)
    Sx = np.eye(20)
    a = covariance_b(2, p, crb)
    b = covariance_b(2, p, crb, relative_ay(np.zeros((2, 10))), Sx)
    np.testing.assert_allclose(a, b, atol=1e-15)


def test_covariance_b1_monte_carlo(scenario, setup):
    table, crb = setup
    p = range_derivative_oracle(scenario)
    model = np.trace(covariance_b(1, p, crb))
    samples = np.array([
        vec(build_centered_grams(dynamic_ranging(measure_delays(table, 0.1, seed=k), 3), 1).B1) for k in range(2000)
    ])
    emp = np.trace(np.cov(samples.T))
    assert emp == pytest.approx(model, rel=0.2)


def test_covariance_rho_cases(scenario, rel, setup):
    _, crb = setup
    Sb = covariance_b(1, range_derivative_oracle(scenario), crb)
    A_y = relative_ay(rel.Y(1))
    np.testing.assert_allclose(covariance_rho(A_y, np.zeros((20, 20)), Sb), Sb, atol=1e-18)
    np.testing.assert_allclose(covariance_rho(relative_ay(np.zeros((2, 10))), np.eye(20), Sb), Sb, atol=1e-18)
    Sr = covariance_rho(A_y, crb_position(rel.X_rel, crb.Sigma_r), Sb)
    assert np.linalg.eigvalsh(Sr).min() >= -1e-10 * np.trace(Sr)


def test_ay_variants(rel, scenario):
    Y = scenario.Y(1)
    np.testing.assert_allclose(absolute_ay(Y), impl.generalized_lyapunov_matrix(Y @ centering_matrix(10)))
    np.testing.assert_allclose(relative_ay(rel.Y(1)), impl.lyapunov_matrix(rel.Y(1)))


def test_crb_kinematics(scenario, rel, setup):
    _, crb = setup
    p = range_derivative_oracle(scenario)
    X = rel.X_rel
    Sigma_rho = covariance_rho(relative_ay(rel.Y(1)), crb_position(X, crb.Sigma_r), covariance_b(1, p, crb))
    C = stack_constraints(immobility_constraints([0, 1], 2, 10), centering_constraints(2, 10))
    A = impl.lyapunov_matrix(X)
    kc = crb_kinematics(A, Sigma_rho, C, 1)
    assert np.trace(kc.constrained) >= np.trace(kc.unconstrained)
    assert np.max(np.abs(C[0] @ kc.constrained)) <= 1e-9 * np.abs(kc.constrained).max()
    kc2 = crb_kinematics(A, 2 * Sigma_rho, C, 1)
    np.testing.assert_allclose(kc2.constrained, 2 * kc.constrained, rtol=1e-6, atol=1e-12 * np.abs(kc.constrained).max())
    np.testing.assert_allclose(kc2.unconstrained, 2 * kc.unconstrained, rtol=1e-6, atol=1e-12 * np.abs(kc.unconstrained).max())
    for M in (kc.constrained, kc.unconstrained):
        assert np.linalg.eigvalsh(M).min() >= -1e-10 * np.trace(M)
    with pytest.raises(InsufficientConstraintError):
        crb_kinematics(A, Sigma_rho, centering_constraints(2, 10))
    zero = crb_kinematics(A, np.zeros_like(Sigma_rho), C)
    assert not np.any(zero.constrained)


def test_weighting_matrix(rng):
    assert not np.any(weighting_matrix(np.zeros((4, 4))))
    B = rng.normal(size=(5, 3))
    W = weighting_matrix(B @ B.T)
    assert np.max(np.abs(W - W.T)) <= 1e-12 * np.abs(W).max()


def test_rcrb_and_export(tmp_path):
    assert rcrb(np.diag([1.0, 3.0])) == pytest.approx(1.0)
    assert rcrb(np.diag([9.0, 16.0]), 1) == pytest.approx(5.0)
    path = tmp_path / "b.csv"
    save_bounds([("Y", 1, "ccrb", 0.5)], path)
    rows = list(csv.reader(path.open()))
    assert rows == [["quantity", "order", "bound_type", "value"], ["Y", "1", "ccrb", "0.5"]]


def test_oracle_weighting_beats_identity(scenario, rel):
    # WLLS with the exact residual covariance has smaller spread than LLS
    from kinemds.rel_kinematics import build_lyapunov_system, build_measurement_matrix, lls, wlls
    from kinemds.rel_position import mds_position, procrustes_align

    table = generate_timestamps(scenario, 40)
    crb = crb_range_iid(table, 0.1, 3)
    p = range_derivative_oracle(scenario)
    Sigma_rho = covariance_rho(relative_ay(rel.Y(1)), crb_position(rel.X_rel, crb.Sigma_r), covariance_b(1, p, crb))
    W = weighting_matrix(Sigma_rho)
    imm = immobility_constraints([0, 1], 2, 10)
    e_l, e_w = [], []
    for k in range(500):
        g = build_centered_grams(dynamic_ranging(measure_delays(table, 0.1, seed=k), 3), 1)
        Xa, _ = procrustes_align(mds_position(g.B0, 2).X_hat, rel.X_rel)
        s = build_lyapunov_system(Xa, build_measurement_matrix(1, g), imm)
        e_l.append(vec(lls(s).Y_hat))
        e_w.append(vec(wlls(s, W).Y_hat))
    assert np.trace(np.cov(np.array(e_w).T)) <= np.trace(np.cov(np.array(e_l).T))


def test_params_dataclass_sanity(scenario):
    p = range_derivative_oracle(scenario)
    assert isinstance(p, RangeParameterSet) and p.order == 3
