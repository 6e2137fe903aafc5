import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import solve_continuous_lyapunov

from brillouin_qc.errors import NonPhysicalInput, UnstableSystem
from brillouin_qc.lyapunov import (
    check_physical,
    check_stability,
    discretize,
    lyapunov_residual,
    propagate_covariance,
    solve_steady_lyapunov,
    uncertainty_eigenvalue,
)
from brillouin_qc.model import fig2, linear_model


@pytest.mark.parametrize("sign,stable,margin", [(-1, True, -1.0), (1, False, 1.0)])
def test_identity_stability(sign, stable, margin):
    report = check_stability(sign * np.eye(6))
    assert report.stable is stable
    assert report.margin == margin


def test_fig2_point_is_stable():
    assert check_stability(linear_model(fig2()).A).stable


def test_marginal_matrix_is_rejected():
    A = np.diag([-1.0, -1.0, -1.0, -1.0, -1e-12, -1e-12])
    assert not check_stability(A).stable
    with pytest.raises(UnstableSystem):
        solve_steady_lyapunov(A, np.eye(6))


def test_isotropic_solution():
    cov = solve_steady_lyapunov(-0.5 * np.eye(6), np.eye(6))
    np.testing.assert_allclose(cov.V, np.eye(6), atol=1e-14)


@pytest.mark.parametrize("n_th", [0.0, 1.0, 100.0, 1e4])
def test_decoupled_thermal_mechanics(n_th):
    model = linear_model(fig2(G_m=0.0, G_a=0.0, n_th=n_th))
    V = solve_steady_lyapunov(model.A, model.D).V
    np.testing.assert_allclose(V[4:6, 4:6], (n_th + 0.5) * np.eye(2), atol=1e-10 * max(1.0, n_th))
    np.testing.assert_allclose(V[0:4, 0:4], 0.5 * np.eye(4), atol=1e-12)


def test_fig2_point_matches_time_integration():
    model = linear_model(fig2(G_a=0.15, J_m=0.0))
    V = solve_steady_lyapunov(model.A, model.D).V
    margin = check_stability(model.A).margin
    V_t = propagate_covariance(model.A, model.D, 200 / abs(margin), h=1.0)
    assert np.linalg.norm(V_t - V) / np.linalg.norm(V) < 1e-8


def test_propagation_from_zero_grows_toward_steady_state():
    model = linear_model(fig2(G_m=0.0, G_a=0.0))
    early = propagate_covariance(model.A, model.D, 10.0)
    late = propagate_covariance(model.A, model.D, 1e5)
    assert early[4, 4] < late[4, 4]


def test_discretize_small_step():
    A = -0.5 * np.eye(6)
    phi, Q = discretize(A, np.eye(6), 1e-3)
    np.testing.assert_allclose(phi, np.exp(-0.5e-3) * np.eye(6), rtol=1e-14)
    np.testing.assert_allclose(Q, (1 - np.exp(-1e-3)) * np.eye(6), rtol=1e-10)


def random_stable(seed, n=6):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(n, n))
    lam = np.max(np.linalg.eigvals(M).real) + rng.uniform(0.05, 1.0)
    A = M - lam * np.eye(n)
    D = np.diag(rng.uniform(0, 2, size=n))
    return A, D


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_random_stable_matrices_match_time_integration(seed):
    A, D = random_stable(seed)
    V = solve_steady_lyapunov(A, D).V
    margin = check_stability(A).margin
    V_t = propagate_covariance(A, D, 60 / abs(margin), h=0.5)
    assert np.linalg.norm(V - V_t) / np.linalg.norm(V_t) < 1e-6


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_agrees_with_scipy(seed):
    A, D = random_stable(seed)
    ours = solve_steady_lyapunov(A, D).V
    ref = solve_continuous_lyapunov(A, -D)
    np.testing.assert_allclose(ours, ref, atol=1e-9 * np.max(np.abs(ref)))


def test_residual_reported():
    model = linear_model(fig2(J_m=0.2))
    cov = solve_steady_lyapunov(model.A, model.D)
    assert cov.residual == pytest.approx(lyapunov_residual(model.A, cov.V, model.D))
    assert cov.residual < 1e-10
    assert np.array_equal(cov.V, cov.V.T)


def test_monotone_in_thermal_occupancy():
    diag = []
    for n_th in [0.0, 10.0, 50.0, 200.0]:
        model = linear_model(fig2(G_m=0.0, G_a=0.0, n_th=n_th))
        diag.append(np.diag(solve_steady_lyapunov(model.A, model.D).V)[4:6])
    diag = np.array(diag)
    assert np.all(np.diff(diag, axis=0) > 0)


@pytest.mark.parametrize("J,theta", [(0.0, 0.0), (0.2, np.pi / 2), (0.1, 3.0)])
def test_steady_state_is_physical(J, theta):
    model = linear_model(fig2(J_m=J, theta=theta, G_a=0.2))
    V = solve_steady_lyapunov(model.A, model.D).V
    check_physical(V)
    assert uncertainty_eigenvalue(V) >= -1e-10


def test_unphysical_matrix_rejected():
    V = 0.1 * np.eye(6)  # below vacuum
    with pytest.raises(NonPhysicalInput):
        check_physical(V)
