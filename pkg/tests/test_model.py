import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from brillouin_qc.errors import ParameterError
from brillouin_qc.model import (
    FIG2,
    LinearModel,
    RawParams,
    SystemParams,
    build_diffusion_matrix,
    build_drift_matrix,
    calibrate_drives,
    control_amplitude,
    effective_params,
    fig2,
    linear_model,
    solve_mean_fields,
)


def A1(params, i, j):
    """1-based indexing, as matrices are usually written down."""
    return build_drift_matrix(params)[i - 1, j - 1]


def test_decoupled_limit_is_block_diagonal():
    p = fig2(G_m=0.0, G_a=0.0, J_m=0.0)
    A = build_drift_matrix(p)
    k, ga, gm = p.kappa, p.gamma_a, p.gamma_m
    expected = np.zeros((6, 6))
    expected[0:2, 0:2] = [[-k / 2, 1.0], [-1.0, -k / 2]]
    expected[2:4, 2:4] = [[-ga / 2, 1.0], [-1.0, -ga / 2]]
    expected[4:6, 4:6] = [[-gm / 2, 1.0], [-1.0, -gm / 2]]
    np.testing.assert_array_equal(A, expected)


def test_fig2_coupling_entries():
    p = fig2(G_m=0.15, G_a=0.12, J_m=0.0)
    assert A1(p, 2, 5) == pytest.approx(0.3)
    assert A1(p, 6, 1) == pytest.approx(0.3)
    assert A1(p, 1, 4) == -0.12
    assert A1(p, 2, 3) == 0.12
    A = build_drift_matrix(p)
    assert np.all(A[2:4, 4:6] == 0) and np.all(A[4:6, 2:4] == 0)


def test_hopping_entries_at_quarter_phase():
    p = fig2(J_m=0.2, theta=math.pi / 2)
    for i, j, value in [(3, 5, 0.2), (4, 6, 0.2), (5, 3, -0.2), (6, 4, -0.2)]:
        assert A1(p, i, j) == pytest.approx(value, abs=1e-15)
    for i, j in [(3, 6), (4, 5), (5, 4), (6, 3)]:
        assert A1(p, i, j) == pytest.approx(0.0, abs=1e-15)


# --- quadrature / complex equivalence -------------------------------------


def complex_fluctuation_rhs(p: SystemParams, z):
    """Linearized Heisenberg-Langevin drift for (da1, dba, dbm), noise dropped."""
    a, ba, bm = z
    hop = p.J_m * np.exp(1j * p.theta)
    da = (1j * p.delta_tilde - p.kappa / 2) * a + 1j * p.G_m * (np.conj(bm) + bm) + 1j * p.G_a * ba
    dba = -(p.gamma_a / 2 + 1j * p.delta_a) * ba - 1j * hop * bm + 1j * p.G_a * a
    dbm = (
        -(p.gamma_m / 2 + 1j * p.omega_m) * bm
        - 1j * np.conj(hop) * ba
        + 1j * (p.G_m * a + p.G_m * np.conj(a))
    )
    return np.array([da, dba, dbm])


def to_quadratures(z):
    return np.sqrt(2) * np.column_stack([z.real, z.imag]).ravel()


def random_params(rng):
    return SystemParams(
        kappa=rng.uniform(1e-3, 1.0),
        gamma_m=rng.uniform(1e-5, 0.1),
        gamma_a=rng.uniform(1e-3, 1.0),
        delta_tilde=rng.uniform(-2, 2),
        delta_a=rng.uniform(-2, 2),
        G_m=rng.uniform(0, 0.5),
        G_a=rng.uniform(0, 0.5),
        J_m=rng.uniform(0, 0.5),
        theta=rng.uniform(-10, 10),
        n_th=rng.uniform(0, 500),
    )


def test_quadrature_map_matches_complex_equations():
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for _ in range(1000):
        p = random_params(rng)
        z = rng.normal(size=3) + 1j * rng.normal(size=3)
        lhs = build_drift_matrix(p) @ to_quadratures(z)
        rhs = to_quadratures(complex_fluctuation_rhs(p, z))
        worst = max(worst, np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs))
    assert worst < 1e-12


def test_drift_matches_finite_difference_jacobian():
    rng = np.random.default_rng(7)
    p = random_params(rng)

    def f(u):
        z = (u[0::2] + 1j * u[1::2]) / np.sqrt(2)
        return to_quadratures(complex_fluctuation_rhs(p, z))

    u0 = rng.normal(size=6)
    h = 1e-6
    J = np.column_stack([(f(u0 + h * e) - f(u0 - h * e)) / (2 * h) for e in np.eye(6)])
    np.testing.assert_allclose(J, build_drift_matrix(p), atol=1e-8)


@settings(max_examples=50, deadline=None)
@given(
    theta=st.floats(-20, 20),
    J=st.floats(0, 1),
    scale=st.floats(0, 3),
)
def test_theta_periodicity_and_linearity_in_J(theta, J, scale):
    base = fig2(theta=theta, J_m=J)
    np.testing.assert_allclose(
        build_drift_matrix(base), build_drift_matrix(base.replace(theta=theta + 2 * math.pi)), atol=1e-12
    )
    A0 = build_drift_matrix(base.replace(J_m=0.0))
    A1_ = build_drift_matrix(base)
    As = build_drift_matrix(base.replace(J_m=scale * J))
    np.testing.assert_allclose(As - A0, scale * (A1_ - A0), atol=1e-12)
    mask = np.ones((6, 6), bool)
    mask[2:4, 4:6] = mask[4:6, 2:4] = False
    assert np.all((A1_ - A0)[mask] == 0)


# --- diffusion --------------------------------------------------------------


def test_diffusion_zero_temperature():
    D = build_diffusion_matrix(fig2(n_th=0.0))
    np.testing.assert_allclose(np.diag(D), [0.01, 0.01, 0.2, 0.2, 5e-5, 5e-5], rtol=1e-15)
    assert np.count_nonzero(D - np.diag(np.diag(D))) == 0


def test_diffusion_thermal_mechanics():
    D = build_diffusion_matrix(fig2(n_th=100.0))
    assert D[4, 4] == pytest.approx(1.005e-2, rel=1e-14)
    assert D[5, 5] == pytest.approx(1.005e-2, rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(
    G_m=st.floats(0, 1),
    G_a=st.floats(0, 1),
    dt=st.floats(-3, 3),
    da=st.floats(-3, 3),
    J=st.floats(0, 1),
)
def test_diffusion_independent_of_couplings(G_m, G_a, dt, da, J):
    p = FIG2.replace(G_m=G_m, G_a=G_a, delta_tilde=dt, delta_a=da, J_m=J)
    D = build_diffusion_matrix(p)
    np.testing.assert_array_equal(D, build_diffusion_matrix(FIG2))
    assert np.all(np.diag(D) >= 0)


# --- validation -------------------------------------------------------------


@pytest.mark.parametrize(
    "field,value",
    [("kappa", 0.0), ("gamma_m", -1e-4), ("n_th", -1.0), ("J_m", -0.1), ("G_a", math.nan), ("theta", math.inf)],
)
def test_invalid_params_name_the_field(field, value):
    with pytest.raises(ParameterError) as info:
        fig2(**{field: value})
    assert info.value.param == field


def test_linear_model_is_read_only():
    model = linear_model(FIG2)
    assert isinstance(model, LinearModel)
    with pytest.raises(ValueError):
        model.A[0, 0] = 1.0


# --- mean fields ------------------------------------------------------------


def raw(**overrides):
    base = dict(
        g_m=1e-4,
        g_a=1e-4,
        E_1=1.0,
        E_2=1.0,
        delta_1=-1.0,
        delta_2=0.0,
        kappa_2=0.02,
        kappa=0.02,
        gamma_m=1e-4,
        gamma_a=0.4,
        delta_a=1.0,
    )
    base.update(overrides)
    return RawParams(**base)


def test_zero_optical_drive():
    r = raw(E_1=0.0, E_2=3.0, delta_2=0.3)
    mf = solve_mean_fields(r)
    assert mf.alpha_1 == 0 and mf.beta_a == 0 and mf.beta_m == 0
    assert mf.alpha_2 == pytest.approx(-3.0 / (1j * 0.3 - 0.01))
    eff = effective_params(r, mf)
    assert eff.G_m == 0 and eff.delta_tilde == r.delta_1


def test_single_mode_closed_form():
    r = raw(g_m=0.0, g_a=0.0, E_1=2.5, delta_1=-0.7)
    mf = solve_mean_fields(r)
    assert mf.alpha_1 == pytest.approx(2.5 / (0.01 + 0.7j), rel=1e-12)


def test_effective_coupling_definition():
    r = raw(E_2=1500 * 0.01)  # resonant control: |alpha_2| = E_2 / (kappa_2 / 2)
    mf = solve_mean_fields(r)
    assert abs(mf.alpha_2) == pytest.approx(1500, rel=1e-9)
    assert effective_params(r, mf).G_a == pytest.approx(0.15, rel=1e-9)


def mean_field_ode(r: RawParams):
    hop = r.J_m * np.exp(1j * r.theta)

    def rhs(t, y):
        a1, ba, bm = y[0::2] + 1j * y[1::2]
        delta_2 = r.delta_2 + 2 * r.g_m * bm.real
        a2 = r.E_2 / (r.kappa_2 / 2 - 1j * delta_2)
        G_a = r.g_a * a2
        d1 = (1j * (r.delta_1 - 2 * r.g_m * bm.real) - r.kappa / 2) * a1 + 1j * G_a * ba + r.E_1
        da = -(r.gamma_a / 2 + 1j * r.delta_a) * ba - 1j * hop * bm + 1j * G_a * a1
        dm = -(r.gamma_m / 2 + 1j * r.omega_m) * bm - 1j * np.conj(hop) * ba + 1j * r.g_m * abs(a1) ** 2
        d = np.array([d1, da, dm])
        return np.column_stack([d.real, d.imag]).ravel()

    return rhs


@pytest.mark.parametrize("J,theta", [(0.0, 0.0), (0.05, 1.1)])
def test_mean_fields_match_long_time_integration(J, theta):
    # weak enough drive that the fixed point is an attractor of the ODE
    r = raw(g_m=1e-3, g_a=1e-3, E_1=20.0, E_2=1.0, gamma_m=0.1, J_m=J, theta=theta)
    mf = solve_mean_fields(r)
    rhs = mean_field_ode(r)
    sol = solve_ivp(rhs, (0, 1e3 / r.gamma_m), np.zeros(6), method="DOP853", rtol=1e-12, atol=1e-14)
    y = sol.y[:, -1]
    assert np.max(np.abs(rhs(0.0, y))) < 1e-10
    ref = y[0::2] + 1j * y[1::2]
    got = np.array([mf.alpha_1, mf.beta_a, mf.beta_m])
    assert np.all(np.abs(got - ref) <= 1e-8 * np.abs(ref) + 1e-14)


def test_calibrate_drives_round_trip():
    r = calibrate_drives(raw(), 0.15, 0.15)
    eff = effective_params(r, solve_mean_fields(r))
    assert eff.G_m == pytest.approx(0.15, rel=1e-8)
    assert eff.G_a == pytest.approx(0.15, rel=1e-8)
    assert abs(control_amplitude(r, solve_mean_fields(r).beta_m)) == pytest.approx(1500, rel=1e-8)


def test_calibrate_rejects_nonpositive_target():
    with pytest.raises(ValueError):
        calibrate_drives(raw(), 0.0, 0.15)
