from decimal import Decimal, getcontext

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from kgres.model import (
    ALL_MODES,
    BRANCHES,
    FAMILIES,
    ModelParams,
    ModelParamsError,
    ModeSpec,
    char_matrix,
    constant_symbol,
    dispersion,
    group_velocity,
    harmonic_kernel_projector,
    kernel_vector,
    partial_inverse,
    projector,
    solve_phase,
)

RUNNING = ModelParams()
RNG = np.random.default_rng(7)
XI = RNG.uniform(-12, 12, 50)

params_st = st.builds(
    ModelParams,
    theta0=st.floats(0.01, 0.99),
    alpha0=st.floats(2.501, 2.999),
    omega0=st.floats(0.05, 20.0),
)


def decimal_phase(theta0, alpha0, omega0):
    getcontext().prec = 40
    t, a, w = Decimal(theta0), Decimal(alpha0), Decimal(omega0)
    k = w * ((1 - a * a / 9) / (1 - t * t)).sqrt()
    omega = (t * t * k * k + w * w).sqrt()
    return k, omega


def test_dispersion_at_zero():
    assert dispersion(RUNNING, "L", 0.0) == pytest.approx(2.7)
    assert dispersion(RUNNING, "M", 0.0) == pytest.approx(1.0)


def test_running_phase_against_extended_precision():
    k, omega = decimal_phase(0.5, 2.7, 1.0)
    ph = solve_phase(RUNNING)
    assert_allclose(ph.k, float(k), rtol=1e-14)
    assert_allclose(ph.omega, float(omega), rtol=1e-14)
    assert_allclose(dispersion(RUNNING, "M", ph.k), float(omega), rtol=1e-14)
    assert_allclose(dispersion(RUNNING, "L", 3 * ph.k), 3 * float(omega), rtol=1e-14)
    assert ph.k == pytest.approx(0.5033223, abs=1e-7)
    assert ph.omega == pytest.approx(1.0311805, abs=1e-7)


def test_group_velocity_limits():
    assert group_velocity(RUNNING, "L", 0.0) == 0.0
    assert_allclose(group_velocity(RUNNING, "M", 1e6), 0.5, rtol=1e-6)
    k3 = 3 * solve_phase(RUNNING).k
    h = 1e-6
    fd = (dispersion(RUNNING, "L", k3 + h) - dispersion(RUNNING, "L", k3 - h)) / (2 * h)
    assert_allclose(group_velocity(RUNNING, "L", k3), fd, rtol=1e-6)


def test_phase_homogeneous_in_omega0():
    base = solve_phase(RUNNING)
    scaled = solve_phase(ModelParams(omega0=3.5))
    assert_allclose([scaled.k, scaled.omega], [3.5 * base.k, 3.5 * base.omega], rtol=1e-14)


def test_phase_wavenumber_vanishes_at_alpha_three():
    ks = [solve_phase(ModelParams(alpha0=a)).k for a in (2.9, 2.99, 2.999)]
    assert ks[0] > ks[1] > ks[2] > 0
    assert ks[2] < 0.03


@pytest.mark.parametrize(
    "kw",
    [dict(alpha0=2.0), dict(alpha0=3.0), dict(theta0=1.0), dict(theta0=0.0), dict(omega0=0.0), dict(epsilon=0.0), dict(epsilon=1.0)],
)
def test_params_rejected(kw):
    with pytest.raises(ModelParamsError):
        ModelParams(**kw)


def test_outside_regime_flag():
    assert ModelParams(alpha0=2.0, allow_outside_regime=True).alpha0 == 2.0


def test_characteristic_variety():
    for fam in FAMILIES:
        for b in ("+", "-"):
            tau = (1 if b == "+" else -1) * dispersion(RUNNING, fam, XI)
            assert np.max(np.abs(np.linalg.det(char_matrix(RUNNING, fam, tau, XI)))) < 1e-12 * np.max(np.abs(tau)) ** 3
    ph = solve_phase(RUNNING)
    assert abs(np.linalg.det(char_matrix(RUNNING, "M", ph.omega, ph.k))) < 1e-14


def test_zero_frequency_kernel():
    A = char_matrix(RUNNING, "L", 0.0, 0.0)
    assert_allclose(A @ np.array([1, 0, 0]), 0.0, atol=1e-15)
    assert np.linalg.matrix_rank(A) == 2
    assert_allclose(projector(RUNNING, ModeSpec("L", "0"), 0.0), np.diag([1, 0, 0]), atol=1e-15)


@pytest.mark.parametrize("fam", FAMILIES)
def test_projector_suite(fam):
    xi = RNG.uniform(-20, 20, 200)
    P = {b: projector(RUNNING, ModeSpec(fam, b), xi) for b in BRANCHES}
    eye = np.eye(3)
    assert_allclose(P["+"] + P["-"] + P["0"], np.broadcast_to(eye, (200, 3, 3)), atol=1e-12)
    for b, Pb in P.items():
        assert_allclose(Pb, np.conj(np.swapaxes(Pb, -1, -2)), atol=1e-12)
        assert_allclose(Pb @ Pb, Pb, atol=1e-12)
        assert_allclose(np.trace(Pb, axis1=1, axis2=2), 1.0, atol=1e-12)
        for c in BRANCHES:
            if c != b:
                assert np.max(np.abs(Pb @ P[c])) < 1e-12


@pytest.mark.parametrize("mode", ALL_MODES, ids=lambda m: m.family + m.branch)
def test_kernel_vector_residual(mode):
    tau = {"+": 1, "-": -1, "0": 0}[mode.branch] * dispersion(RUNNING, mode.family, XI)
    A = char_matrix(RUNNING, mode.family, tau, XI)
    w = kernel_vector(RUNNING, mode, XI)
    assert np.max(np.abs(np.einsum("nij,nj->ni", A, w))) < 1e-12


def test_second_harmonic_inverse_is_true_inverse():
    ph = solve_phase(RUNNING)
    assert np.max(np.abs(harmonic_kernel_projector(RUNNING, ph, "M", 2))) == 0.0
    A = char_matrix(RUNNING, "M", 2 * ph.omega, 2 * ph.k)
    assert_allclose(A @ partial_inverse(RUNNING, ph, "M", 2), np.eye(3), atol=1e-12)


@pytest.mark.parametrize("fam,p", [("M", 1), ("L", 3)])
def test_partial_inverse_on_resonant_harmonic(fam, p):
    ph = solve_phase(RUNNING)
    A = char_matrix(RUNNING, fam, p * ph.omega, p * ph.k)
    Q = harmonic_kernel_projector(RUNNING, ph, fam, p)
    assert np.trace(Q).real == pytest.approx(1.0)
    assert_allclose(partial_inverse(RUNNING, ph, fam, p) @ A, np.eye(3) - Q, atol=1e-12)


@given(xi=st.floats(-50, 50), fam=st.sampled_from(FAMILIES))
def test_spectral_reconstruction(xi, fam):
    S = constant_symbol(RUNNING, fam, xi)
    lam = dispersion(RUNNING, fam, xi)
    P = {b: projector(RUNNING, ModeSpec(fam, b), xi) for b in BRANCHES}
    assert_allclose(S, 1j * lam * (P["+"] - P["-"]), atol=1e-12 * max(1.0, lam))


@given(xi=st.floats(-50, 50), fam=st.sampled_from(FAMILIES))
def test_dispersion_even_group_velocity_odd(xi, fam):
    assert dispersion(RUNNING, fam, -xi) == dispersion(RUNNING, fam, xi)
    assert group_velocity(RUNNING, fam, -xi) == -group_velocity(RUNNING, fam, xi)


@settings(max_examples=100)
@given(params=params_st)
def test_phase_identities_hold_on_parameter_box(params):
    ph = solve_phase(params)
    assert ph.k > 0 and ph.omega > 0
    assert_allclose(dispersion(params, "M", ph.k), ph.omega, rtol=1e-12)
    assert_allclose(dispersion(params, "L", 3 * ph.k), 3 * ph.omega, rtol=1e-12)
