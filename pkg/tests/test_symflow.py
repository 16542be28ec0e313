import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from kgres.interaction import ResonanceError, gamma1, resonance_pair
from kgres.model import ModelParams, solve_phase
from kgres.symflow import (
    CSV_HEADER,
    CutoffWindow,
    FlowError,
    FlowMatrix,
    FlowSetup,
    build_M0,
    closed_form_flow,
    coupling_blocks,
    default_radius,
    eigvals_list,
    eigvals_M0,
    flow_norm_history,
    flow_variants,
    gaussian_dtg,
    growth_envelope_audit,
    integrate_flow,
    nilpotent_bound_audit,
    resonance_sets,
    smoothstep,
    stratified_samples,
    write_envelope_csv,
)

P = ModelParams(epsilon=1e-2)
PH = solve_phase(P)
XI0, XI0R = resonance_pair(P, PH)
DTG = gaussian_dtg(P, PH)


def setup(kind="pp", eps=1e-2, **kw):
    p = ModelParams(epsilon=eps)
    return FlowSetup(p, PH, DTG, kind=kind, **kw)


def test_smoothstep_and_window():
    assert smoothstep(0.0) == 0.0 and smoothstep(1.0) == 1.0 and smoothstep(0.5) == pytest.approx(0.5)
    w = CutoffWindow((0.0, 3.0), 1.0)
    assert w(0.4) == 1.0 and w(1.2) == 0.0 and 0 < w(0.75) < 1
    assert w.distance(2.5) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        CutoffWindow((0.0, 1.5), 1.0)


def test_default_radius():
    pts = np.sort(np.concatenate([np.asarray(v) for v in resonance_sets(P, PH).values()]))
    assert default_radius(P, PH) == pytest.approx(0.1 * np.min(np.diff(pts)))
    assert default_radius(P, PH) == pytest.approx(0.08389, abs=1e-5)


def test_outside_window_is_decoupled():
    s = setup()
    xi = XI0 + 2 * s.radius
    b12, b21 = coupling_blocks(s, 0.0, xi)
    assert not np.any(b12) and not np.any(b21)
    S = integrate_flow(s, 0.0, xi, 0.0, 2.0).S
    assert_allclose(np.linalg.norm(S), np.sqrt(6), rtol=1e-14)
    lam1, mu = s.frequencies(xi)
    expected = np.diag(np.exp(-1j * np.repeat([lam1, mu], 3) * 2.0 / s.epsilon**0.75))
    assert_allclose(S, expected, atol=1e-12)


def test_zero_growth_rate_decouples():
    s = FlowSetup(P, PH, lambda x: 0.0 * np.asarray(x), kind="pp")
    b12, b21 = coupling_blocks(s, 0.0, XI0)
    assert not np.any(b12) and not np.any(b21)


@pytest.mark.parametrize("kind", ["pp", "mm"])
def test_trace_identity(kind):
    s = setup(kind)
    for xi in np.linspace(-s.radius, s.radius, 7) + s.chi.centers[0]:
        for x in (0.0, 0.3, -1.1):
            b12, b21 = coupling_blocks(s, x, xi)
            expected = abs(s.chi(xi) * DTG(x)) ** 2 * s.trace_shape(xi)
            assert abs(np.trace(b12 @ b21) - expected) < 1e-12
            assert np.linalg.matrix_rank(b12, tol=1e-12) <= 1 and np.linalg.matrix_rank(b21, tol=1e-12) <= 1


def test_eigenvalues_without_coupling():
    fm = FlowMatrix(0.7, -0.2, np.zeros((3, 3)), np.zeros((3, 3)), 1e-2, 1.0)
    ev = np.sort_complex(eigvals_list(fm))
    assert_allclose(ev, np.sort_complex(np.array([0.7j] * 3 + [-0.2j] * 3)), atol=1e-14)


def test_resonant_eigenvalue_split():
    s = setup()
    fm = build_M0(s, 0.0, XI0, 2.0)
    assert fm.lambda1 == pytest.approx(fm.mu, abs=1e-12)
    ev = eigvals_M0(fm)
    split = s.epsilon**0.75 * 2.0 * np.sqrt(abs(DTG(0.0)) ** 2 * gamma1(P, PH, XI0))
    assert_allclose(ev["nu+"][0], 1j * fm.lambda1 + split, atol=1e-12)
    assert_allclose(ev["nu-"][0], 1j * fm.lambda1 - split, atol=1e-12)


def test_eigenvalues_against_dense_solver():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(1000):
        kind = rng.choice(["pp", "mm", "p0", "m0"])
        s = setup(kind)
        c = rng.choice(s.chi.centers)
        fm = build_M0(s, rng.uniform(-2, 2), c + rng.uniform(-1, 1) * s.radius, rng.uniform(0, 5))
        dense = np.linalg.eigvals(fm.matrix())
        ours = eigvals_list(fm)
        for v in ours:
            worst = max(worst, np.min(np.abs(dense - v)))
    assert worst < 1e-10


@pytest.mark.parametrize("eps", [1e-2, 1e-3])
@pytest.mark.parametrize("kind", ["pp", "mm"])
def test_closed_form_resonant_flow(kind, eps):
    s = setup(kind, eps)
    for c in s.chi.centers:
        times = np.linspace(0, 3.0, 7)
        from kgres.symflow import integrate_path

        S = integrate_path(s, 0.0, c, times)
        for t, St in zip(times, S):
            C = closed_form_flow(s, 0.0, c, t)
            assert np.linalg.norm(St - C) <= 1e-6 * np.linalg.norm(C)


def test_closed_form_requires_resonance():
    with pytest.raises(ResonanceError):
        closed_form_flow(setup(), 0.0, XI0 + 0.05, 1.0)


def test_horizon_guard():
    s = setup()
    with pytest.raises(FlowError):
        integrate_flow(s, 0.0, XI0, 0.0, s.horizon * 1.01)


def test_unitary_similarity_leaves_norm_unchanged():
    s = setup()
    S = integrate_flow(s, 0.0, XI0 + 0.3 * s.radius, 0.0, 3.0).S
    rng = np.random.default_rng(0)
    Q1, _ = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    Q2, _ = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    G = np.zeros((6, 6), complex)
    G[:3, :3], G[3:, 3:] = Q1, Q2
    assert_allclose(np.linalg.norm(G @ S @ G.conj().T, 2), np.linalg.norm(S, 2), rtol=1e-12)


def test_resonant_envelope_matches_growth_index():
    s = setup()
    x0 = 0.0
    times = np.linspace(0, s.horizon, 61)[1:]
    from kgres.symflow import fit_envelope

    norms = flow_norm_history(s, x0, XI0, times)
    sel = times >= 0.6 * times[-1]
    a, _, _ = fit_envelope(times[sel], np.log(norms[sel]))
    target = abs(DTG(x0)) * np.sqrt(gamma1(P, PH, XI0))
    assert abs(a / target - 1) < 0.01


def test_opposite_family_reproduces_rate():
    s_pp, s_mm = setup("pp"), setup("mm")
    times = np.linspace(0, s_pp.horizon, 61)[1:]
    n_pp = flow_norm_history(s_pp, 0.0, XI0, times)
    n_mm = flow_norm_history(s_mm, 0.0, -XI0, times)
    assert_allclose(n_mm, n_pp, rtol=1e-6)


def test_zero_branch_flow_is_pure_phase_without_coupling():
    s = FlowSetup(P, PH, lambda x: 0.0 * np.asarray(x), kind="p0")
    S = integrate_flow(s, 0.0, -6 * PH.k, 0.0, 2.0).S
    assert_allclose(np.abs(np.diag(S)), 1.0, atol=1e-14)


@pytest.mark.parametrize("kind", ["p0", "m0"])
def test_nilpotent_flows_grow_at_most_polynomially(kind):
    s = setup(kind)
    audit = nilpotent_bound_audit(s, 0.0, s.chi.centers[0])
    assert audit.a < 0.1 * audit.b_tilde_plus
    assert all(audit.bound_holds.values())


def test_flow_variants_entry_point():
    st_ = flow_variants("pp", P, 0.0, XI0, 0.0, 1.0)
    assert st_.S.shape == (6, 6) and st_.t == 1.0


def test_envelope_audit_small(tmp_path):
    s = setup()
    samples = stratified_samples(s, n=20, seed=1)
    assert {x.regime for x in samples} == {"resonant", "coalescence", "away", "small_trace", "decoupled"}
    rows = growth_envelope_audit(s, samples)
    assert all(r.passed and r.rough_ok for r in rows)
    write_envelope_csv(rows, str(tmp_path / "env.csv"))
    lines = (tmp_path / "env.csv").read_text().splitlines()
    assert lines[0] == CSV_HEADER and len(lines) == 21


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(-2, 2), b=st.floats(-2, 2), c=st.floats(-2, 2), d=st.floats(-2, 2),
    p=st.floats(-1, 1), q=st.floats(-1, 1),
)
def test_block_determinant_identity_for_commuting_blocks(a, b, c, d, p, q):
    # commuting blocks as polynomials in one fixed matrix
    N = np.array([[0.0, 1.0, 0.3], [0.2, -0.5, 1.0], [1.0, 0.0, 0.4]])
    I = np.eye(3)
    A, B, C, D = a * I + p * N, b * I + q * N @ N, c * I + N, d * I - q * N
    lhs = np.linalg.det(np.block([[A, B], [C, D]]))
    rhs = np.linalg.det(A @ D - C @ B)
    assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))


@settings(max_examples=30, deadline=None)
@given(x=st.floats(-2, 2), frac=st.floats(-1, 1), t=st.floats(0, 5), kind=st.sampled_from(["pp", "mm", "p0", "m0"]))
def test_eigenvalue_pair_sum(x, frac, t, kind):
    s = setup(kind)
    fm = build_M0(s, x, s.chi.centers[0] + frac * s.radius, t)
    ev = eigvals_M0(fm)
    assert_allclose(ev["nu+"][0] + ev["nu-"][0], 1j * (fm.lambda1 + fm.mu), atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(frac=st.floats(1.01, 3.0), t=st.floats(0.1, 3.0))
def test_decoupled_flow_preserves_norm(frac, t):
    s = setup()
    S = integrate_flow(s, 0.0, XI0 + frac * s.radius, 0.0, t).S
    assert_allclose(S.conj().T @ S, np.eye(6), atol=1e-12)
