from dataclasses import replace

import numpy as np
import pytest
import scipy.fft as sfft
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from kgres import harness
from kgres.grid import Grid1D, carrier_grid
from kgres.harness import (
    BumpSpec,
    ExperimentConfig,
    FitError,
    GaussianSpec,
    RateFitReport,
    T0_star,
    _prepare,
    _reference,
    build_perturbation,
    carrier_frequency,
    control_experiment,
    epsilon_sweep,
    fit_rate,
    growth_index,
    horizon,
    instability_experiment,
    slow_time,
)
from kgres.interaction import select_xi0
from kgres.model import ModeSpec, ModelParams, projector, solve_phase
from kgres.solver import FieldState, SolverConfig, run, toy_run
from kgres.symflow import default_radius, resonance_sets

P = ModelParams(epsilon=1e-2)
PH = solve_phase(P)
SMALL = ExperimentConfig(params=P, n_points=2048, precision="leading", n_records=30)


def test_growth_index_and_horizon():
    G1, x0 = growth_index(P, PH, GaussianSpec())
    assert G1 == pytest.approx(0.3406496, abs=1e-7)
    assert x0 == pytest.approx(0.0, abs=1e-12)
    assert T0_star(1.0, G1) == pytest.approx(np.sqrt(0.5 / G1))
    H = horizon(SMALL, G1)
    assert G1 * slow_time(H, P.epsilon) == pytest.approx(1.6**2 * 0.25 * abs(np.log(P.epsilon)), rel=1e-12)
    with pytest.raises(ValueError):
        horizon(SMALL, 0.0)
    assert horizon(replace(SMALL, horizon_override=0.5), 0.0) == 0.5


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(K=0.7)
    with pytest.raises(ValueError):
        ExperimentConfig(fit_window=(0.9, 0.3))
    with pytest.raises(ValueError):
        ExperimentConfig(carrier="nearby")


def test_bump_profile():
    b = BumpSpec(center=0.3, radius=0.4)
    assert b(0.3) == 1.0 and b(0.45) == 1.0 and b(0.71) == 0.0


def test_perturbation_structure():
    grid = carrier_grid(PH.k, P.epsilon, 8.0, 2048)
    du, info = build_perturbation(SMALL, PH, grid)
    eta = info["carrier_rescaled"]
    e0 = info["e0"]
    assert_allclose(projector(P, ModeSpec("L", "+"), eta) @ e0, e0, atol=1e-12)
    assert grid.is_on_grid(info["carrier_wavenumber"])
    assert abs(info["snap_offset"]) <= 0.5 * grid.dk * P.epsilon + 1e-15
    assert abs(info["snap_offset"]) < default_radius(P, PH)
    assert_allclose(grid.l2_norm(du), P.epsilon * np.sqrt(2 * np.sum(BumpSpec()(grid.x) ** 2) * grid.dx), rtol=1e-3)
    du_big_K, _ = build_perturbation(replace(SMALL, K=60.0), PH, grid)
    assert np.max(np.abs(du_big_K)) < 1e-100
    _, orth = build_perturbation(replace(SMALL, polarization="orthogonal"), PH, grid)
    assert abs(np.vdot(orth["e0"], e0)) < 1e-12


def test_off_resonance_carrier_avoids_all_windows():
    cfg = replace(SMALL, carrier="off_resonance")
    xi = carrier_frequency(cfg, PH)
    xi0, _ = select_xi0(P, PH)
    h = default_radius(P, PH)
    assert abs(abs(xi - xi0) - 10 * h) < 1e-12
    pts = np.concatenate([np.asarray(v) for v in resonance_sets(P, PH).values()])
    assert np.min(np.abs(pts - xi)) > 2 * h


def test_fit_rate_on_synthetic_gaussian_growth():
    eps, a, b = 1e-3, 0.37, -4.0
    t = np.linspace(0, 1, 101)
    d = np.exp(a * slow_time(t, eps) + b)
    rep = fit_rate(t, d, eps, 1.0, a, saturation=np.inf)
    assert abs(rep.slope_fitted - a) < 1e-10
    assert rep.verdict == "pass" and not rep.saturated


def test_fit_rate_shrinks_before_saturation():
    eps = 1e-2
    t = np.linspace(0, 1, 201)
    d = np.minimum(1e-3 * np.exp(2.0 * slow_time(t, eps)), 0.05)
    rep = fit_rate(t, d, eps, 1.0, 2.0, saturation=0.04)
    assert rep.saturated and rep.fit_window[1] < 0.65
    assert rep.slope_fitted == pytest.approx(2.0, rel=1e-8)
    with pytest.raises(FitError):
        fit_rate(t, np.full_like(t, 1.0), eps, 1.0, 0.3)


def test_fit_pipeline_on_toy_model():
    eps, carrier = 1e-2, 0.8
    times, hist = toy_run(np.array([1.0 + 0j]), np.array([carrier]), eps, 1e-3, 1.0, stride=10)
    d = np.abs(hist[:, 0])
    rep = fit_rate(times, d, eps, 1.0, carrier, saturation=np.inf)
    assert abs(rep.slope_fitted - carrier) < 1e-6


def test_report_serialization():
    rep = RateFitReport(1e-2, 0.34, 0.3, (0.1, 0.9), 12.0, False, "pass")
    d = rep.to_dict()
    assert d["ratio"] == pytest.approx(0.3 / 0.34) and d["verdict"] == "pass"


@pytest.fixture(scope="module")
def small_run():
    return instability_experiment(SMALL, with_floor=True)


def test_initial_deviation_is_the_perturbation(small_run):
    grid = carrier_grid(PH.k, P.epsilon, 8.0, 2048)
    du, _ = build_perturbation(SMALL, PH, grid)
    assert small_run.deviation[0] == pytest.approx(grid.l2_norm(du), rel=1e-12)
    assert small_run.floor[0] < 1e-14


def test_small_run_grows(small_run):
    rep = small_run.report
    assert small_run.failure is None
    assert rep.amplification_factor > 5
    assert 0.5 * small_run.Gamma1 < rep.slope_fitted < 1.5 * small_run.Gamma1
    cols = small_run.columns()
    assert set(cols) == {"t", "tau", "deviation", "l2", "floor"}


def test_zero_datum_does_not_grow(small_run):
    cfg = replace(SMALL, v0=GaussianSpec(height=0.0), horizon_override=small_run.horizon)
    res = instability_experiment(cfg)
    d = np.asarray(res.deviation)
    assert np.max(d) / d[0] < 2


def test_perturbation_growth_concentrates_at_carrier():
    st_ = _prepare(SMALL)
    reference = _reference(SMALL, st_)
    du, info = build_perturbation(SMALL, st_.phase, st_.grid)
    u, v = reference(0.0)
    t_end = st_.n_steps * st_.dt
    finals = []
    for init in (u + du, u):
        res = run(FieldState(init, v), SolverConfig(st_.grid, st_.dt, t_end, stride=st_.n_steps), P)
        finals.append(res.final.u)
    spec = np.sum(np.abs(sfft.rfft(finals[0] - finals[1], axis=0)) ** 2, axis=1)
    h = default_radius(P, PH) / P.epsilon
    near = np.abs(st_.grid.xi_r - info["carrier_wavenumber"]) <= h
    assert spec[near].sum() > 0.5 * spec.sum()


def test_sweep_plumbing(monkeypatch):
    seen = []

    def fake(cfg, with_floor=False):
        seen.append(cfg.epsilon)
        rep = RateFitReport(cfg.epsilon, 0.34, 0.34 * (1 - cfg.epsilon), (0, 1), 20.0, False, "pass")
        return harness.ExperimentResult(cfg, rep, [0.0], [1.0], [1.0], 1.0, 0.34, {})

    monkeypatch.setattr(harness, "instability_experiment", fake)
    out = epsilon_sweep(SMALL, [1e-3, 1e-2, 3e-3])
    assert seen == [1e-2, 3e-3, 1e-3]
    assert out["non_degrading"] is True
    single = epsilon_sweep(SMALL, [1e-2])
    assert single["non_degrading"] is None and len(single["results"]) == 1


def test_control_kind_rejected():
    with pytest.raises(ValueError):
        control_experiment(SMALL, "sideways")


@settings(max_examples=40)
@given(a=st.floats(0.01, 2.0), b=st.floats(-10, 0), eps=st.sampled_from([1e-2, 3e-3, 1e-3]))
def test_rate_fit_recovers_synthetic_slope(a, b, eps):
    t = np.linspace(0, 1, 61)
    d = np.exp(a * slow_time(t, eps) + b)
    rep = fit_rate(t, d, eps, 1.0, a, saturation=np.inf)
    assert abs(rep.slope_fitted - a) < 1e-10 * max(1.0, a)
