"""Instability experiments: perturb the approximate solution at the resonant frequency, run the
full solver, and fit the Gaussian-in-time growth of the deviation."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from .grid import Grid1D, carrier_grid
from .interaction import dt_g_at_zero, gamma1, polarization_vector, select_xi0
from .model import ModelParams, ModeSpec, Phase, kernel_vector, solve_phase
from .solver import FieldState, SolverConfig, run
from .symflow import default_radius, resonance_sets, smoothstep
from .wkb import WKBSolution, cascade_init, evaluate_wkb, transport_history

CARRIERS = ("resonant", "off_resonance")
POLARIZATIONS = ("resonant", "orthogonal")


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class GaussianSpec:
    center: float = 0.0
    width: float = 1.0
    height: float = 1.0

    def __call__(self, x):
        return self.height * np.exp(-(((np.asarray(x, float) - self.center) / self.width) ** 2))


@dataclass(frozen=True)
class BumpSpec:
    """Quintic bump equal to 1 on |x - center| <= radius/2 and 0 beyond radius."""

    center: float = 0.0
    radius: float = 0.4

    def __call__(self, x):
        return smoothstep((self.radius - np.abs(np.asarray(x, float) - self.center)) / (0.5 * self.radius))


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams = field(default_factory=ModelParams)
    v0: GaussianSpec = field(default_factory=GaussianSpec)
    bump: BumpSpec = field(default_factory=BumpSpec)
    K: float = 1.0
    precision: str = "extended"
    T0_factor: float = 1.6
    n_points: int = 2**14
    approx_length: float = 8.0
    amplitude_points: int = 256
    dt_factor: float = 0.1
    transport_dt: float = 0.01
    n_records: int = 60
    fit_window: tuple = (0.3, 0.9)
    carrier: str = "resonant"
    polarization: str = "resonant"
    off_resonance_multiple: float = 10.0
    blowup: float = 1e6
    horizon_override: Optional[float] = None

    def __post_init__(self):
        if self.K <= 0.75:
            raise ValueError("K must exceed 3/4")
        if self.carrier not in CARRIERS or self.polarization not in POLARIZATIONS:
            raise ValueError("unknown carrier or polarization")
        lo, hi = self.fit_window
        if not 0 <= lo < hi <= 1:
            raise ValueError("fit_window must satisfy 0 <= lo < hi <= 1")

    @property
    def epsilon(self) -> float:
        return self.params.epsilon


@dataclass
class RateFitReport:
    epsilon: float
    Gamma1_predicted: float
    slope_fitted: float
    fit_window: tuple
    amplification_factor: float
    saturated: bool
    verdict: str

    @property
    def ratio(self) -> float:
        return self.slope_fitted / self.Gamma1_predicted

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ratio"] = self.ratio
        return d


def growth_index(params: ModelParams, phase: Phase, v0: GaussianSpec, xs=None) -> tuple[float, float]:
    """(Gamma1, x0): max |dt g(0,x)| sqrt(gamma1(xi0)) for the Gaussian datum and the maximizing x."""
    xs = np.linspace(v0.center - 4 * v0.width, v0.center + 4 * v0.width, 4001) if xs is None else xs
    e1 = polarization_vector(params, phase, 1)
    dtg = dt_g_at_zero(params, phase, v0(xs)[:, None] * e1)
    i = int(np.argmax(np.abs(dtg)))
    xi0, _ = select_xi0(params, phase)
    return float(np.abs(dtg[i]) * np.sqrt(gamma1(params, phase, xi0))), float(xs[i])


def T0_star(K: float, Gamma1: float) -> float:
    return float(np.sqrt(2.0 * (K - 0.75) / Gamma1))


def horizon(cfg: ExperimentConfig, Gamma1: float) -> float:
    if cfg.horizon_override is not None:
        return float(cfg.horizon_override)
    if Gamma1 <= 0:
        raise ValueError("the datum does not excite the resonance (Gamma1 = 0); set horizon_override")
    eps = cfg.epsilon
    return cfg.T0_factor * T0_star(cfg.K, Gamma1) * eps**0.25 * np.sqrt(abs(np.log(eps)))


def slow_time(t, epsilon: float):
    return np.asarray(t, float) ** 2 / (2.0 * np.sqrt(epsilon))


def carrier_frequency(cfg: ExperimentConfig, phase: Phase) -> float:
    """Rescaled frequency of the perturbation before the shift by 3k."""
    xi0, _ = select_xi0(cfg.params, phase)
    if cfg.carrier == "resonant":
        return xi0
    h = default_radius(cfg.params, phase)
    pts = np.concatenate([np.asarray(v) for v in resonance_sets(cfg.params, phase).values()])
    for sign in (1.0, -1.0):
        xi = xi0 + sign * cfg.off_resonance_multiple * h
        if np.min(np.abs(pts - xi)) > 2 * h:
            return xi
    raise ValueError("no off-resonance carrier at the requested distance")


def build_perturbation(cfg: ExperimentConfig, phase: Phase, grid: Grid1D) -> tuple[np.ndarray, dict]:
    """eps^K * 2 Re(exp(i xi x / eps) Psi(x) e0) in the u-block, with xi snapped to the grid."""
    eps = cfg.epsilon
    xi_c = carrier_frequency(cfg, phase) + 3 * phase.k
    wavenumber = grid.snap(xi_c / eps)
    eta = eps * wavenumber
    branch = "+" if cfg.polarization == "resonant" else "-"
    e0 = kernel_vector(cfg.params, ModeSpec("L", branch), eta)
    e0 = e0 / np.linalg.norm(e0)
    du = cfg.epsilon**cfg.K * 2.0 * np.real(np.exp(1j * wavenumber * grid.x)[:, None] * cfg.bump(grid.x)[:, None] * e0)
    info = {"carrier_wavenumber": wavenumber, "carrier_rescaled": eta, "snap_offset": eta - xi_c, "e0": e0}
    return du, info


def fit_rate(
    times,
    deviation,
    epsilon: float,
    horizon_t: float,
    Gamma1: float,
    window=(0.3, 0.9),
    saturation: Optional[float] = None,
    min_points: int = 5,
) -> RateFitReport:
    """Slope of ln d against t^2/(2 sqrt eps) on window*horizon, shrunk before saturation."""
    t = np.asarray(times, float)
    d = np.asarray(deviation, float)
    sat = epsilon**0.25 if saturation is None else saturation
    sel = (t >= window[0] * horizon_t - 1e-12) & (t <= window[1] * horizon_t + 1e-12)
    saturated = bool(np.any(d[sel] > sat))
    if saturated:
        first = np.argmax(sel & (d > sat))
        sel &= np.arange(t.size) < first
    if np.count_nonzero(sel) < min_points:
        raise FitError(f"only {np.count_nonzero(sel)} points in the fit window")
    slope = float(np.polyfit(slow_time(t[sel], epsilon), np.log(d[sel]), 1)[0])
    end = np.argmin(np.abs(t - horizon_t))
    amp = float(d[end] / d[0])
    ok = 0.6 * Gamma1 <= slope <= 1.4 * Gamma1 and amp >= 10.0
    return RateFitReport(
        epsilon, Gamma1, slope, (float(t[sel][0]), float(t[sel][-1])), amp, saturated, "pass" if ok else "fail"
    )


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    report: Optional[RateFitReport]
    times: list
    deviation: list
    l2: list
    horizon: float
    Gamma1: float
    perturbation: dict
    floor: Optional[list] = None
    failure: Optional[str] = None
    runtime: float = 0.0

    def columns(self) -> dict:
        cols = {"t": self.times, "tau": list(slow_time(self.times, self.config.epsilon)), "deviation": self.deviation, "l2": self.l2}
        if self.floor is not None:
            cols["floor"] = self.floor
        return cols


@dataclass
class _Setup:
    phase: Phase
    grid: Grid1D
    wkb0: WKBSolution
    dt: float
    n_steps: int
    stride: int
    Gamma1: float
    x0: float
    horizon: float


def _prepare(cfg: ExperimentConfig) -> _Setup:
    params, eps = cfg.params, cfg.epsilon
    phase = solve_phase(params)
    Gamma1, x0 = growth_index(params, phase, cfg.v0)
    H = horizon(cfg, Gamma1)
    grid = carrier_grid(phase.k, eps, cfg.approx_length, cfg.n_points)
    agrid = Grid1D(grid.length, cfg.amplitude_points)
    dt = cfg.dt_factor * eps
    n_steps = int(np.ceil(H / dt - 1e-9))
    stride = max(1, n_steps // cfg.n_records)
    e1 = polarization_vector(params, phase, 1)
    wkb0 = cascade_init(params, phase, agrid, cfg.v0(agrid.x)[:, None] * e1, T=n_steps * dt * (1 + 1e-9), precision=cfg.precision)
    return _Setup(phase, grid, wkb0, dt, n_steps, stride, Gamma1, x0, H)


def _reference(cfg: ExperimentConfig, st: _Setup):
    times = [i * st.dt for i in range(0, st.n_steps + 1, st.stride)]
    if st.n_steps % st.stride:
        times.append(st.n_steps * st.dt)
    hist = transport_history(st.wkb0, times, cfg.transport_dt)
    cache = {round(h.t / st.dt): h for h in hist}

    def reference(t):
        return evaluate_wkb(cache[round(t / st.dt)], t, cfg.epsilon, st.grid)

    return reference


def _run(cfg: ExperimentConfig, st: _Setup, reference, du: np.ndarray):
    u, v = reference(0.0)
    init = FieldState(u + du, v, 0.0)
    sc = SolverConfig(grid=st.grid, dt=st.dt, t_end=st.n_steps * st.dt, stride=st.stride, blowup=cfg.blowup)
    return run(init, sc, cfg.params, reference=reference)


def instability_experiment(cfg: ExperimentConfig, with_floor: bool = False) -> ExperimentResult:
    """Perturbed run against the approximate solution; optionally also the unperturbed run (the floor)."""
    start = time.perf_counter()
    st = _prepare(cfg)
    reference = _reference(cfg, st)
    du, info = build_perturbation(cfg, st.phase, st.grid)
    info = {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in info.items()}
    info["e0"] = [[c.real, c.imag] for c in np.asarray(info["e0"], complex)]
    info["x0"] = st.x0
    res = _run(cfg, st, reference, du)
    floor = None
    if with_floor:
        floor = _run(cfg, st, reference, np.zeros_like(du)).deviation
    report = None
    failure = res.failure
    if failure is None:
        try:
            report = fit_rate(res.times, res.deviation, cfg.epsilon, st.horizon, st.Gamma1, cfg.fit_window)
        except FitError as exc:
            failure = str(exc)
    return ExperimentResult(
        cfg, report, res.times, res.deviation, res.l2, st.horizon, st.Gamma1, info, floor, failure,
        time.perf_counter() - start,
    )


def control_experiment(cfg: ExperimentConfig, kind: str, reference_slope: Optional[float] = None) -> ExperimentResult:
    """Same run with the carrier moved off resonance or with e0 orthogonal to the unstable direction.

    Verdict: pass iff the amplification stays below 2, or (orthogonal polarization only) the fitted
    slope is strictly below ``reference_slope``.
    """
    if kind == "off_resonance":
        cfg = replace(cfg, carrier="off_resonance", polarization="resonant")
    elif kind == "orthogonal":
        cfg = replace(cfg, carrier="resonant", polarization="orthogonal")
    else:
        raise ValueError("kind must be 'off_resonance' or 'orthogonal'")
    res = instability_experiment(cfg)
    if res.failure is not None and res.report is None:
        return res
    t = np.asarray(res.times)
    d = np.asarray(res.deviation)
    sel = (t >= cfg.fit_window[0] * res.horizon) & (t <= cfg.fit_window[1] * res.horizon)
    slope = float(np.polyfit(slow_time(t[sel], cfg.epsilon), np.log(d[sel]), 1)[0])
    amp = float(d[np.argmin(np.abs(t - res.horizon))] / d[0])
    ok = amp < 2.0 or (kind == "orthogonal" and reference_slope is not None and slope < reference_slope)
    res.report = RateFitReport(
        cfg.epsilon, res.Gamma1, slope, (float(t[sel][0]), float(t[sel][-1])), amp, False, "pass" if ok else "fail"
    )
    return res


def epsilon_sweep(cfg: ExperimentConfig, epsilons, tolerance: float = 0.10) -> dict:
    """Instability experiment per epsilon (largest first) plus the non-degradation check of |slope/Gamma1 - 1|.

    With a single epsilon there is no trend and ``non_degrading`` is None.
    """
    results = []
    for eps in sorted(epsilons, reverse=True):
        p = replace(cfg.params, epsilon=eps)
        results.append(instability_experiment(replace(cfg, params=p)))
    dist = [abs(r.report.ratio - 1.0) if r.report else np.inf for r in results]
    if len(results) < 2:
        return {"results": results, "distance": dist, "non_degrading": None}
    degrade = all(b <= a + tolerance for a, b in zip(dist, dist[1:]))
    return {"results": results, "distance": dist, "non_degrading": bool(degrade)}
