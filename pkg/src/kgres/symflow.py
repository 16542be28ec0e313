"""Symbolic resonant flow near the non-transparent resonance sets.

The flow solves  dS/dt + eps^(-3/4) M0(t) S = 0,  S(tau; tau) = Id,  with

    M0 = [[ i lam1 Id3,        -eps^(3/4) t b12 ],
          [ -eps^(3/4) t b21,   i mu Id3        ]]

for fixed (x, xi). The diagonal phases are removed analytically (interaction picture)
and the remaining coupling, which is O(t) and oscillates at rate
|lam1 - mu| eps^(-3/4), is advanced by RK4 with step halving.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm
from scipy.optimize import brentq

from .interaction import (
    ResonanceError,
    _pi,
    bilinear_matrix,
    dt_g_at_zero,
    gamma1,
    gamma2,
    polarization_vector,
    resonance_pair,
)
from .model import ModelParams, Phase, dispersion, solve_phase

FLOW_KINDS = ("pp", "mm", "p0", "m0")


class FlowError(RuntimeError):
    pass


def smoothstep(s):
    """Quintic 0 -> 1 on [0, 1] with two vanishing derivatives at both ends."""
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


@dataclass(frozen=True)
class CutoffWindow:
    """Sum of bumps, each 1 within radius/2 of a center and 0 beyond radius."""

    centers: tuple
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        c = np.sort(np.asarray(self.centers, float))
        if c.size > 1 and np.min(np.diff(c)) <= 2 * self.radius:
            raise ValueError("window supports overlap")

    def __call__(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape)
        for c in self.centers:
            out = out + smoothstep((self.radius - np.abs(xi - c)) / (0.5 * self.radius))
        return out

    def distance(self, xi) -> float:
        return float(np.min(np.abs(np.asarray(self.centers) - xi)))


def resonance_sets(params: ModelParams, phase: Phase) -> dict:
    """Centers of the non-transparent resonance sets, per flow kind."""
    a, b = resonance_pair(params, phase)
    k = phase.k
    return {"pp": (a, b), "mm": (-a, -b), "p0": (-6.0 * k,), "m0": (6.0 * k,)}


def default_radius(params: ModelParams, phase: Phase) -> float:
    pts = np.sort(np.concatenate([np.asarray(v) for v in resonance_sets(params, phase).values()]))
    return 0.1 * float(np.min(np.diff(pts)))


@dataclass
class FlowSetup:
    """Everything that is fixed across (x, xi): windows, the initial growth rate of g, the coupling blocks.

    ``dtg`` maps x to the initial time derivative of the third-harmonic amplitude.
    ``phi1`` is the spatial window; by default it equals 1 everywhere.
    """

    params: ModelParams
    phase: Phase
    dtg: Callable
    kind: str = "pp"
    radius: Optional[float] = None
    phi1: Optional[Callable] = None
    T1: float = 3.0
    chi: CutoffWindow = field(init=False)

    def __post_init__(self):
        if self.kind not in FLOW_KINDS:
            raise ValueError(f"kind must be one of {FLOW_KINDS}")
        if self.radius is None:
            self.radius = default_radius(self.params, self.phase)
        self.chi = CutoffWindow(resonance_sets(self.params, self.phase)[self.kind], self.radius)
        if self.phi1 is None:
            self.phi1 = lambda x: np.ones(np.shape(x))

    @property
    def epsilon(self) -> float:
        return self.params.epsilon

    @property
    def horizon(self) -> float:
        return self.T1 * np.sqrt(abs(np.log(self.epsilon)))

    def frequencies(self, xi: float) -> tuple[float, float]:
        """(lam1, mu) of the 2x2 block structure at xi."""
        p, k, w = self.params, self.phase.k, self.phase.omega
        if self.kind == "pp":
            return float(dispersion(p, "L", xi + 3 * k) - 3 * w), float(dispersion(p, "M", xi))
        if self.kind == "mm":
            return float(-dispersion(p, "L", xi - 3 * k) + 3 * w), float(-dispersion(p, "M", xi))
        if self.kind == "p0":
            return float(dispersion(p, "L", xi + 3 * k) - 3 * w), 0.0
        return float(-dispersion(p, "L", xi - 3 * k) + 3 * w), 0.0

    def coupling_shapes(self, xi: float) -> tuple[np.ndarray, np.ndarray]:
        """Coupling blocks without the x-dependent factor (the b-tilde-1,2 of the resonant flow)."""
        p, ph, k = self.params, self.phase, self.phase.k
        if self.kind in ("pp", "p0"):
            up, mid, sgn = _pi(p, "L", "+", xi + 3 * k), "+" if self.kind == "pp" else "0", 3
        else:
            up, mid, sgn = _pi(p, "L", "-", xi - 3 * k), "-" if self.kind == "mm" else "0", -3
        Q = _pi(p, "M", mid, xi)
        b1 = up @ bilinear_matrix("F", polarization_vector(p, ph, sgn)) @ Q
        if self.kind in ("p0", "m0"):
            return b1, np.zeros((3, 3), complex)
        b2 = 2.0 * Q @ bilinear_matrix("G", polarization_vector(p, ph, -sgn)) @ up
        return b1, b2

    def trace_shape(self, xi):
        """gamma1 (pp) or gamma2 (mm): the trace of the product of the coupling shapes."""
        if self.kind == "pp":
            return gamma1(self.params, self.phase, xi)
        if self.kind == "mm":
            return gamma2(self.params, self.phase, xi)
        return np.zeros(np.shape(xi))


def gaussian_dtg(params: ModelParams, phase: Phase, center=0.0, width=1.0, height=1.0) -> Callable:
    """dtg(x) for v0 = height * exp(-((x-center)/width)^2) e1: the cubic law c * amplitude^3."""
    c = complex(dt_g_at_zero(params, phase, polarization_vector(params, phase, 1)[None, :])[0])
    return lambda x: c * (height * np.exp(-(((np.asarray(x, float) - center) / width) ** 2))) ** 3


@dataclass
class FlowMatrix:
    lambda1: float
    mu: float
    b12: np.ndarray
    b21: np.ndarray
    epsilon: float
    t: float

    def matrix(self) -> np.ndarray:
        s = self.epsilon**0.75 * self.t
        I = np.eye(3)
        return np.block([[1j * self.lambda1 * I, -s * self.b12], [-s * self.b21, 1j * self.mu * I]])


def coupling_blocks(setup: FlowSetup, x: float, xi: float) -> tuple[np.ndarray, np.ndarray]:
    """(b12, b21) at (x, xi), including the windows and the initial growth rate of g."""
    amp = complex(setup.dtg(x)) * float(setup.phi1(x)) * float(setup.chi(xi))
    b1, b2 = setup.coupling_shapes(xi)
    if setup.kind in ("mm", "m0"):
        return np.conj(amp) * b1, amp * b2
    return amp * b1, np.conj(amp) * b2


def build_M0(setup: FlowSetup, x: float, xi: float, t: float) -> FlowMatrix:
    lam1, mu = setup.frequencies(xi)
    b12, b21 = coupling_blocks(setup, x, xi)
    return FlowMatrix(lam1, mu, b12, b21, setup.epsilon, t)


def eigvals_M0(fm: FlowMatrix) -> dict:
    """Eigenvalues of M0 with multiplicities, assuming rank(b12), rank(b21) <= 1."""
    tr = np.trace(fm.b12 @ fm.b21)
    d = fm.lambda1 - fm.mu
    root = np.sqrt(complex(4 * fm.epsilon**1.5 * fm.t**2 * tr - d**2))
    mean = 0.5j * (fm.lambda1 + fm.mu)
    return {
        "i*lambda1": (1j * fm.lambda1, 2),
        "i*mu": (1j * fm.mu, 2),
        "nu+": (mean + 0.5 * root, 1),
        "nu-": (mean - 0.5 * root, 1),
    }


def eigvals_list(fm: FlowMatrix) -> np.ndarray:
    return np.array([v for v, m in eigvals_M0(fm).values() for _ in range(m)])


@dataclass
class FlowState:
    S: np.ndarray
    tau: float
    t: float


def _phase_factor(e34: float, lam, t, tau):
    return np.exp(-1j * lam * (t - tau) / e34)


def _integrate_path(b12, b21, lam1, mu, e34, times, dt):
    """RK4 for Y in S = diag(phase) Y from times[0], returning Y at every entry of ``times``."""
    rate = (lam1 - mu) / e34
    tau = times[0]

    def rhs(s, Y):
        ph = np.exp(1j * rate * (s - tau))
        C = np.zeros((6, 6), complex)
        C[:3, 3:] = s * ph * b12
        C[3:, :3] = s * np.conj(ph) * b21
        return C @ Y

    Y = np.eye(6, dtype=complex)
    out = [Y]
    for a, b in zip(times[:-1], times[1:]):
        n = max(1, int(np.ceil((b - a) / dt)))
        h = (b - a) / n
        for i in range(n):
            s = a + i * h
            k1 = rhs(s, Y)
            k2 = rhs(s + h / 2, Y + h / 2 * k1)
            k3 = rhs(s + h / 2, Y + h / 2 * k2)
            k4 = rhs(s + h, Y + h * k3)
            Y = Y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append(Y)
    return np.array(out)


def _to_lab(Y, lam1, mu, e34, tau, t):
    D = np.concatenate([np.full(3, _phase_factor(e34, lam1, t, tau)), np.full(3, _phase_factor(e34, mu, t, tau))])
    return D[:, None] * Y


def integrate_path(
    setup: FlowSetup,
    x: float,
    xi: float,
    times,
    dt_max: float = 0.02,
    c_osc: float = 0.2,
    rtol: float = 1e-8,
    min_dt: float = 1e-7,
) -> np.ndarray:
    """S(times[0]; t) for every t in the nondecreasing array ``times``, shape (n, 6, 6)."""
    times = np.asarray(times, dtype=float)
    if times[0] < 0 or np.any(np.diff(times) < 0):
        raise ValueError("times must be nonnegative and nondecreasing")
    if times[-1] > setup.horizon * (1 + 1e-12):
        raise FlowError(f"horizon exceeded: t={times[-1]} > {setup.horizon}")
    e34 = setup.epsilon**0.75
    lam1, mu = setup.frequencies(xi)
    b12, b21 = coupling_blocks(setup, x, xi)
    if times.size == 1 or (not np.any(b12) and not np.any(b21)):
        Y = np.broadcast_to(np.eye(6, dtype=complex), (times.size, 6, 6))
    else:
        dt = min(dt_max, c_osc * e34 / max(abs(lam1 - mu), e34))
        Y = _integrate_path(b12, b21, lam1, mu, e34, times, dt)
        while True:
            dt /= 2
            if dt < min_dt:
                raise FlowError("step underflow before convergence")
            Y_half = _integrate_path(b12, b21, lam1, mu, e34, times, dt)
            err = np.max(np.linalg.norm(Y_half - Y, axis=(1, 2)) / np.maximum(np.linalg.norm(Y_half, axis=(1, 2)), 1.0))
            Y = Y_half
            if err <= rtol:
                break
    return np.array([_to_lab(y, lam1, mu, e34, times[0], t) for y, t in zip(Y, times)])


def integrate_flow(setup: FlowSetup, x: float, xi: float, tau: float, t: float, **kw) -> FlowState:
    if not 0.0 <= tau <= t:
        raise ValueError("need 0 <= tau <= t")
    return FlowState(integrate_path(setup, x, xi, [tau, t], **kw)[-1], tau, t)


def closed_form_flow(setup: FlowSetup, x: float, xi: float, t: float) -> np.ndarray:
    """Exact flow from 0 to t when lam1 == mu (at a resonance point)."""
    lam1, mu = setup.frequencies(xi)
    if abs(lam1 - mu) > 1e-9 * max(1.0, abs(lam1)):
        raise ResonanceError(f"xi={xi} is not resonant (lam1 - mu = {lam1 - mu:.3g})")
    b12, b21 = coupling_blocks(setup, x, xi)
    B = np.zeros((6, 6), complex)
    B[:3, 3:] = b12
    B[3:, :3] = b21
    return np.exp(-1j * lam1 * t / setup.epsilon**0.75) * expm(0.5 * t**2 * B)


def flow_variants(kind: str, params: ModelParams, x: float, xi: float, tau: float, t: float, **setup_kw) -> FlowState:
    phase = setup_kw.pop("phase", None) or solve_phase(params)
    dtg = setup_kw.pop("dtg", None) or gaussian_dtg(params, phase)
    return integrate_flow(FlowSetup(params, phase, dtg, kind=kind, **setup_kw), x, xi, tau, t)


# --- growth envelope audit ------------------------------------------------------

REGIMES = ("resonant", "coalescence", "away", "small_trace", "decoupled")


@dataclass
class EnvelopeSample:
    x: float
    xi: float
    regime: str


@dataclass
class EnvelopeRow:
    x: float
    xi: float
    regime: str
    a: float
    b: float
    gamma_plus: float
    rough_ok: bool
    passed: bool

    def as_csv(self) -> str:
        return (
            f"{self.x:.10g},{self.xi:.10g},{self.regime},{self.a:.10g},{self.b:.10g},"
            f"{self.gamma_plus:.10g},{'pass' if self.passed else 'fail'}"
        )


CSV_HEADER = "x,xi,regime,a,b,gamma_plus,verdict"


def window_support_grid(setup: FlowSetup, n: int = 2001) -> np.ndarray:
    return np.concatenate([np.linspace(c - setup.radius, c + setup.radius, n) for c in setup.chi.centers])


def gamma_plus(setup: FlowSetup, xs: np.ndarray) -> float:
    """max |dtg| over xs times sup of the trace shape^(1/2) over the window support."""
    tr = setup.trace_shape(window_support_grid(setup))
    return float(np.max(np.abs(setup.dtg(xs)) * setup.phi1(xs)) * np.sqrt(np.max(tr)))


def rough_constant(setup: FlowSetup, xs: np.ndarray, n_xi: int = 401) -> float:
    """b+ = sup (|b12| + |b21|) / 2 over the sampled x and the window support (spectral norms)."""
    best = 0.0
    xis = np.concatenate([np.linspace(c - setup.radius, c + setup.radius, n_xi) for c in setup.chi.centers])
    amp = np.abs(setup.dtg(xs)) * setup.phi1(xs)
    x_star = xs[int(np.argmax(amp))]
    for xi in xis:
        b12, b21 = coupling_blocks(setup, x_star, xi)
        best = max(best, 0.5 * (np.linalg.norm(b12, 2) + np.linalg.norm(b21, 2)))
    return best


def _detuning_point(setup: FlowSetup, center: float, target: float, side: float) -> float:
    """xi on one side of ``center`` inside the window where |lam1 - mu| equals target."""
    f = lambda xi: abs(np.subtract(*setup.frequencies(xi))) - target
    far = center + side * setup.radius
    if f(far) < 0:
        return far
    return brentq(f, center, far, xtol=1e-14)


def stratified_samples(setup: FlowSetup, n: int = 200, seed: int = 0, x_range=(-2.5, 2.5)) -> list:
    """Samples spread over five regimes: resonant, near coalescence, away from both, small trace, decoupled."""
    rng = np.random.default_rng(seed)
    e34 = setup.epsilon**0.75
    T = setup.horizon
    xs = np.linspace(*x_range, 2001)
    amp = np.abs(setup.dtg(xs)) * setup.phi1(xs)
    x0 = float(xs[np.argmax(amp)])
    strong = xs[amp > 0.5 * amp.max()]
    weak = xs[amp < 1e-3 * amp.max()]
    centers = setup.chi.centers
    out = []
    per = max(1, n // len(REGIMES))
    for i in range(per):
        c = centers[i % len(centers)]
        side = 1.0 if rng.random() < 0.5 else -1.0
        x = float(rng.choice(strong))
        tr = float(np.abs(setup.dtg(x)) ** 2 * max(setup.trace_shape(c), 0.0))
        scale = 2 * e34 * np.sqrt(tr) if tr > 0 else e34
        out.append(EnvelopeSample(x0 if i == 0 else x, c if i == 0 else float(c + side * rng.uniform(0, 1e-3) * e34), "resonant"))
        # nu+ = nu- when |lam1 - mu| = 2 eps^(3/4) t sqrt(tr): place that time inside the window
        t_c = rng.uniform(0.2, 0.8) * T
        out.append(EnvelopeSample(x, _detuning_point(setup, c, scale * t_c, side), "coalescence"))
        out.append(EnvelopeSample(x, _detuning_point(setup, c, rng.uniform(3.0, 10.0) * scale * T, side), "away"))
        out.append(EnvelopeSample(float(rng.choice(weak)) if weak.size else x, float(c + side * rng.uniform(0, 0.5) * setup.radius), "small_trace"))
        out.append(EnvelopeSample(x, float(c + side * rng.uniform(1.05, 2.0) * setup.radius), "decoupled"))
    return out[:n] if len(out) >= n else out


def fit_envelope(times: np.ndarray, log_norm: np.ndarray, min_points: int = 8) -> tuple[float, float, float]:
    """Least-squares (a, b, c) in log|S| = a t^2/2 + b t + c."""
    if times.size < min_points:
        raise FlowError("fit window too short")
    A = np.column_stack([0.5 * times**2, times, np.ones_like(times)])
    a, b, c = np.linalg.lstsq(A, log_norm, rcond=None)[0]
    return float(a), float(b), float(c)


def flow_norm_history(setup: FlowSetup, x: float, xi: float, times: np.ndarray) -> np.ndarray:
    """Spectral norms of S(0; t) at the given times."""
    return np.linalg.norm(integrate_path(setup, x, xi, np.concatenate([[0.0], times])), ord=2, axis=(1, 2))[1:]


def growth_envelope_audit(
    setup: FlowSetup,
    samples: Optional[list] = None,
    n_times: int = 61,
    fit_from: float = 0.6,
    rel_tol: float = 1e-3,
) -> list[EnvelopeRow]:
    samples = samples if samples is not None else stratified_samples(setup)
    xs = np.linspace(-2.5, 2.5, 2001)
    gp = gamma_plus(setup, xs)
    bp = rough_constant(setup, xs)
    times = np.linspace(0.0, setup.horizon, n_times)[1:]
    rows = []
    for s in samples:
        norms = flow_norm_history(setup, s.x, s.xi, times)
        logn = np.log(norms)
        sel = times >= fit_from * times[-1]
        a, b, _ = fit_envelope(times[sel], logn[sel])
        rough_ok = bool(np.all(logn <= 0.5 * times**2 * bp + 1e-9))
        passed = a <= gp * (1 + rel_tol) + 1e-12 and rough_ok
        rows.append(EnvelopeRow(s.x, s.xi, s.regime, a, b, gp, rough_ok, passed))
    return rows


def write_envelope_csv(rows: list, path: str) -> None:
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in rows:
            fh.write(r.as_csv() + "\n")


def nilpotent_constant(setup: FlowSetup, xs: np.ndarray, n_xi: int = 401) -> float:
    """sup |b12| over the sampled x and the window support, for the (+,0) and (-,0) flows."""
    if setup.kind not in ("p0", "m0"):
        raise ValueError("only the (+,0) and (-,0) flows have a vanishing lower block")
    amp = np.abs(setup.dtg(xs)) * setup.phi1(xs)
    x_star = xs[int(np.argmax(amp))]
    xis = np.concatenate([np.linspace(c - setup.radius, c + setup.radius, n_xi) for c in setup.chi.centers])
    return max(np.linalg.norm(coupling_blocks(setup, x_star, xi)[0], 2) for xi in xis)


@dataclass
class NilpotentAudit:
    a: float
    b_tilde_plus: float
    bound_holds: dict


def nilpotent_bound_audit(
    setup: FlowSetup, x: float, xi: float, c0_values=(0.05, 0.1, 0.2, 0.5, 0.9), n_times: int = 61, fit_from: float = 0.6
) -> NilpotentAudit:
    """Checks |S(0;t)| <= exp(bt c0 t^2 / 2) / c0 over the horizon for each c0, and fits the envelope."""
    bt = nilpotent_constant(setup, np.linspace(-2.5, 2.5, 2001))
    times = np.linspace(0.0, setup.horizon, n_times)[1:]
    logn = np.log(flow_norm_history(setup, x, xi, times))
    sel = times >= fit_from * times[-1]
    a, _, _ = fit_envelope(times[sel], logn[sel])
    holds = {c0: bool(np.all(logn <= -np.log(c0) + 0.5 * bt * c0 * times**2 + 1e-12)) for c0 in c0_values}
    return NilpotentAudit(a, bt, holds)
