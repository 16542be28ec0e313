"""Pseudospectral integrating-factor solver for the full stiff system.

Each Fourier mode of each 3-component block is rotated exactly by the matrix
exponential of its constant-coefficient generator. The O(eps^-1/2) quadratic terms
are integrated by classical RK4 in the rotating frame (Lawson RK4).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft

from .grid import Grid1D
from .model import BRANCHES, ModelParams, ModeSpec, branch_frequency, constant_symbol, projector


class SolverBlowup(RuntimeError):
    pass


@dataclass
class FieldState:
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def copy(self) -> "FieldState":
        return FieldState(self.u.copy(), self.v.copy(), self.t)

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.u, self.v], axis=1)


@dataclass(frozen=True)
class SolverConfig:
    grid: Grid1D
    dt: float
    t_end: float
    dealias: bool = True
    nonlinear: bool = True
    stride: int = 10
    blowup: float = 1e8


def linear_propagator(params: ModelParams, family: str, xi_phys, dt: float, epsilon: Optional[float] = None):
    """exp(-dt (A(i xi) + A0/eps)) per mode, from the spectral decomposition at eta = eps*xi."""
    eps = params.epsilon if epsilon is None else epsilon
    eta = eps * np.asarray(xi_phys, dtype=float)
    out = np.zeros(eta.shape + (3, 3), complex)
    for b in BRANCHES:
        lam = branch_frequency(params, family, b, eta)
        out = out + np.exp(-1j * lam * dt / eps)[..., None, None] * projector(params, ModeSpec(family, b), eta)
    return out


def generator(params: ModelParams, family: str, xi_phys, epsilon: Optional[float] = None):
    """The 3x3 matrix A(i xi) + A0/eps (so that d/dt u_hat = -generator u_hat)."""
    eps = params.epsilon if epsilon is None else epsilon
    return constant_symbol(params, family, eps * np.asarray(xi_phys, float)) / eps


def to_spectral(state: FieldState) -> np.ndarray:
    """Shape (2, 3, N/2+1): block, component, mode."""
    return np.stack([sfft.rfft(state.u.T, axis=-1), sfft.rfft(state.v.T, axis=-1)])


def from_spectral(U: np.ndarray, n_points: int, t: float) -> FieldState:
    u = sfft.irfft(U[0], n=n_points, axis=-1).T
    v = sfft.irfft(U[1], n=n_points, axis=-1).T
    return FieldState(np.ascontiguousarray(u), np.ascontiguousarray(v), t)


def apply_linear_operator(params: ModelParams, grid: Grid1D, u, v, epsilon: Optional[float] = None):
    """(A d/dx + A0/eps) applied to real fields, via the spectral derivative."""
    xi = grid.xi_r
    out = []
    for fam, w in (("L", u), ("M", v)):
        G = generator(params, fam, xi, epsilon)
        W = sfft.rfft(np.asarray(w).T, axis=-1)
        out.append(sfft.irfft(np.einsum("mij,jm->im", G, W), n=grid.n_points, axis=-1).T)
    return out[0], out[1]


def nonlinearity_real(u, v, epsilon: float):
    s = 1.0 / np.sqrt(epsilon)
    nu = np.zeros_like(u)
    nv = np.zeros_like(v)
    nu[:, 1] = s * (u[:, 2] + v[:, 2]) * v[:, 2]
    nv[:, 1] = s * (v[:, 1] ** 2 - u[:, 1] ** 2)
    return nu, nv


def lawson_rk4_step(U, t: float, h: float, rot_half: Callable, rot_full: Callable, rhs: Callable):
    """One integrating-factor RK4 step; rot_* apply the exact linear flow over h/2 and h."""
    k1 = rhs(t, U)
    EU = rot_half(U)
    k2 = rhs(t + h / 2, EU + h / 2 * rot_half(k1))
    k3 = rhs(t + h / 2, EU + h / 2 * k2)
    k4 = rhs(t + h, rot_full(U) + h * rot_half(k3))
    return rot_full(U) + h / 6 * (rot_full(k1) + 2 * rot_half(k2 + k3) + k4)


class Stepper:
    """Lawson RK4 for the full system on a fixed grid and step."""

    def __init__(self, params: ModelParams, config: SolverConfig):
        self.params = params
        self.config = config
        g = config.grid
        xi = g.xi_r
        self.n = g.n_points
        self.half = np.stack([linear_propagator(params, f, xi, config.dt / 2) for f in ("L", "M")])
        self.full = np.stack([linear_propagator(params, f, xi, config.dt) for f in ("L", "M")])
        self.mask = np.abs(xi) <= (2.0 / 3.0) * g.xi_nyquist if config.dealias else np.ones(xi.size, bool)
        self.scale = 1.0 / np.sqrt(params.epsilon)

    @staticmethod
    def _rotate(E, U):
        return np.einsum("bmij,bjm->bim", E, U)

    def nonlinear_term(self, U: np.ndarray) -> np.ndarray:
        if not self.config.nonlinear:
            return np.zeros_like(U)
        fields = sfft.irfft(U[:, 1:, :], n=self.n, axis=-1)
        u2, u3, v2, v3 = fields[0, 0], fields[0, 1], fields[1, 0], fields[1, 1]
        K = np.zeros_like(U)
        K[0, 1] = sfft.rfft(self.scale * (u3 + v3) * v3) * self.mask
        K[1, 1] = sfft.rfft(self.scale * (v2 * v2 - u2 * u2)) * self.mask
        return K

    def step(self, U: np.ndarray) -> np.ndarray:
        return lawson_rk4_step(
            U,
            0.0,
            self.config.dt,
            lambda X: self._rotate(self.half, X),
            lambda X: self._rotate(self.full, X),
            lambda t, X: self.nonlinear_term(X),
        )

    def check(self, U: np.ndarray) -> None:
        if not np.all(np.isfinite(U)):
            raise SolverBlowup("non-finite field")
        # max |field| <= sum |coefficients| * 2 / N
        bound = 2.0 * np.max(np.sum(np.abs(U), axis=-1)) / self.n
        if bound > self.config.blowup:
            state = from_spectral(U, self.n, 0.0)
            if np.max(np.abs(state.stacked())) > self.config.blowup:
                raise SolverBlowup("field exceeded the blow-up guard")


def step(state: FieldState, config: SolverConfig, params: ModelParams) -> FieldState:
    st = Stepper(params, config)
    U = st.step(to_spectral(state))
    st.check(U)
    return from_spectral(U, config.grid.n_points, state.t + config.dt)


@dataclass
class RunResult:
    times: list = field(default_factory=list)
    l2: list = field(default_factory=list)
    linf: list = field(default_factory=list)
    deviation: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    final: Optional[FieldState] = None
    failure: Optional[str] = None

    def as_columns(self) -> dict:
        cols = {"t": self.times, "l2": self.l2, "linf": self.linf}
        if self.deviation:
            cols["deviation"] = self.deviation
        return cols


def run(
    initial: FieldState,
    config: SolverConfig,
    params: ModelParams,
    reference: Optional[Callable[[float], tuple]] = None,
    keep_snapshots: bool = False,
    on_record: Optional[Callable[[float, FieldState], None]] = None,
) -> RunResult:
    """Advance to t_end recording norms (and deviation from ``reference(t)``) every ``stride`` steps."""
    st = Stepper(params, config)
    grid = config.grid
    n_steps = int(round((config.t_end - initial.t) / config.dt))
    if abs(initial.t + n_steps * config.dt - config.t_end) > 1e-9 * max(1.0, config.t_end):
        raise ValueError("t_end - t0 must be an integer multiple of dt")
    res = RunResult()
    U = to_spectral(initial)

    def record(i, U):
        t = initial.t + i * config.dt
        s = from_spectral(U, grid.n_points, t)
        flat = s.stacked()
        res.times.append(t)
        res.l2.append(grid.l2_norm(flat))
        res.linf.append(float(np.max(np.abs(flat))))
        if reference is not None:
            ua, va = reference(t)
            res.deviation.append(grid.l2_norm(np.concatenate([s.u - ua, s.v - va], axis=1)))
        if keep_snapshots:
            res.snapshots.append(s)
        if on_record is not None:
            on_record(t, s)
        return s

    last = record(0, U)
    try:
        for i in range(1, n_steps + 1):
            U = st.step(U)
            if i % config.stride == 0 or i == n_steps:
                st.check(U)
                last = record(i, U)
    except SolverBlowup as exc:
        res.failure = f"{exc} at t={initial.t + i * config.dt:.6g}"
    res.final = last
    return res


# --- scalar toy model ---------------------------------------------------------

def toy_exact(w0_hat: np.ndarray, xi: np.ndarray, t: float, epsilon: float) -> np.ndarray:
    return np.exp(t**2 * xi / (2 * np.sqrt(epsilon))) * w0_hat


def toy_run(w0_hat: np.ndarray, xi: np.ndarray, epsilon: float, dt: float, t_end: float, stride: int = 1):
    """dw/dt + i t eps^-1/2 dw/dx = 0 in Fourier, stepped by the same RK4 core (no linear part)."""
    n_steps = int(round(t_end / dt))
    rate = xi / np.sqrt(epsilon)
    identity = lambda w: w
    rhs = lambda t, w: t * rate * w
    w = np.asarray(w0_hat, complex).copy()
    times, history = [0.0], [w.copy()]
    for i in range(n_steps):
        w = lawson_rk4_step(w, i * dt, dt, identity, identity, rhs)
        if (i + 1) % stride == 0 or i + 1 == n_steps:
            times.append((i + 1) * dt)
            history.append(w.copy())
    return np.array(times), np.array(history)
