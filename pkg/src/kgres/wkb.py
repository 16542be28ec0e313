"""Multiple-scale approximate solution.

Profiles are trigonometric polynomials in the fast phase theta = (k x - omega t)/eps
whose coefficients are (N, 3) complex grid functions. The approximate solution is

    U^a = sum_p e^{i p theta} (a0_p + sqrt(eps) a1_p + eps a2_p)

with leading harmonics u_{0,+-3} = g e_{+-3}, v_{0,+-1} = f e_{+-1}. The first
correctors and the part of the second correctors off the characteristic kernels
are slaved algebraically to (g, f); the amplitudes themselves obey transport
equations at the group velocities with sources assembled from the products.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.fft as sfft

from .grid import Grid1D, SnapError
from .interaction import (
    bilinear,
    check_polarized,
    polarization_vector,
)
from .model import ModelParams, Phase, group_velocity, harmonic_kernel_projector, partial_inverse
from .solver import lawson_rk4_step

HARMONIC_CUTOFF = 6


class CutoffOverflow(ValueError):
    pass


class TransportError(RuntimeError):
    pass


@dataclass
class Profile:
    harmonics: dict
    cutoff: int = HARMONIC_CUTOFF

    @classmethod
    def zeros(cls, cutoff: int = HARMONIC_CUTOFF):
        return cls({}, cutoff)

    def get(self, p: int, n_points: int):
        h = self.harmonics.get(p)
        return np.zeros((n_points, 3), complex) if h is None else h

    def support(self, tol: float = 0.0) -> list[int]:
        return sorted(p for p, h in self.harmonics.items() if np.max(np.abs(h), initial=0.0) > tol)

    def __add__(self, other: "Profile") -> "Profile":
        out = {p: h.copy() for p, h in self.harmonics.items()}
        for p, h in other.harmonics.items():
            out[p] = out[p] + h if p in out else h.copy()
        return Profile(out, max(self.cutoff, other.cutoff))

    def scaled(self, c) -> "Profile":
        return Profile({p: c * h for p, h in self.harmonics.items()}, self.cutoff)

    def map_harmonics(self, fn) -> "Profile":
        return Profile({p: fn(p, h) for p, h in self.harmonics.items()}, self.cutoff)

    def reality_defect(self) -> float:
        worst = 0.0
        for p, h in self.harmonics.items():
            other = self.harmonics.get(-p)
            ref = np.zeros_like(h) if other is None else other.conj()
            worst = max(worst, float(np.max(np.abs(h - ref), initial=0.0)))
        return worst

    def evaluate(self, theta: np.ndarray) -> np.ndarray:
        """Real field sum_p e^{i p theta} h_p, shape (N, 3)."""
        total = None
        for p, h in self.harmonics.items():
            term = np.exp(1j * p * theta)[:, None] * h
            total = term if total is None else total + term
        if total is None:
            return np.zeros((theta.size, 3))
        return total.real


def profile_bilinear(B, a: Profile, b: Profile, max_cutoff: Optional[int] = None) -> Profile:
    """Harmonic convolution: (out)_p = sum_{p1+p2=p} B(a_p1, b_p2)."""
    limit = a.cutoff + b.cutoff if max_cutoff is None else max_cutoff
    out: dict = {}
    for p1, x in a.harmonics.items():
        for p2, y in b.harmonics.items():
            term = bilinear(B, x, y)
            if not np.any(term):
                continue
            p = p1 + p2
            if abs(p) > limit:
                raise CutoffOverflow(f"harmonic {p} exceeds cutoff {limit}")
            out[p] = out[p] + term if p in out else term
    return Profile(out, limit)


@dataclass
class CascadeOperators:
    """Constant matrices used by the cascade (kernel vectors, projectors, partial inverses)."""

    params: ModelParams
    phase: Phase
    e1: np.ndarray = field(init=False)
    e3: np.ndarray = field(init=False)
    _inv: dict = field(init=False, default_factory=dict)
    _ker: dict = field(init=False, default_factory=dict)

    def __post_init__(self):
        self.e1 = polarization_vector(self.params, self.phase, 1)
        self.e3 = polarization_vector(self.params, self.phase, 3)

    def inverse(self, family: str, p: int) -> np.ndarray:
        key = (family, p)
        if key not in self._inv:
            self._inv[key] = partial_inverse(self.params, self.phase, family, p)
        return self._inv[key]

    def kernel(self, family: str, p: int) -> np.ndarray:
        key = (family, p)
        if key not in self._ker:
            self._ker[key] = harmonic_kernel_projector(self.params, self.phase, family, p)
        return self._ker[key]

    def flux_matrix(self, family: str) -> np.ndarray:
        c = self.params.speed[family]
        return c * np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=complex)

    @property
    def velocity_g(self) -> float:
        return float(group_velocity(self.params, "L", 3 * self.phase.k))

    @property
    def velocity_f(self) -> float:
        return float(group_velocity(self.params, "M", self.phase.k))


def _solve_off_kernel(ops: CascadeOperators, family: str, prof: Profile) -> Profile:
    return prof.map_harmonics(lambda p, h: h @ ops.inverse(family, p).T)


def _sum(profiles) -> Profile:
    out = Profile.zeros()
    for prof in profiles:
        out = out + prof
    return out


def quadratic_level(us: list, vs: list, n: int, tangent: Optional[tuple] = None) -> tuple[Profile, Profile]:
    """Coefficient of eps^(n/2) in F(u+v, v) and G(u,u) + H(v,v).

    With ``tangent=(dus, dvs)`` returns instead the derivative of that coefficient in the
    direction where level m moves by (dus[m], dvs[m]).
    """
    F, GH = [], []
    for a in range(n + 1):
        b = n - a
        if tangent is None:
            F.append(profile_bilinear("F", us[a] + vs[a], vs[b]))
            GH.append(profile_bilinear("G", us[a], us[b]))
            GH.append(profile_bilinear("H", vs[a], vs[b]))
        else:
            dus, dvs = tangent
            F.append(profile_bilinear("F", dus[a] + dvs[a], vs[b]))
            F.append(profile_bilinear("F", us[a] + vs[a], dvs[b]))
            GH.append(profile_bilinear("G", dus[a], us[b]).scaled(2.0))
            GH.append(profile_bilinear("H", dvs[a], vs[b]).scaled(2.0))
    return _sum(F), _sum(GH)


def polarized_profiles(ops: CascadeOperators, g: np.ndarray, f: np.ndarray) -> tuple[Profile, Profile]:
    u = Profile({3: g[:, None] * ops.e3, -3: np.conj(g)[:, None] * ops.e3.conj()})
    v = Profile({1: f[:, None] * ops.e1, -1: np.conj(f)[:, None] * ops.e1.conj()})
    return u, v


leading_profiles = polarized_profiles


def _transport_part(ops: CascadeOperators, grid: Grid1D, prof: Profile, rate: Profile, family: str) -> Profile:
    """(d/dt + A d/dx) applied to a profile whose time derivative is ``rate``."""
    A = ops.flux_matrix(family)
    flux = prof.map_harmonics(lambda p, h: grid.derivative(h) @ A.T)
    return rate + flux


AMPLITUDES = ("g", "f", "g2", "f2")
FD_STEP = 1e-4


@dataclass
class CascadeLevels:
    """Profiles of every level plus the transport sources and rates of the amplitudes."""

    u: list
    v: list
    sources: dict
    rates: dict

    @property
    def u0(self):
        return self.u[0]

    @property
    def v0(self):
        return self.v[0]

    @property
    def u1(self):
        return self.u[1]

    @property
    def v1(self):
        return self.v[1]

    @property
    def u2(self):
        return self.u[2] if len(self.u) > 2 else None

    @property
    def v2(self):
        return self.v[2] if len(self.v) > 2 else None

    @property
    def source_g(self):
        return self.sources["g"]

    @property
    def source_f(self):
        return self.sources["f"]


def _coords(ops: CascadeOperators, F: Profile, GH: Profile, n: int) -> tuple[np.ndarray, np.ndarray]:
    e3n = np.vdot(ops.e3, ops.e3).real
    e1n = np.vdot(ops.e1, ops.e1).real
    return F.get(3, n) @ ops.e3.conj() / e3n, GH.get(1, n) @ ops.e1.conj() / e1n


def _velocities(ops: CascadeOperators) -> dict:
    return {"g": ops.velocity_g, "f": ops.velocity_f, "g2": ops.velocity_g, "f2": ops.velocity_f}


def _slaved_second(ops, grid, amps, sources_off):
    """Part of the second level off the kernels, with the sources and rates of (g, f)."""
    lev = cascade_levels(ops, grid, {"g": amps["g"], "f": amps["f"]}, depth=2, sources_off=sources_off)
    return lev.u[2], lev.v[2], lev


def cascade_levels(
    ops: CascadeOperators,
    grid: Grid1D,
    amps: dict,
    depth: int = 2,
    sources_off: bool = False,
) -> CascadeLevels:
    """Profiles of levels 0..depth for the amplitudes ``amps`` (keys g, f and optionally g2, f2).

    Level j only carries harmonics of the parity of j+1, so the polarized parts of the odd
    levels vanish and the polarized amplitudes live on levels 0 and 2.

    depth 1: leading profiles and first correctors (enough for the sources of g, f).
    depth 2: adds the second level: slaved part plus (g2, f2) along the kernels.
    depth 3: adds the slaved third level.
    depth 4: adds the sources of (g2, f2) and the slaved fourth level.
    """
    if not 1 <= depth <= 4:
        raise ValueError("depth must lie in 1..4")
    n = grid.n_points
    zero = np.zeros(n, complex)
    amps = {k: amps.get(k, zero) for k in AMPLITUDES}
    vel = _velocities(ops)
    u0, v0 = polarized_profiles(ops, amps["g"], amps["f"])
    us, vs = [u0], [v0]
    F0, GH0 = quadratic_level(us, vs, 0)
    us.append(_solve_off_kernel(ops, "L", F0))
    vs.append(_solve_off_kernel(ops, "M", GH0))
    F1, GH1 = quadratic_level(us, vs, 1)
    sources, rates = {}, {}
    sources["g"], sources["f"] = (zero, zero) if sources_off else _coords(ops, F1, GH1, n)
    for key in ("g", "f"):
        rates[key] = -vel[key] * grid.derivative(amps[key]) + sources[key]
    if depth == 1:
        return CascadeLevels(us, vs, sources, rates)
    du0, dv0 = polarized_profiles(ops, rates["g"], rates["f"])
    tu0 = _transport_part(ops, grid, u0, du0, "L")
    tv0 = _transport_part(ops, grid, v0, dv0, "M")
    su2 = _solve_off_kernel(ops, "L", F1 + tu0.scaled(-1.0))
    sv2 = _solve_off_kernel(ops, "M", GH1 + tv0.scaled(-1.0))
    pu2, pv2 = polarized_profiles(ops, amps["g2"], amps["f2"])
    us.append(su2 + pu2)
    vs.append(sv2 + pv2)
    if depth == 2:
        return CascadeLevels(us, vs, sources, rates)
    dF0, dGH0 = quadratic_level(us, vs, 0, tangent=([du0], [dv0]))
    tu1 = _transport_part(ops, grid, us[1], _solve_off_kernel(ops, "L", dF0), "L")
    tv1 = _transport_part(ops, grid, vs[1], _solve_off_kernel(ops, "M", dGH0), "M")
    F2, GH2 = quadratic_level(us, vs, 2)
    us.append(_solve_off_kernel(ops, "L", F2 + tu1.scaled(-1.0)))
    vs.append(_solve_off_kernel(ops, "M", GH2 + tv1.scaled(-1.0)))
    if depth == 3:
        return CascadeLevels(us, vs, sources, rates)
    # time derivative of the slaved second level along the flow of (g, f)
    h = FD_STEP
    shift = lambda sgn: {"g": amps["g"] + sgn * h * rates["g"], "f": amps["f"] + sgn * h * rates["f"]}
    plus_u, plus_v, _ = _slaved_second(ops, grid, shift(1), sources_off)
    minus_u, minus_v, _ = _slaved_second(ops, grid, shift(-1), sources_off)
    dsu2 = (plus_u + minus_u.scaled(-1.0)).scaled(1.0 / (2 * h))
    dsv2 = (plus_v + minus_v.scaled(-1.0)).scaled(1.0 / (2 * h))
    tsu2 = _transport_part(ops, grid, su2, dsu2, "L")
    tsv2 = _transport_part(ops, grid, sv2, dsv2, "M")
    F3, GH3 = quadratic_level(us, vs, 3)
    sources["g2"], sources["f2"] = (zero, zero) if sources_off else _coords(
        ops, F3 + tsu2.scaled(-1.0), GH3 + tsv2.scaled(-1.0), n
    )
    for key in ("g2", "f2"):
        rates[key] = -vel[key] * grid.derivative(amps[key]) + sources[key]
    dpu2, dpv2 = polarized_profiles(ops, rates["g2"], rates["f2"])
    tu2 = tsu2 + _transport_part(ops, grid, pu2, dpu2, "L")
    tv2 = tsv2 + _transport_part(ops, grid, pv2, dpv2, "M")
    us.append(_solve_off_kernel(ops, "L", F3 + tu2.scaled(-1.0)))
    vs.append(_solve_off_kernel(ops, "M", GH3 + tv2.scaled(-1.0)))
    return CascadeLevels(us, vs, sources, rates)


PRECISION_DEPTH = {"leading": 2, "extended": 4}


@dataclass
class WKBSolution:
    """Amplitudes of the polarized parts at time t. ``precision`` selects the cascade depth:

    leading: (g, f) transported, second level slaved, its polarized part (g2, f2) held at zero.
    extended: also transports (g2, f2) and slaves the third and fourth levels, which removes
    the secular O(eps t) drift that the leading construction leaves along the kernels.
    """

    params: ModelParams
    phase: Phase
    grid: Grid1D
    amps: dict
    t: float = 0.0
    T: float = 1.0
    precision: str = "leading"

    def __post_init__(self):
        if self.precision not in PRECISION_DEPTH:
            raise ValueError(f"precision must be one of {sorted(PRECISION_DEPTH)}")

    @property
    def g(self):
        return self.amps["g"]

    @property
    def f(self):
        return self.amps["f"]

    @property
    def depth(self) -> int:
        return PRECISION_DEPTH[self.precision]

    @property
    def transported(self) -> tuple:
        return AMPLITUDES if self.precision == "extended" else AMPLITUDES[:2]

    @property
    def ops(self) -> CascadeOperators:
        return _ops_cache(self.params, self.phase)

    def levels(self, grid: Optional[Grid1D] = None) -> CascadeLevels:
        return cascade_levels(self.ops, grid or self.grid, self.amplitudes_on(grid), depth=self.depth)

    def amplitudes_on(self, grid: Optional[Grid1D] = None) -> dict:
        if grid is None or grid == self.grid:
            return self.amps
        if abs(grid.length - self.grid.length) > 1e-12 * grid.length:
            raise ValueError("amplitude grid and evaluation grid must share the period")
        return {k: self.grid.resample(a, grid.n_points) for k, a in self.amps.items()}


_OPS: dict = {}


def _ops_cache(params: ModelParams, phase: Phase) -> CascadeOperators:
    key = (params.theta0, params.alpha0, params.omega0, phase)
    if key not in _OPS:
        _OPS[key] = CascadeOperators(params, phase)
    return _OPS[key]


def cascade_init(
    params: ModelParams,
    phase: Phase,
    grid: Grid1D,
    v0: np.ndarray,
    T: float = 1.0,
    precision: str = "leading",
) -> WKBSolution:
    """Approximate solution at t=0 from a polarized fundamental amplitude v0 of shape (N, 3)."""
    v0 = np.asarray(v0, dtype=complex)
    check_polarized(params, phase, v0)
    e1 = polarization_vector(params, phase, 1)
    f = v0 @ e1.conj() / np.vdot(e1, e1).real
    zero = np.zeros(grid.n_points, complex)
    amps = {"g": zero, "f": f, "g2": zero.copy(), "f2": zero.copy()}
    return WKBSolution(params, phase, grid, amps, 0.0, T, precision)


def transport_rhs(sol: WKBSolution, amps: dict, sources_off: bool = False) -> dict:
    depth = 4 if sol.precision == "extended" else 1
    lev = cascade_levels(sol.ops, sol.grid, amps, depth=depth, sources_off=sources_off)
    return {k: lev.sources[k] for k in sol.transported}


def transport_advance(
    sol: WKBSolution,
    dt: float,
    n_steps: int,
    sources_off: bool = False,
    blowup: float = 1e6,
    backward: bool = False,
) -> WKBSolution:
    """Advance the amplitudes: exact Fourier shift for advection, RK4 (integrating factor) for sources.

    The transport system is reversible; ``backward=True`` permits a negative ``dt``.
    """
    if n_steps < 0 or (dt < 0 and not backward):
        raise ValueError("dt and n_steps must be nonnegative")
    ops = sol.ops
    keys = sol.transported
    vel = _velocities(ops)
    if abs(dt) * max(abs(ops.velocity_g), abs(ops.velocity_f)) >= sol.grid.dx:
        raise TransportError(f"advection CFL violated: dt={dt}, dx={sol.grid.dx}")
    if sol.t + dt * n_steps > sol.T * (1 + 1e-12):
        raise TransportError(f"horizon exceeded: t={sol.t + dt * n_steps} > T={sol.T}")
    xi = sol.grid.xi
    half = np.stack([np.exp(-1j * vel[k] * xi * dt / 2) for k in keys])
    full = half**2
    rest = {k: a for k, a in sol.amps.items() if k not in keys}

    def nl(A):
        phys = dict(rest)
        phys.update({k: sfft.ifft(a) for k, a in zip(keys, A)})
        src = transport_rhs(sol, phys, sources_off)
        return np.stack([sfft.fft(src[k]) for k in keys])

    A = np.stack([sfft.fft(sol.amps[k]) for k in keys])
    for _ in range(n_steps):
        A = lawson_rk4_step(A, 0.0, dt, lambda X: half * X, lambda X: full * X, lambda t, X: nl(X))
        if not np.all(np.isfinite(A)):
            raise TransportError("non-finite amplitude")
        amp = np.max(np.abs(A)) / sol.grid.n_points
        if amp > blowup:
            raise TransportError(f"amplitude blow-up guard tripped ({amp:.3g})")
    amps = dict(sol.amps)
    amps.update({k: sfft.ifft(a) for k, a in zip(keys, A)})
    return replace(sol, amps=amps, t=sol.t + dt * n_steps)


def initial_rate(sol: WKBSolution, dt: float = 1e-4, key: str = "g") -> np.ndarray:
    """Time derivative of one amplitude from a micro-step forward and one backward (central difference)."""
    fwd = transport_advance(sol, dt, 1)
    bwd = transport_advance(sol, -dt, 1, backward=True)
    return (fwd.amps[key] - bwd.amps[key]) / (2 * dt)


def transport_history(sol: WKBSolution, times, dt_max: float) -> list[WKBSolution]:
    """Snapshots of the amplitudes at increasing times (steps of at most dt_max in between)."""
    out, cur = [], sol
    for t in times:
        span = t - cur.t
        if span < -1e-14:
            raise ValueError("times must be nondecreasing and start at or after sol.t")
        n = int(np.ceil(span / dt_max - 1e-9)) if span > 0 else 0
        if n:
            cur = transport_advance(cur, span / n, n)
        out.append(cur)
    return out


def carrier_phase(phase: Phase, grid: Grid1D, t: float, epsilon: float) -> np.ndarray:
    if not grid.is_on_grid(phase.k / epsilon):
        raise SnapError(f"carrier k/eps = {phase.k / epsilon} is not a grid wavenumber")
    return (phase.k * grid.x - phase.omega * t) / epsilon


def evaluate_levels(lev: CascadeLevels, theta: np.ndarray, epsilon: float, orders: Optional[int] = None):
    """Real fields sum_n eps^(n/2) (u_n, v_n) over levels n <= orders."""
    top = len(lev.u) - 1 if orders is None else min(orders, len(lev.u) - 1)
    u = np.zeros((theta.size, 3))
    v = np.zeros((theta.size, 3))
    for n in range(top + 1):
        w = epsilon ** (n / 2)
        u = u + w * lev.u[n].evaluate(theta)
        v = v + w * lev.v[n].evaluate(theta)
    return u, v


def evaluate_wkb(
    sol: WKBSolution, t: float, epsilon: float, grid: Optional[Grid1D] = None, orders: Optional[int] = None
) -> tuple[np.ndarray, np.ndarray]:
    """Real fields (u^a, v^a) of shape (N, 3) at time t; sol must already be advanced to t."""
    if abs(sol.t - t) > 1e-12 * max(1.0, abs(t)):
        raise ValueError(f"solution is at t={sol.t}, requested t={t}")
    if t > sol.T * (1 + 1e-12):
        raise ValueError("t beyond the validity horizon")
    grid = grid or sol.grid
    theta = carrier_phase(sol.phase, grid, t, epsilon)
    return evaluate_levels(sol.levels(grid), theta, epsilon, orders)


def _level_rates(sol: WKBSolution, grid: Grid1D, h: float = 1e-4):
    """Time derivatives of every level by a central difference along the transport flow.

    All levels are polynomials (degree <= 5) in the amplitudes and their x-derivatives, so
    the O(h^2) truncation is far below the residuals being measured.
    """
    ops = sol.ops
    amps = sol.amplitudes_on(grid)
    base = cascade_levels(ops, grid, amps, depth=sol.depth)
    moved = [k for k in sol.transported]
    shifted = lambda sgn: {k: a + sgn * h * base.rates[k] if k in moved else a for k, a in amps.items()}
    plus = cascade_levels(ops, grid, shifted(+1), depth=sol.depth)
    minus = cascade_levels(ops, grid, shifted(-1), depth=sol.depth)
    diff = lambda a, b: (a + b.scaled(-1.0)).scaled(1.0 / (2 * h))
    du = [diff(a, b) for a, b in zip(plus.u, minus.u)]
    dv = [diff(a, b) for a, b in zip(plus.v, minus.v)]
    return base, du, dv


def residual_fields(sol: WKBSolution, epsilon: float, grid: Grid1D, orders: Optional[int] = None):
    """Pointwise residual of the full system for (u^a, v^a) at sol.t, shape (N, 3) each."""
    from .solver import apply_linear_operator, nonlinearity_real

    base, du, dv = _level_rates(sol, grid)
    theta = carrier_phase(sol.phase, grid, sol.t, epsilon)
    u, v = evaluate_levels(base, theta, epsilon, orders)
    top = len(base.u) - 1 if orders is None else min(orders, len(base.u) - 1)
    w = sol.phase.omega / epsilon
    ut = np.zeros_like(u)
    vt = np.zeros_like(v)
    for n in range(top + 1):
        wn = epsilon ** (n / 2)
        ut += wn * (du[n] + base.u[n].map_harmonics(lambda p, h: -1j * p * w * h)).evaluate(theta)
        vt += wn * (dv[n] + base.v[n].map_harmonics(lambda p, h: -1j * p * w * h)).evaluate(theta)
    lu, lv = apply_linear_operator(sol.params, grid, u, v, epsilon)
    nu, nv = nonlinearity_real(u, v, epsilon)
    return ut + lu - nu, vt + lv - nv


def residual_norm(sol: WKBSolution, epsilon: float, grid: Grid1D, orders: Optional[int] = None) -> float:
    ru, rv = residual_fields(sol, epsilon, grid, orders)
    return grid.l2_norm(np.concatenate([ru, rv], axis=1))


def residual_order(norms: dict) -> float:
    """Least-squares slope of log residual against log epsilon."""
    eps = np.array(sorted(norms))
    if eps.size < 3 or eps[-1] / eps[0] < 10 * (1 - 1e-9):
        raise ValueError("need at least three epsilons spanning a decade")
    vals = np.array([norms[e] for e in eps])
    return float(np.polyfit(np.log(eps), np.log(vals), 1)[0])


def export_snapshot(sol: WKBSolution, epsilon: float, path_prefix: str, grid: Optional[Grid1D] = None) -> None:
    """Columnar text (x, Re/Im per harmonic and component) plus a JSON header."""
    grid = grid or sol.grid
    lev = sol.levels(grid)
    cols, names = [grid.x], ["x"]
    named = [(f"{b}{n}", prof) for n in range(len(lev.u)) for b, prof in (("u", lev.u[n]), ("v", lev.v[n]))]
    for level_name, prof in named:
        for p in sorted(prof.harmonics):
            for c in range(3):
                h = prof.harmonics[p][:, c]
                cols += [h.real, h.imag]
                names += [f"{level_name}_p{p:+d}_c{c + 1}_re", f"{level_name}_p{p:+d}_c{c + 1}_im"]
    np.savetxt(f"{path_prefix}.txt", np.column_stack(cols), header=" ".join(names), fmt="%.17g")
    header = {
        "phase": {"omega": sol.phase.omega, "k": sol.phase.k},
        "epsilon": epsilon,
        "t": sol.t,
        "precision": sol.precision,
        "columns": names,
    }
    with open(f"{path_prefix}.json", "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
