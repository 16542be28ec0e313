"""Quadratic couplings, polarization vectors, resonance sets and transparency.

A resonance spec (i, j, p, delta, sigma) pairs the branch i of family delta at
xi + p*k with the branch j of family sigma at xi through the carrier harmonic p.
Each spec carries up to two coupling coefficients:

* forward:  Pi^delta_i(xi+pk) B(e_p) Pi^sigma_j(xi)
* backward: Pi^sigma_j(xi) B(e_-p) Pi^delta_i(xi+pk)

The bilinear form B is fixed by which equation receives the output and which
unknown is the input (see ``coupling_bilinear``).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .model import (
    BRANCHES,
    FAMILIES,
    ModelParams,
    ModeSpec,
    Phase,
    branch_frequency,
    char_matrix,
    dispersion,
    harmonic_kernel_projector,
    kernel_vector,
    partial_inverse,
    projector,
)

TOL_ZERO = 1e-12
NONZERO_THRESHOLD = 1e-3
HARMONICS = (-3, -1, 1, 3)


class ResonanceError(RuntimeError):
    pass


class PolarizationError(ValueError):
    pass


# --- bilinear forms -------------------------------------------------------

def _F(u, v):
    out = np.zeros(np.broadcast_shapes(np.shape(u), np.shape(v)), dtype=np.result_type(u, v, float))
    out[..., 1] = u[..., 2] * v[..., 2]
    return out


def _G(u, v):
    out = np.zeros(np.broadcast_shapes(np.shape(u), np.shape(v)), dtype=np.result_type(u, v, float))
    out[..., 1] = -u[..., 1] * v[..., 1]
    return out


def _H(u, v):
    out = np.zeros(np.broadcast_shapes(np.shape(u), np.shape(v)), dtype=np.result_type(u, v, float))
    out[..., 1] = u[..., 1] * v[..., 1]
    return out


BILINEARS: dict[str, Callable] = {"F": _F, "G": _G, "H": _H}


def bilinear(B, u, v):
    """Evaluate B(u, v) on trailing 3-vectors. B is "F", "G", "H" or a callable."""
    fn = BILINEARS[B] if isinstance(B, str) else B
    return fn(np.asarray(u), np.asarray(v))


def bilinear_matrix(B, a) -> np.ndarray:
    """Matrix of the linear map v -> B(a, v)."""
    a = np.asarray(a, dtype=complex)
    cols = [bilinear(B, a, np.eye(3, dtype=complex)[c]) for c in range(3)]
    return np.stack(cols, axis=-1)


# output family, input family, |harmonic| -> bilinear form of the linearized system
_COUPLING_TABLE = {
    ("L", "L", 1): "F",
    ("L", "M", 1): "F",
    ("M", "M", 1): "H",
    ("L", "M", 3): "F",
    ("M", "L", 3): "G",
}


def coupling_bilinear(out_family: str, in_family: str, harmonic: int) -> Optional[str]:
    return _COUPLING_TABLE.get((out_family, in_family, abs(harmonic)))


# --- polarization vectors -------------------------------------------------

def polarization_vector(params: ModelParams, phase: Phase, p: int) -> np.ndarray:
    """Kernel vector e_p of the characteristic matrix at harmonic p (p in +-1, +-3)."""
    if p == 1:
        return kernel_vector(params, ModeSpec("M", "+"), phase.k)
    if p == 3:
        return kernel_vector(params, ModeSpec("L", "+"), 3 * phase.k)
    if p in (-1, -3):
        return polarization_vector(params, phase, -p).conj()
    raise ValueError(f"no polarization vector for harmonic {p}")


# --- resonances -----------------------------------------------------------

@dataclass(frozen=True)
class ResonanceSpec:
    i: str
    j: str
    p: int
    delta: str
    sigma: str

    def __post_init__(self):
        if self.i not in BRANCHES or self.j not in BRANCHES:
            raise ValueError(f"bad branches in {self}")
        if self.delta not in FAMILIES or self.sigma not in FAMILIES:
            raise ValueError(f"bad families in {self}")
        if self.p not in HARMONICS:
            raise ValueError(f"harmonic must be one of {HARMONICS}")

    def mirror(self) -> "ResonanceSpec":
        return ResonanceSpec(self.j, self.i, -self.p, self.sigma, self.delta)

    def label(self) -> str:
        return f"({self.i},{self.j},{self.p:+d},{self.delta},{self.sigma})"


ALL_SPECS = tuple(
    ResonanceSpec(i, j, p, d, s)
    for i, j, p, d, s in product(BRANCHES, BRANCHES, HARMONICS, FAMILIES, FAMILIES)
)


def resonant_phase(params: ModelParams, phase: Phase, spec: ResonanceSpec, xi):
    xi = np.asarray(xi, dtype=float)
    return (
        branch_frequency(params, spec.delta, spec.i, xi + spec.p * phase.k)
        - spec.p * phase.omega
        - branch_frequency(params, spec.sigma, spec.j, xi)
    )


def xi1(params: ModelParams, phase: Phase) -> float:
    return float(np.sqrt(9 * phase.omega**2 - params.omega0**2) / params.theta0)


def default_window(params: ModelParams, phase: Phase) -> tuple[float, float]:
    half = 20.0 * max(abs(phase.k), xi1(params, phase))
    return (-half, half)


def closed_form_resonances(params: ModelParams, phase: Phase, spec: ResonanceSpec):
    """Roots when one side sits on the zero branch, else None."""
    if (spec.i == "0") == (spec.j == "0"):
        return [] if spec.i == "0" else None
    pw = spec.p * phase.omega
    if spec.j == "0":
        fam, sign, shift = spec.delta, 1.0 if spec.i == "+" else -1.0, spec.p * phase.k
        target = sign * pw  # disp(xi + pk) = sign * p * omega
    else:
        fam, sign, shift = spec.sigma, 1.0 if spec.j == "+" else -1.0, 0.0
        target = -sign * pw
    if target <= 0:
        return []
    c, m = params.speed[fam], params.mass[fam]
    rad = target**2 - m**2
    if rad < 0:
        return []
    y = np.sqrt(rad) / c
    return sorted({float(y - shift), float(-y - shift)})


def find_resonances(
    params: ModelParams,
    phase: Phase,
    spec: ResonanceSpec,
    window: Optional[tuple[float, float]] = None,
    n_scan: int = 40001,
    xtol: float = 1e-13,
) -> list[float]:
    lo, hi = window if window is not None else default_window(params, phase)
    grid = np.linspace(lo, hi, n_scan)
    vals = resonant_phase(params, phase, spec, grid)
    scale = max(1.0, float(np.max(np.abs(vals))))
    fn = lambda s: float(resonant_phase(params, phase, spec, s))
    roots = [float(s) for s in grid[vals == 0.0]]
    for idx in np.nonzero(vals[:-1] * vals[1:] < 0)[0]:
        roots.append(float(brentq(fn, grid[idx], grid[idx + 1], xtol=xtol, rtol=4 * np.finfo(float).eps)))
    # tangential zeros: local minima of |phase| that nearly touch zero without a sign change
    absv = np.abs(vals)
    interior = (absv[1:-1] <= absv[:-2]) & (absv[1:-1] <= absv[2:])
    for idx in np.nonzero(interior & (absv[1:-1] < 1e-9 * scale))[0] + 1:
        if not any(abs(grid[idx] - r) < 2 * (grid[1] - grid[0]) for r in roots):
            raise ResonanceError(f"tangential zero of {spec.label()} near xi={grid[idx]:.6g}")
    roots.sort()
    for a, b in zip(roots[:-1], roots[1:]):
        if b - a < 1e-8:
            raise ResonanceError(f"colliding resonance points {a}, {b} for {spec.label()}")
    return roots


# --- coupling coefficients ------------------------------------------------

def _pi(params, family, branch, xi):
    return projector(params, ModeSpec(family, branch), xi)


def interaction_coefficient(
    params: ModelParams, phase: Phase, spec: ResonanceSpec, B, xi, backward: bool = False
) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    shifted = xi + spec.p * phase.k
    if not backward:
        Bm = bilinear_matrix(B, polarization_vector(params, phase, spec.p))
        return _pi(params, spec.delta, spec.i, shifted) @ Bm @ _pi(params, spec.sigma, spec.j, xi)
    Bm = bilinear_matrix(B, polarization_vector(params, phase, -spec.p))
    return _pi(params, spec.sigma, spec.j, xi) @ Bm @ _pi(params, spec.delta, spec.i, shifted)


@dataclass(frozen=True)
class CoefficientKey:
    """Coupling identified by output mode, input mode, harmonic and bilinear form."""

    out_mode: tuple
    in_mode: tuple
    harmonic: int
    bilinear: str

    def label(self) -> str:
        o, i = "".join(self.out_mode), "".join(self.in_mode)
        return f"{o}<-{i} q={self.harmonic:+d} {self.bilinear}"


@dataclass
class TransparencyReport:
    spec: ResonanceSpec
    bilinear: str
    backward: bool
    points: list
    coefficient_norms_at_points: list
    verdict: str
    key: CoefficientKey = None
    input_points: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.label(),
            "bilinear": self.bilinear,
            "direction": "backward" if self.backward else "forward",
            "coefficient": self.key.label(),
            "points": self.points,
            "norms": self.coefficient_norms_at_points,
            "verdict": self.verdict,
        }


def _key_for(spec: ResonanceSpec, B: str, backward: bool) -> CoefficientKey:
    if not backward:
        return CoefficientKey((spec.delta, spec.i), (spec.sigma, spec.j), spec.p, B)
    return CoefficientKey((spec.sigma, spec.j), (spec.delta, spec.i), -spec.p, B)


def classify_transparency(
    params: ModelParams,
    phase: Phase,
    spec: ResonanceSpec,
    B: str,
    backward: bool = False,
    tol_zero: float = TOL_ZERO,
    window: Optional[tuple[float, float]] = None,
) -> TransparencyReport:
    points = find_resonances(params, phase, spec, window)
    norms = [float(np.linalg.norm(interaction_coefficient(params, phase, spec, B, s, backward), 2)) for s in points]
    if not points:
        verdict = "empty-set"
    elif max(norms) < tol_zero:
        verdict = "transparent"
    else:
        verdict = "non-transparent"
    in_points = [s + spec.p * phase.k if backward else s for s in points]
    return TransparencyReport(spec, B, backward, points, norms, verdict, _key_for(spec, B, backward), in_points)


def transparency_table(params: ModelParams, phase: Phase, tol_zero: float = TOL_ZERO) -> list[TransparencyReport]:
    """Reports for every spec and direction that carries a coupling of the linearized system."""
    out = []
    for spec in ALL_SPECS:
        for backward in (False, True):
            if not backward:
                B = coupling_bilinear(spec.delta, spec.sigma, spec.p)
            else:
                B = coupling_bilinear(spec.sigma, spec.delta, spec.p)
            if B is not None:
                out.append(classify_transparency(params, phase, spec, B, backward, tol_zero))
    return out


def nontransparent_couplings(reports, nonzero_threshold: float = NONZERO_THRESHOLD) -> dict:
    """Map coefficient key -> sorted input points where the coefficient exceeds the threshold."""
    found: dict = {}
    for r in reports:
        for s_in, nrm in zip(r.input_points, r.coefficient_norms_at_points):
            if nrm > nonzero_threshold:
                found.setdefault(r.key, set()).add(round(s_in, 8))
    return {k: sorted(v) for k, v in found.items()}


def expected_nontransparent(params: ModelParams, phase: Phase) -> dict:
    """The non-transparent couplings predicted for this system, keyed like ``nontransparent_couplings``."""
    k = phase.k
    x2, x3 = resonance_pair(params, phase)
    r = lambda pts: sorted(round(float(s), 8) for s in pts)
    return {
        CoefficientKey(("L", "+"), ("M", "0"), 3, "F"): r([-6 * k]),
        CoefficientKey(("L", "-"), ("M", "0"), -3, "F"): r([6 * k]),
        CoefficientKey(("L", "+"), ("M", "+"), 3, "F"): r([x2, x3]),
        CoefficientKey(("M", "+"), ("L", "+"), -3, "G"): r([x2 + 3 * k, x3 + 3 * k]),
        CoefficientKey(("L", "-"), ("M", "-"), -3, "F"): r([-x2, -x3]),
        CoefficientKey(("M", "-"), ("L", "-"), 3, "G"): r([-x2 - 3 * k, -x3 - 3 * k]),
    }


def zero_coefficient_samples(params: ModelParams, phase: Phase, xi) -> dict:
    """Couplings between zero branches and the carrier that vanish identically."""
    k = phase.k
    xi = np.asarray(xi, dtype=float)
    e1, em1 = polarization_vector(params, phase, 1), polarization_vector(params, phase, -1)
    e3, em3 = polarization_vector(params, phase, 3), polarization_vector(params, phase, -3)
    P = lambda b, s: _pi(params, "L", b, s)
    Q = lambda b, s: _pi(params, "M", b, s)
    Fm, Gm, Hm = (lambda a: bilinear_matrix("F", a)), (lambda a: bilinear_matrix("G", a)), (lambda a: bilinear_matrix("H", a))
    return {
        "P0(xi) F(e-1) Q+(xi+k)": P("0", xi) @ Fm(em1) @ Q("+", xi + k),
        "Q+(xi+k) H(e1) Q0(xi)": Q("+", xi + k) @ Hm(e1) @ Q("0", xi),
        "P0(xi) F(e-1) P+(xi+k)": P("0", xi) @ Fm(em1) @ P("+", xi + k),
        "Q0(xi) G(e-3) P+(xi+3k)": Q("0", xi) @ Gm(em3) @ P("+", xi + 3 * k),
        "Q+(xi+3k) G(e3) P0(xi)": Q("+", xi + 3 * k) @ Gm(e3) @ P("0", xi),
        "P0(xi) F(e-3) Q+(xi+3k)": P("0", xi) @ Fm(em3) @ Q("+", xi + 3 * k),
    }


# --- weak transparency ----------------------------------------------------

@dataclass
class WeakTransparencyResult:
    passed: bool
    max_residual: float
    residuals: dict
    offending: Optional[tuple] = None


def weak_transparency_audit(
    params: ModelParams,
    phase: Phase,
    pmax: int = 6,
    bilinears: Optional[dict] = None,
    tol: float = TOL_ZERO,
) -> WeakTransparencyResult:
    """Kernel-projected harmonic sums of the quadratic terms for every |p| <= pmax."""
    if pmax < 6:
        raise ValueError("pmax must be at least 6")
    Bs = dict(BILINEARS)
    if bilinears:
        Bs.update(bilinears)
    P = {q: harmonic_kernel_projector(params, phase, "L", q) for q in range(-2 * pmax, 2 * pmax + 1)}
    Q = {q: harmonic_kernel_projector(params, phase, "M", q) for q in range(-2 * pmax, 2 * pmax + 1)}
    basis = np.eye(3, dtype=complex)
    residuals, worst, offending = {}, 0.0, None
    for p in range(-pmax, pmax + 1):
        res_p = 0.0
        for a, b in product(range(3), range(3)):
            su = np.zeros(3, complex)
            sv = np.zeros(3, complex)
            for p1 in range(-pmax, pmax + 1):
                p2 = p - p1
                if abs(p2) > pmax:
                    continue
                su += bilinear(Bs["F"], (P[p1] + Q[p1]) @ basis[a], Q[p2] @ basis[b])
                sv += bilinear(Bs["G"], P[p1] @ basis[a], P[p2] @ basis[b])
                sv += bilinear(Bs["H"], Q[p1] @ basis[a], Q[p2] @ basis[b])
            r = max(np.linalg.norm(P[p] @ su), np.linalg.norm(Q[p] @ sv))
            if r > res_p:
                res_p = r
            if r > worst:
                worst = r
                if r >= tol:
                    offending = (p, a, b)
        residuals[p] = float(res_p)
    return WeakTransparencyResult(worst < tol, float(worst), residuals, offending if worst >= tol else None)


# --- growth indices -------------------------------------------------------

def resonance_pair(params: ModelParams, phase: Phase) -> tuple[float, float]:
    """The two roots of lambda(xi+3k) - mu(xi) = 3 omega, positive root first."""
    roots = find_resonances(params, phase, ResonanceSpec("+", "+", 3, "L", "M"))
    if len(roots) != 2:
        raise ResonanceError(f"expected two roots, found {roots}")
    return (roots[1], roots[0])


def gamma1(params: ModelParams, phase: Phase, xi):
    xi = np.asarray(xi, dtype=float)
    k = phase.k
    Fm = bilinear_matrix("F", polarization_vector(params, phase, 3))
    Gm = bilinear_matrix("G", polarization_vector(params, phase, -3))
    Pp = _pi(params, "L", "+", xi + 3 * k)
    M = Pp @ Fm @ _pi(params, "M", "+", xi) @ Gm @ Pp
    return 2.0 * np.real(np.trace(M, axis1=-2, axis2=-1))


def gamma2(params: ModelParams, phase: Phase, xi):
    xi = np.asarray(xi, dtype=float)
    k = phase.k
    Fm = bilinear_matrix("F", polarization_vector(params, phase, -3))
    Gm = bilinear_matrix("G", polarization_vector(params, phase, 3))
    Pm = _pi(params, "L", "-", xi - 3 * k)
    M = Pm @ Fm @ _pi(params, "M", "-", xi) @ Gm @ Pm
    return 2.0 * np.real(np.trace(M, axis1=-2, axis2=-1))


def gamma1_closed_form(params: ModelParams, phase: Phase, xi):
    return params.alpha0 * params.omega0**2 / (6.0 * phase.omega * dispersion(params, "M", xi))


def select_xi0_from(params: ModelParams, points) -> tuple[float, float]:
    a, b = points
    ma, mb = dispersion(params, "M", a), dispersion(params, "M", b)
    if abs(ma - mb) <= 1e-10 * max(ma, mb):
        raise ResonanceError(f"resonance points {a}, {b} have equal mu; growth index ambiguous")
    return (a, b) if ma < mb else (b, a)


def select_xi0(params: ModelParams, phase: Phase) -> tuple[float, float]:
    """(xi0, xi0r): the resonance point with the smaller mu, and the other one."""
    return select_xi0_from(params, resonance_pair(params, phase))


def check_polarized(params: ModelParams, phase: Phase, v0, tol: float = 1e-10):
    v0 = np.asarray(v0, dtype=complex)
    Q1 = harmonic_kernel_projector(params, phase, "M", 1)
    err = np.max(np.abs(v0 @ Q1.T - v0), initial=0.0)
    scale = max(1.0, float(np.max(np.abs(v0), initial=0.0)))
    if err > tol * scale:
        raise PolarizationError(f"amplitude not in the kernel at the carrier (residual {err:.3g})")


def dt_u03_terms(params: ModelParams, phase: Phase, v0) -> dict:
    """The two contributions to the initial time derivative of the third harmonic.

    ``v_corrector``: 2 P(3) F(M(2)^-1 H(v0, v0), v0), through the second harmonic of v.
    ``u_corrector``: P(3) F(L(2)^-1 F(v0, v0), v0), through the second harmonic of u.
    """
    v0 = np.asarray(v0, dtype=complex)
    check_polarized(params, phase, v0)
    P3 = harmonic_kernel_projector(params, phase, "L", 3)
    Minv2 = partial_inverse(params, phase, "M", 2)
    Linv2 = partial_inverse(params, phase, "L", 2)
    v12 = bilinear("H", v0, v0) @ Minv2.T
    u12 = bilinear("F", v0, v0) @ Linv2.T
    return {
        "v_corrector": 2.0 * bilinear("F", v12, v0) @ P3.T,
        "u_corrector": bilinear("F", u12, v0) @ P3.T,
    }


def dt_u03_at_zero(params: ModelParams, phase: Phase, v0) -> np.ndarray:
    terms = dt_u03_terms(params, phase, v0)
    return terms["v_corrector"] + terms["u_corrector"]


def e3_coordinate(params: ModelParams, phase: Phase, w) -> np.ndarray:
    e3 = polarization_vector(params, phase, 3)
    return (np.asarray(w) @ e3.conj()) / np.vdot(e3, e3).real


def dt_g_at_zero(params: ModelParams, phase: Phase, v0) -> np.ndarray:
    return e3_coordinate(params, phase, dt_u03_at_zero(params, phase, v0))


def Gamma1(params: ModelParams, phase: Phase, dtg0) -> float:
    xi0, _ = select_xi0(params, phase)
    return float(np.max(np.abs(dtg0)) * np.sqrt(gamma1(params, phase, xi0)))


def Gamma(params: ModelParams, phase: Phase, g0=None) -> float:
    """First-order index: initial amplitudes at non-transparent harmonics times the coupling strength.

    The only non-transparent harmonics are +-3, whose amplitude g starts at zero, so
    the default ``g0`` (identically zero) gives 0.
    """
    g0 = np.zeros(1) if g0 is None else np.asarray(g0)
    xi0, xi0r = select_xi0(params, phase)
    trace = 0.5 * max(gamma1(params, phase, xi0), gamma1(params, phase, xi0r))
    return float(np.max(np.abs(g0)) ** 2 * trace)
