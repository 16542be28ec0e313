"""Parameters, dispersion branches, carrier phase and eigenprojectors of the two
3x3 Klein-Gordon symbols.

Conventions: a plane wave exp(i(xi*x - tau*t)) turns d/dx into i*xi and d/dt into
-i*tau. Family "L" is the u-block (speed 1, mass alpha0*omega0), family "M" the
v-block (speed theta0, mass omega0). Branches "+", "-", "0" carry the eigenvalues
+i*disp, -i*disp and 0 of the constant-coefficient symbol.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

FAMILIES = ("L", "M")
BRANCHES = ("+", "-", "0")
BRANCH_SIGN = {"+": 1.0, "-": -1.0, "0": 0.0}


class ModelParamsError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    theta0: float = 0.5
    alpha0: float = 2.7
    omega0: float = 1.0
    epsilon: float = 1e-2
    allow_outside_regime: bool = False

    def __post_init__(self):
        # outside (2.5, 3) the phase still exists but the resonance structure is not the audited one
        alpha_lo = 0.0 if self.allow_outside_regime else 2.5
        checks = [
            (0.0 < self.theta0 < 1.0, "theta0 must lie in (0, 1)"),
            (alpha_lo < self.alpha0 < 3.0, f"alpha0 must lie in ({alpha_lo:g}, 3)"),
            (self.omega0 > 0.0, "omega0 must be positive"),
            (0.0 < self.epsilon < 1.0, "epsilon must lie in (0, 1)"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ModelParamsError(f"{msg}, got {self}")

    @property
    def mass(self) -> dict:
        return {"L": self.alpha0 * self.omega0, "M": self.omega0}

    @property
    def speed(self) -> dict:
        return {"L": 1.0, "M": self.theta0}


@dataclass(frozen=True)
class Phase:
    omega: float
    k: float


@dataclass(frozen=True)
class ModeSpec:
    family: str
    branch: str

    def __post_init__(self):
        if self.family not in FAMILIES or self.branch not in BRANCHES:
            raise ValueError(f"bad mode {self.family}{self.branch}")


ALL_MODES = tuple(ModeSpec(f, b) for f, b in product(FAMILIES, BRANCHES))


def dispersion(params: ModelParams, family: str, xi):
    c, m = params.speed[family], params.mass[family]
    return np.sqrt(m**2 + (c * np.asarray(xi, dtype=float)) ** 2)


def branch_frequency(params: ModelParams, family: str, branch: str, xi):
    """Signed dispersion branch: +disp, -disp or 0."""
    return BRANCH_SIGN[branch] * dispersion(params, family, xi)


def group_velocity(params: ModelParams, family: str, xi):
    c = params.speed[family]
    xi = np.asarray(xi, dtype=float)
    return c**2 * xi / dispersion(params, family, xi)


def solve_phase(params: ModelParams) -> Phase:
    """Positive carrier (omega, k) with mu(k) = omega and lambda(3k) = 3 omega."""
    a, t, w0 = params.alpha0, params.theta0, params.omega0
    if not 0.0 < a < 3.0:
        raise ModelParamsError(f"no characteristic phase for alpha0={a}")
    k = w0 * np.sqrt((1.0 - a**2 / 9.0) / (1.0 - t**2))
    omega = np.sqrt(k**2 + a**2 * w0**2 / 9.0)
    return Phase(omega=float(omega), k=float(k))


def constant_symbol(params: ModelParams, family: str, xi) -> np.ndarray:
    """Matrix A(i xi) + A0 (the skew-Hermitian generator), shape (..., 3, 3)."""
    xi = np.asarray(xi, dtype=float)
    c, m = params.speed[family], params.mass[family]
    out = np.zeros(xi.shape + (3, 3), dtype=complex)
    out[..., 0, 1] = 1j * c * xi
    out[..., 1, 0] = 1j * c * xi
    out[..., 1, 2] = m
    out[..., 2, 1] = -m
    return out


def char_matrix(params: ModelParams, family: str, tau, xi) -> np.ndarray:
    tau = np.asarray(tau, dtype=float)
    out = constant_symbol(params, family, xi)
    out = out - 1j * tau[..., None, None] * np.eye(3)
    return out


def kernel_vector(params: ModelParams, mode: ModeSpec, xi) -> np.ndarray:
    """Unnormalized eigenvector of constant_symbol for the eigenvalue i*branch(xi)."""
    xi = np.asarray(xi, dtype=float)
    c, m = params.speed[mode.family], params.mass[mode.family]
    out = np.zeros(xi.shape + (3,), dtype=complex)
    if mode.branch == "0":
        out[..., 0] = 1.0
        out[..., 2] = -1j * c * xi / m
    else:
        lam = branch_frequency(params, mode.family, mode.branch, xi)
        out[..., 0] = c * xi / lam
        out[..., 1] = 1.0
        out[..., 2] = 1j * m / lam
    return out


def projector(params: ModelParams, mode: ModeSpec, xi) -> np.ndarray:
    """Orthogonal rank-one eigenprojector, shape (..., 3, 3)."""
    w = kernel_vector(params, mode, xi)
    norm2 = np.sum(np.abs(w) ** 2, axis=-1)
    return w[..., :, None] * w.conj()[..., None, :] / norm2[..., None, None]


def harmonic_kernel_projector(params: ModelParams, phase: Phase, family: str, p: int) -> np.ndarray:
    """Projector onto ker char_matrix(family, p*omega, p*k); zero if the matrix is invertible."""
    tau, xi = p * phase.omega, p * phase.k
    out = np.zeros((3, 3), dtype=complex)
    scale = max(1.0, abs(tau))
    for branch in BRANCHES:
        if abs(branch_frequency(params, family, branch, xi) - tau) <= 1e-12 * scale:
            out = out + projector(params, ModeSpec(family, branch), xi)
    return out


def partial_inverse(params: ModelParams, phase: Phase, family: str, p: int) -> np.ndarray:
    """Inverse of char_matrix(family, p*omega, p*k) on the complement of its kernel.

    Built from the spectral decomposition: the symbol is normal, so the pseudoinverse is
    sum over branches off the kernel of P_j / (i(branch_j - p*omega)).
    """
    tau, xi = p * phase.omega, p * phase.k
    scale = max(1.0, abs(tau))
    out = np.zeros((3, 3), dtype=complex)
    for branch in BRANCHES:
        gap = branch_frequency(params, family, branch, xi) - tau
        if abs(gap) > 1e-12 * scale:
            out = out + projector(params, ModeSpec(family, branch), xi) / (1j * gap)
    return out
