from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft


class SnapError(ValueError):
    pass


@dataclass(frozen=True)
class Grid1D:
    """Periodic grid on [-X/2, X/2) with n_points samples."""

    length: float
    n_points: int

    def __post_init__(self):
        n = self.n_points
        if n < 2 or n & (n - 1):
            raise ValueError(f"n_points must be a power of two, got {n}")
        if self.length <= 0:
            raise ValueError("length must be positive")

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def x(self) -> np.ndarray:
        return -0.5 * self.length + self.dx * np.arange(self.n_points)

    @property
    def dk(self) -> float:
        return 2 * np.pi / self.length

    @property
    def xi(self) -> np.ndarray:
        """Angular wavenumbers of the full complex FFT."""
        return 2 * np.pi * sfft.fftfreq(self.n_points, self.dx)

    @property
    def xi_r(self) -> np.ndarray:
        """Angular wavenumbers of the real FFT."""
        return 2 * np.pi * sfft.rfftfreq(self.n_points, self.dx)

    @property
    def xi_nyquist(self) -> float:
        return np.pi / self.dx

    def snap(self, wavenumber: float, tol: float | None = None) -> float:
        """Nearest representable wavenumber 2*pi*m/X."""
        m = np.rint(wavenumber / self.dk)
        snapped = float(m * self.dk)
        if abs(snapped) >= self.xi_nyquist:
            raise SnapError(f"wavenumber {wavenumber} beyond Nyquist {self.xi_nyquist}")
        if tol is not None and abs(snapped - wavenumber) > tol:
            raise SnapError(f"wavenumber {wavenumber} is {abs(snapped - wavenumber):.3g} off the grid")
        return snapped

    def is_on_grid(self, wavenumber: float, rtol: float = 1e-12) -> bool:
        m = wavenumber / self.dk
        return abs(m - np.rint(m)) <= rtol * max(1.0, abs(m))

    def l2_norm(self, field: np.ndarray) -> float:
        """Discrete L2 norm over x, summed over any trailing component axes."""
        return float(np.sqrt(self.dx * np.sum(np.abs(field) ** 2)))

    def derivative(self, values: np.ndarray, axis: int = 0) -> np.ndarray:
        """Spectral x-derivative of complex (or real) samples along ``axis``.

        The Nyquist mode is dropped so that the derivative commutes with conjugation.
        """
        shape = [1] * np.ndim(values)
        shape[axis] = self.n_points
        xi = self.xi.copy()
        xi[self.n_points // 2] = 0.0
        return sfft.ifft(1j * xi.reshape(shape) * sfft.fft(values, axis=axis), axis=axis)

    def resample(self, values: np.ndarray, n_points: int) -> np.ndarray:
        """Band-limited (Fourier) interpolation of complex samples to another power-of-two size."""
        n_old = self.n_points
        if n_points == n_old:
            return np.array(values, dtype=complex)
        spec = sfft.fft(values, axis=0)
        out = np.zeros((n_points,) + spec.shape[1:], dtype=complex)
        half = min(n_old, n_points) // 2
        out[:half] = spec[:half]
        out[-half:] = spec[-half:]
        if n_points < n_old:
            out[half] = 0.0
        return sfft.ifft(out, axis=0) * (n_points / n_old)


def carrier_grid(k: float, epsilon: float, approx_length: float, n_points: int) -> Grid1D:
    """Grid whose length makes k/epsilon an exact grid wavenumber."""
    m = max(1, int(np.rint(k * approx_length / (2 * np.pi * epsilon))))
    return Grid1D(2 * np.pi * m * epsilon / k, n_points)
