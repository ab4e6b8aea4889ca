"""
Spectral machinery shared by the phase-field operations.

Arrays are (ny, nx): the periodic x direction runs along the last axis, which is
the axis rfft2 halves. First-derivative multipliers drop the Nyquist wavenumber
so that derivatives of real fields stay real; |k|^2 and |k|^4 keep it.
"""
from dataclasses import dataclass

import numpy as np
import scipy.fft

from core.fields import Field2D

PHASE_BOUND = 1.1


@dataclass(frozen=True, eq=False, repr=False)
class PhaseField(Field2D):
    """Order parameter: -1 is void, +1 is solid."""

    @classmethod
    def from_image(cls, img) -> "PhaseField":
        return cls(2.0 * np.asarray(img, dtype=np.float64) - 1.0)

    def to_image(self) -> Field2D:
        return Field2D(np.clip((self.data + 1.0) / 2.0, 0.0, 1.0))


def _derivative_wavenumbers(k: np.ndarray, n: int) -> np.ndarray:
    k = k.copy()
    if n % 2 == 0:
        k[n // 2] = 0.0
    return k


class SpectralWorkspace:
    def __init__(self, nx: int, ny: int, lx: float, ly: float, workers: int = 1):
        self.shape = (ny, nx)
        self.hx = lx / nx
        self.hy = ly / ny
        self.workers = workers

        kx = 2 * np.pi * scipy.fft.rfftfreq(nx, d=self.hx)
        ky = 2 * np.pi * scipy.fft.fftfreq(ny, d=self.hy)
        self.kx = kx[np.newaxis, :]
        self.ky = ky[:, np.newaxis]

        self.k2 = self.kx**2 + self.ky**2
        self.k4 = self.k2**2

        self.ikx = 1j * _derivative_wavenumbers(kx, nx)[np.newaxis, :]
        self.iky = 1j * _derivative_wavenumbers(ky, ny)[:, np.newaxis]

    @classmethod
    def for_params(cls, params, workers: int = 1) -> "SpectralWorkspace":
        return cls(params.nx, params.ny, params.lx, params.ly, workers=workers)

    def matches(self, shape) -> bool:
        return tuple(shape) == self.shape

    def forward(self, array: np.ndarray) -> np.ndarray:
        return scipy.fft.rfft2(array, workers=self.workers)

    def inverse(self, spectrum: np.ndarray) -> np.ndarray:
        return scipy.fft.irfft2(spectrum, s=self.shape, workers=self.workers)

    def gradient(self, spectrum: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.inverse(self.ikx * spectrum), self.inverse(self.iky * spectrum)

    def divergence_spectrum(self, fx: np.ndarray, fy: np.ndarray) -> np.ndarray:
        return self.ikx * self.forward(fx) + self.iky * self.forward(fy)

    def laplacian(self, array: np.ndarray) -> np.ndarray:
        return self.inverse(-self.k2 * self.forward(array))
