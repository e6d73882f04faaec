"""Uniform rectangular array geometry and steering vectors.

Both the base station and the reflecting panel are planar arrays with
``n_h x n_v`` elements on a rectangular grid; spacings are expressed in
carrier wavelengths, so steering phases never need the absolute carrier
frequency.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ArrayGeometry:
    """Planar array layout: element counts per axis and spacing in wavelengths."""

    n_h: int
    n_v: int
    spacing_h: float = 0.5
    spacing_v: float = 0.5

    def __post_init__(self):
        if self.n_h < 1 or self.n_v < 1:
            raise ValueError(f"element counts must be >= 1, got {self.n_h}x{self.n_v}")
        if self.spacing_h <= 0.0 or self.spacing_v <= 0.0:
            raise ValueError("element spacing must be positive")

    @property
    def n_elements(self) -> int:
        return self.n_h * self.n_v

    def axis_phases(self, azimuth: float, zenith: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-axis phase progressions (radians) for a plane wave from (azimuth, zenith)."""
        u = np.sin(zenith) * np.cos(azimuth)
        v = np.sin(zenith) * np.sin(azimuth)
        ph = 2.0 * np.pi * self.spacing_h * u * np.arange(self.n_h)
        pv = 2.0 * np.pi * self.spacing_v * v * np.arange(self.n_v)
        return ph, pv


def steering_vector(geom: ArrayGeometry, azimuth: float, zenith: float) -> np.ndarray:
    """Array response for a plane wave.

    The horizontal-axis response has entries exp(j*2*pi*spacing_h*(b-1)*
    sin(zenith)*cos(azimuth)) and the vertical one uses sin(zenith)*
    sin(azimuth); the full response is their Kronecker product (horizontal
    axis slow, vertical fast), giving a unit-modulus vector of length
    n_h*n_v with squared norm equal to the element count.
    """
    ph, pv = geom.axis_phases(azimuth, zenith)
    ax = np.exp(1j * ph)
    ay = np.exp(1j * pv)
    return np.kron(ax, ay)


def steering_matrix(geom: ArrayGeometry, azimuths: np.ndarray, zeniths: np.ndarray) -> np.ndarray:
    """Stack of steering vectors, shape ``(len(azimuths), n_elements)``."""
    azimuths = np.asarray(azimuths, dtype=float)
    zeniths = np.asarray(zeniths, dtype=float)
    u = np.sin(zeniths) * np.cos(azimuths)
    v = np.sin(zeniths) * np.sin(azimuths)
    ax = np.exp(1j * 2.0 * np.pi * geom.spacing_h * np.outer(u, np.arange(geom.n_h)))
    ay = np.exp(1j * 2.0 * np.pi * geom.spacing_v * np.outer(v, np.arange(geom.n_v)))
    # row-wise Kronecker product: horizontal axis is the slow index
    return (ax[:, :, None] * ay[:, None, :]).reshape(len(u), geom.n_elements)
