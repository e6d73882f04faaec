"""RIS phase-configuration codebook and reflective-gain evaluation.

A codeword steers the panel so the phases of the BS-side and UE-side
line-of-sight responses cancel: psi = conj(a_RIS(bs side) o a_RIS(ue side)).
The codebook sweeps the UE-side direction over a uniform azimuth x zenith
grid covering the half space in front of the panel:

    azimuth:  (i_phi - 1) * pi / N_phi,          i_phi = 1..N_phi
    zenith:   pi/2 + (i_theta - 1) * (pi/2)/N_theta,  i_theta = 1..N_theta

Entries are numbered 1..N_phi*N_theta in row-major order,
i = (i_phi - 1) * N_theta + i_theta.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .arrays import ArrayGeometry, steering_vector
from .channel import ChannelRealization, wrap_angle


@dataclass(frozen=True)
class PhaseConfig:
    """Unit-modulus RIS profile, stored as per-element phases in radians."""

    phases: np.ndarray

    @property
    def vector(self) -> np.ndarray:
        return np.exp(1j * self.phases)

    @property
    def n_elements(self) -> int:
        return len(self.phases)

    def quantized(self, bits: int) -> "PhaseConfig":
        """Snap phases to a 2^bits uniform grid (hook; continuous by default)."""
        step = 2.0 * np.pi / (1 << bits)
        return PhaseConfig(wrap_angle(np.round(self.phases / step) * step))


def _conjugate_profile(geom_ris: ArrayGeometry, bs_side: tuple[float, float],
                       ue_side: tuple[float, float]) -> PhaseConfig:
    prod = steering_vector(geom_ris, *bs_side) * steering_vector(geom_ris, *ue_side)
    return PhaseConfig(phases=wrap_angle(-np.angle(prod)))


def best_phase_config(geom_ris: ArrayGeometry, bs_side: tuple[float, float],
                      ue_side: tuple[float, float]) -> PhaseConfig:
    """Genie profile conj(a_RIS(bs side) o a_RIS(ue side)) from true LoS angles."""
    return _conjugate_profile(geom_ris, bs_side, ue_side)


@dataclass
class Codebook:
    """Grid codebook; ``entries[i-1]`` is codeword number i."""

    entries: list[PhaseConfig]
    n_azimuth: int
    n_zenith: int
    azimuths: np.ndarray
    zeniths: np.ndarray
    resolution: tuple[float, float] = field(default=(np.pi, np.pi / 2))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def matrix(self) -> np.ndarray:
        """All codewords as unit-modulus rows, shape (N_CB, M)."""
        return np.stack([e.vector for e in self.entries])

    def grid_index(self, i_phi: int, i_theta: int) -> int:
        """1-based codeword number for 1-based grid coordinates."""
        return (i_phi - 1) * self.n_zenith + i_theta

    def export_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["index", "i_phi", "i_theta", "azimuth_rad", "zenith_rad"]
                       + [f"phase_{m + 1}_rad" for m in range(self.entries[0].n_elements)])
            i = 0
            for i_phi in range(1, self.n_azimuth + 1):
                for i_theta in range(1, self.n_zenith + 1):
                    e = self.entries[i]
                    w.writerow([i + 1, i_phi, i_theta,
                                f"{self.azimuths[i_phi - 1]:.12g}",
                                f"{self.zeniths[i_theta - 1]:.12g}"]
                               + [f"{p:.12g}" for p in e.phases])
                    i += 1


def build_codebook(geom_ris: ArrayGeometry, bs_los: tuple[float, float],
                   n_azimuth: int, n_zenith: int) -> Codebook:
    """Sweep the UE-side direction over the azimuth x zenith grid."""
    if n_azimuth < 1 or n_zenith < 1:
        raise ValueError("grid sizes must be >= 1")
    d_phi = np.pi / n_azimuth
    d_theta = (np.pi / 2.0) / n_zenith
    azimuths = d_phi * np.arange(n_azimuth)
    zeniths = np.pi / 2.0 + d_theta * np.arange(n_zenith)
    entries = [
        _conjugate_profile(geom_ris, bs_los, (az, zen))
        for az in azimuths for zen in zeniths
    ]
    return Codebook(entries=entries, n_azimuth=n_azimuth, n_zenith=n_zenith,
                    azimuths=azimuths, zeniths=zeniths, resolution=(d_phi, d_theta))


def reflective_gain(realization: ChannelRealization, psi) -> float:
    """(1/K) sum_k ||H_q,k psi||^2 for one RIS profile."""
    vec = psi.vector if isinstance(psi, PhaseConfig) else np.asarray(psi)
    if vec.shape[0] != realization.n_ris:
        raise ValueError(f"profile length {vec.shape[0]} != M={realization.n_ris}")
    hr = realization.cascaded @ vec
    return float(np.mean(np.sum(np.abs(hr) ** 2, axis=1)))


def upper_bound_reflective(gain_bs_ris: float, gain_ris_ue: float, n_ris: int,
                           mu_e_mag: float = 1.0, mu_u_mag: float = 1.0) -> float:
    """Best-profile reflective channel gain bound L_e*L_u*mu_e^2*mu_u^2*M^2."""
    return gain_bs_ris * gain_ris_ue * (mu_e_mag * mu_u_mag) ** 2 * n_ris ** 2
