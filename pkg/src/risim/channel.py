"""Geometric wideband channel synthesis for the three links of the system.

Each link (BS-UE direct, BS-RIS, RIS-UE) is a superposition of clusters.
A cluster contributes ``gain * steering(aoa/aod) * exp(-j*2*pi*(k-1)*tau/K)``
at the k-th subcarrier, with the delay ``tau`` measured in samples at the
OFDM bandwidth K*delta_f.  Rician links add a deterministic line-of-sight
rank-one term on top of the clustered part; the whole link is then scaled
so the large-scale gain alone sets the average per-element energy:

    direct   h_d,k = sqrt(L_d) * sum_c alpha_c a_BS(aoa_c) e_c(k)
    BS-RIS   G_e,k = sqrt(L_e/(d_e+1)) (sqrt(d_e) LoS_k + NLoS_k)
    RIS-UE   g_u,k = sqrt(L_u/(d_u+1)) (sqrt(d_u) LoS_k + NLoS_k)

Cluster delays follow an exponential profile (scale = RMS delay spread),
azimuth offsets a wrapped Gaussian and zenith offsets a clamped Laplacian
around the line-of-sight direction; mean cluster powers follow
exp(-tau/DS) normalised to unit total so that sum_c sigma_c^2 = 1.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .arrays import ArrayGeometry, steering_matrix, steering_vector
from .errors import ConfigurationError

_TWO_PI = 2.0 * np.pi


def wrap_angle(a):
    """Wrap angles into [-pi, pi)."""
    return np.mod(np.asarray(a) + np.pi, _TWO_PI) - np.pi


@dataclass(frozen=True)
class LinkStatistics:
    """Second-order description of one link, enough to draw cluster sets."""

    large_scale_gain_db: float
    rician_factor: float          # linear; 0 = Rayleigh, inf = pure LoS
    n_clusters: int
    delay_spread_s: float
    asd_deg: float                # azimuth spread of departure
    asa_deg: float                # azimuth spread of arrival
    zsd_deg: float                # zenith spread of departure
    zsa_deg: float                # zenith spread of arrival
    los_aod: tuple[float, float]  # (azimuth, zenith) radians, departure side
    los_aoa: tuple[float, float]  # (azimuth, zenith) radians, arrival side
    los_delay_samples: int = 0
    sample_rate_hz: float = 30.72e6    # K * delta_f, quantises cluster delays
    max_delay_samples: int = 128       # cyclic prefix length L_CP

    def __post_init__(self):
        g = self.large_scale_gain
        if not 0.0 < g <= 1.0:
            raise ConfigurationError(
                f"large-scale gain must be in (0, 1], got {self.large_scale_gain_db} dB")
        if self.rician_factor < 0.0:
            raise ConfigurationError("Rician factor must be >= 0")
        if self.n_clusters < 1:
            raise ConfigurationError("n_clusters must be >= 1")
        if min(self.asd_deg, self.asa_deg, self.zsd_deg, self.zsa_deg) <= 0.0:
            raise ConfigurationError("angular spreads must be positive")
        for az, zen in (self.los_aod, self.los_aoa):
            if not (-np.pi <= az < np.pi) or not (0.0 <= zen <= np.pi):
                raise ConfigurationError(
                    f"LoS angles out of range: azimuth {az}, zenith {zen}")
        if self.delay_spread_s < 0.0:
            raise ConfigurationError("delay spread must be >= 0")

    @property
    def large_scale_gain(self) -> float:
        return 10.0 ** (self.large_scale_gain_db / 10.0)


@dataclass(frozen=True)
class LosPath:
    """Deterministic line-of-sight component of a Rician link."""

    gain: complex                 # mu, unit magnitude with random phase
    delay_samples: int
    aod: tuple[float, float]
    aoa: tuple[float, float]


@dataclass
class ClusterSet:
    """Sampled small-scale state of one link for one coherence block."""

    delay_samples: np.ndarray     # int, (C,)
    gains: np.ndarray             # complex alpha_c, (C,)
    aod: np.ndarray               # (C, 2) azimuth/zenith
    aoa: np.ndarray               # (C, 2)
    mean_powers: np.ndarray       # sigma_c^2, sums to 1
    los: Optional[LosPath] = None

    @property
    def n_clusters(self) -> int:
        return len(self.gains)


def sample_clusters(stats: LinkStatistics, rng: np.random.Generator) -> ClusterSet:
    """Draw one cluster set: delays, powers, gains and angle pairs.

    Raises ConfigurationError when a quantised delay would spill past the
    cyclic prefix (the delay spread is too large for the configured L_CP).
    """
    c = stats.n_clusters
    ds = stats.delay_spread_s
    if ds > 0.0:
        delays_s = rng.exponential(ds, size=c)
        weights = np.exp(-delays_s / ds)
    else:
        delays_s = np.zeros(c)
        weights = np.ones(c)
    delay_samples = np.rint(delays_s * stats.sample_rate_hz).astype(np.int64)
    if int(delay_samples.max(initial=0)) > stats.max_delay_samples:
        raise ConfigurationError(
            f"cluster delay {delay_samples.max()} samples exceeds the cyclic prefix "
            f"({stats.max_delay_samples}); reduce the delay spread")
    mean_powers = weights / weights.sum()

    gains = rng.normal(size=c) + 1j * rng.normal(size=c)
    gains *= np.sqrt(mean_powers / 2.0)

    asd = np.deg2rad(stats.asd_deg)
    asa = np.deg2rad(stats.asa_deg)
    zsd = np.deg2rad(stats.zsd_deg)
    zsa = np.deg2rad(stats.zsa_deg)
    aod_az = wrap_angle(stats.los_aod[0] + rng.normal(0.0, asd, size=c))
    aod_zen = np.clip(stats.los_aod[1] + rng.laplace(0.0, zsd, size=c), 0.0, np.pi)
    aoa_az = wrap_angle(stats.los_aoa[0] + rng.normal(0.0, asa, size=c))
    aoa_zen = np.clip(stats.los_aoa[1] + rng.laplace(0.0, zsa, size=c), 0.0, np.pi)

    los = None
    if stats.rician_factor > 0.0:
        mu = np.exp(1j * rng.uniform(-np.pi, np.pi))
        los = LosPath(gain=mu, delay_samples=stats.los_delay_samples,
                      aod=stats.los_aod, aoa=stats.los_aoa)

    return ClusterSet(
        delay_samples=delay_samples,
        gains=gains,
        aod=np.column_stack([aod_az, aod_zen]),
        aoa=np.column_stack([aoa_az, aoa_zen]),
        mean_powers=mean_powers,
        los=los,
    )


def delay_phasors(delay_samples: np.ndarray, k_subcarriers: int) -> np.ndarray:
    """exp(-j*2*pi*(k-1)*tau/K) for k = 1..K, shape (n_paths, K)."""
    k = np.arange(k_subcarriers)
    return np.exp(-1j * _TWO_PI / k_subcarriers * np.outer(np.asarray(delay_samples), k))


def _rician_weights(gain_linear: float, rician_factor: float) -> tuple[float, float]:
    """(LoS, NLoS) amplitude scalings sqrt(L/(d+1)) * (sqrt(d), 1)."""
    d = rician_factor
    if np.isinf(d):
        return np.sqrt(gain_linear), 0.0
    root = np.sqrt(gain_linear / (d + 1.0))
    return root * np.sqrt(d), root


def synth_direct(clusters: ClusterSet, geom_bs: ArrayGeometry, k_subcarriers: int,
                 gain_linear: float = 1.0) -> np.ndarray:
    """Direct-link frequency response, shape (K, B); Rayleigh, so no LoS record."""
    if clusters.los is not None:
        raise ValueError("direct link is Rayleigh; cluster set must not carry a LoS path")
    a = steering_matrix(geom_bs, clusters.aoa[:, 0], clusters.aoa[:, 1])   # (C, B)
    e = delay_phasors(clusters.delay_samples, k_subcarriers)               # (C, K)
    h = np.einsum("c,ck,cb->kb", clusters.gains, e, a, optimize=True)
    return np.sqrt(gain_linear) * h


def synth_bs_ris(clusters: ClusterSet, geom_bs: ArrayGeometry, geom_ris: ArrayGeometry,
                 k_subcarriers: int, gain_linear: float = 1.0,
                 rician_factor: float = 0.0) -> np.ndarray:
    """BS-RIS frequency response, shape (K, B, M): Rician LoS outer product + clusters."""
    w_los, w_nlos = _rician_weights(gain_linear, rician_factor)
    k = k_subcarriers
    out = np.zeros((k, geom_bs.n_elements, geom_ris.n_elements), dtype=complex)
    if w_nlos != 0.0:
        a_bs = steering_matrix(geom_bs, clusters.aoa[:, 0], clusters.aoa[:, 1])
        a_ris = steering_matrix(geom_ris, clusters.aod[:, 0], clusters.aod[:, 1])
        e = delay_phasors(clusters.delay_samples, k)
        out += w_nlos * np.einsum("c,ck,cb,cm->kbm", clusters.gains, e, a_bs, a_ris,
                                  optimize=True)
    if w_los != 0.0:
        if clusters.los is None:
            raise ValueError("Rician link requires a LoS path in the cluster set")
        los = clusters.los
        a_bs = steering_vector(geom_bs, *los.aoa)
        a_ris = steering_vector(geom_ris, *los.aod)
        e = delay_phasors([los.delay_samples], k)[0]
        out += (w_los * los.gain) * np.einsum("k,b,m->kbm", e, a_bs, a_ris)
    return out


def synth_ris_ue(clusters: ClusterSet, geom_ris: ArrayGeometry, k_subcarriers: int,
                 gain_linear: float = 1.0, rician_factor: float = 0.0) -> np.ndarray:
    """RIS-UE frequency response, shape (K, M)."""
    w_los, w_nlos = _rician_weights(gain_linear, rician_factor)
    k = k_subcarriers
    out = np.zeros((k, geom_ris.n_elements), dtype=complex)
    if w_nlos != 0.0:
        a_ris = steering_matrix(geom_ris, clusters.aoa[:, 0], clusters.aoa[:, 1])
        e = delay_phasors(clusters.delay_samples, k)
        out += w_nlos * np.einsum("c,ck,cm->km", clusters.gains, e, a_ris, optimize=True)
    if w_los != 0.0:
        if clusters.los is None:
            raise ValueError("Rician link requires a LoS path in the cluster set")
        los = clusters.los
        a_ris = steering_vector(geom_ris, *los.aoa)
        e = delay_phasors([los.delay_samples], k)[0]
        out += (w_los * los.gain) * np.outer(e, a_ris)
    return out


def cascade(g_bs_ris: np.ndarray, g_ris_ue: np.ndarray) -> np.ndarray:
    """Element-wise cascaded response H_q[k,b,m] = G_e[k,b,m] * g_u[k,m]."""
    if g_bs_ris.ndim != 3 or g_ris_ue.ndim != 2:
        raise ValueError("expected (K,B,M) and (K,M) arrays")
    if g_bs_ris.shape[0] != g_ris_ue.shape[0] or g_bs_ris.shape[2] != g_ris_ue.shape[1]:
        raise ValueError(
            f"dimension mismatch: {g_bs_ris.shape} vs {g_ris_ue.shape}")
    return g_bs_ris * g_ris_ue[:, None, :]


@dataclass
class ChannelRealization:
    """Frequency responses of the three links for one coherence block."""

    h_direct: np.ndarray          # (K, B)
    g_bs_ris: np.ndarray          # (K, B, M)
    g_ris_ue: np.ndarray          # (K, M)
    _cascaded: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def k_subcarriers(self) -> int:
        return self.h_direct.shape[0]

    @property
    def n_bs(self) -> int:
        return self.h_direct.shape[1]

    @property
    def n_ris(self) -> int:
        return self.g_ris_ue.shape[1]

    @property
    def cascaded(self) -> np.ndarray:
        """H_q, computed on first use and cached."""
        if self._cascaded is None:
            self._cascaded = cascade(self.g_bs_ris, self.g_ris_ue)
        return self._cascaded

    def effective(self, psi: np.ndarray, k: int) -> np.ndarray:
        """Effective BS-UE response h_d,k + H_q,k @ psi at one subcarrier."""
        return self.h_direct[k] + self.cascaded[k] @ np.asarray(psi)

    def effective_all(self, psi: np.ndarray) -> np.ndarray:
        """Effective response at every subcarrier, shape (K, B)."""
        return self.h_direct + self.cascaded @ np.asarray(psi)

    # -- binary regression dump -------------------------------------------
    # layout (little endian): magic 'RISC', u32 version, u32 K, u32 B, u32 M,
    # then h_direct, g_bs_ris, g_ris_ue as float64 re/im interleaved pairs in
    # C order (numpy complex128 byte layout).

    _MAGIC = b"RISC"

    def to_bytes(self) -> bytes:
        head = self._MAGIC + np.array(
            [1, self.k_subcarriers, self.n_bs, self.n_ris], dtype="<u4").tobytes()
        body = b"".join(
            np.ascontiguousarray(a, dtype="<c16").tobytes()
            for a in (self.h_direct, self.g_bs_ris, self.g_ris_ue))
        return head + body

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ChannelRealization":
        if blob[:4] != cls._MAGIC:
            raise ValueError("not a channel dump")
        ver, k, b, m = np.frombuffer(blob[4:20], dtype="<u4")
        if ver != 1:
            raise ValueError(f"unsupported dump version {ver}")
        k, b, m = int(k), int(b), int(m)
        arr = np.frombuffer(blob[20:], dtype="<c16")
        n_hd, n_ge = k * b, k * b * m
        if arr.size != n_hd + n_ge + k * m:
            raise ValueError("truncated channel dump")
        return cls(
            h_direct=arr[:n_hd].reshape(k, b).copy(),
            g_bs_ris=arr[n_hd:n_hd + n_ge].reshape(k, b, m).copy(),
            g_ris_ue=arr[n_hd + n_ge:].reshape(k, m).copy(),
        )


def effective_channel(realization: ChannelRealization, psi: np.ndarray, k: int) -> np.ndarray:
    """Module-level alias for ChannelRealization.effective."""
    return realization.effective(psi, k)


# ---------------------------------------------------------------------------
# Factored path representation.  The simulation engine never materialises the
# (K, B, M) cascade for every training symbol: the reflective response for a
# phase profile psi is a sum over (BS-RIS cluster) x (RIS-UE cluster) pairs,
#   h_r(psi)[k, b] = sum_p g_p * (r_p . psi) * exp(-j*2*pi*(k-1)*tau_p/K) * a_p[b]
# and subcarrier-averaged powers reduce to quadratic forms over paths that
# share a delay (cross terms of unequal integer delays average to zero over a
# full DFT period).
# ---------------------------------------------------------------------------


def _link_paths(clusters: ClusterSet, gain_linear: float, rician_factor: float,
                geom_rx: Optional[ArrayGeometry], geom_tx: Optional[ArrayGeometry]):
    """Per-path (gain, delay, rx steering, tx steering) arrays for one link."""
    w_los, w_nlos = _rician_weights(gain_linear, rician_factor)
    gains, delays, rx, tx = [], [], [], []
    if w_nlos != 0.0:
        gains.append(w_nlos * clusters.gains)
        delays.append(clusters.delay_samples)
        if geom_rx is not None:
            rx.append(steering_matrix(geom_rx, clusters.aoa[:, 0], clusters.aoa[:, 1]))
        if geom_tx is not None:
            tx.append(steering_matrix(geom_tx, clusters.aod[:, 0], clusters.aod[:, 1]))
    if w_los != 0.0 and clusters.los is not None:
        los = clusters.los
        gains.append(np.array([w_los * los.gain]))
        delays.append(np.array([los.delay_samples]))
        if geom_rx is not None:
            rx.append(steering_vector(geom_rx, *los.aoa)[None, :])
        if geom_tx is not None:
            tx.append(steering_vector(geom_tx, *los.aod)[None, :])
    cat = lambda xs: np.concatenate(xs, axis=0) if xs else None
    return cat(gains), cat(delays), cat(rx), cat(tx)


@dataclass
class PathChannel:
    """A channel as a finite sum of rank-one paths at the BS array."""

    gains: np.ndarray            # (P,)
    delay_samples: np.ndarray    # (P,)
    a_bs: np.ndarray             # (P, B)

    def response(self, k_subcarriers: int) -> np.ndarray:
        e = delay_phasors(self.delay_samples, k_subcarriers)
        return np.einsum("p,pk,pb->kb", self.gains, e, self.a_bs, optimize=True)


class ReflectivePaths:
    """Pair-factored BS-RIS-UE cascade with the RIS profile left symbolic."""

    def __init__(self, bs_ris: ClusterSet, ris_ue: ClusterSet,
                 geom_bs: ArrayGeometry, geom_ris: ArrayGeometry,
                 gain_bs_ris: float, rician_bs_ris: float,
                 gain_ris_ue: float, rician_ris_ue: float):
        ge, de, a_bs_e, a_ris_e = _link_paths(bs_ris, gain_bs_ris, rician_bs_ris,
                                              geom_bs, geom_ris)
        gu, du, a_ris_u, _ = _link_paths(ris_ue, gain_ris_ue, rician_ris_ue,
                                         geom_ris, None)
        if ge is None or gu is None:
            raise ValueError("reflective link has no paths")
        ne, nu = len(ge), len(gu)
        self.pair_gains = (ge[:, None] * gu[None, :]).reshape(-1)
        self.pair_delays = (de[:, None] + du[None, :]).reshape(-1)
        self.a_bs = np.repeat(a_bs_e, nu, axis=0)                      # (P, B)
        # elementwise product of RIS departure/arrival responses, (P, M)
        self.ris_prod = (a_ris_e[:, None, :] * a_ris_u[None, :, :]).reshape(
            ne * nu, -1)

    @property
    def n_paths(self) -> int:
        return len(self.pair_gains)

    def coeffs(self, psi: np.ndarray) -> np.ndarray:
        """Per-path complex coefficients for one RIS profile, (P,)."""
        return self.pair_gains * (self.ris_prod @ np.asarray(psi))

    def as_paths(self, psi: np.ndarray) -> PathChannel:
        return PathChannel(self.coeffs(psi), self.pair_delays, self.a_bs)

    def response(self, psi: np.ndarray, k_subcarriers: int) -> np.ndarray:
        """h_r(psi) at every subcarrier, shape (K, B)."""
        return self.as_paths(psi).response(k_subcarriers)


def mean_gain_over_subcarriers(paths: PathChannel) -> float:
    """Exact (1/K) sum_k ||h_k||^2 for integer-sample delays over a full period."""
    total = 0.0
    for tau in np.unique(paths.delay_samples):
        sel = paths.delay_samples == tau
        v = paths.gains[sel] @ paths.a_bs[sel]
        total += float(np.vdot(v, v).real)
    return total


def batched_mean_gains(reflective: ReflectivePaths, psis: np.ndarray,
                       extra: Optional[PathChannel] = None) -> np.ndarray:
    """Exact subcarrier-mean ||h_d + h_r(psi)||^2 for a batch of RIS profiles.

    ``psis`` has shape (N, M); ``extra`` contributes profile-independent paths
    (the direct link).  Returns shape (N,).
    """
    psis = np.atleast_2d(psis)
    n = psis.shape[0]
    coeff = (psis @ reflective.ris_prod.T) * reflective.pair_gains    # (N, P)
    delays = reflective.pair_delays
    a = reflective.a_bs
    if extra is not None:
        coeff = np.concatenate(
            [coeff, np.broadcast_to(extra.gains, (n, len(extra.gains)))], axis=1)
        delays = np.concatenate([delays, extra.delay_samples])
        a = np.concatenate([a, extra.a_bs], axis=0)
    out = np.zeros(n)
    for tau in np.unique(delays):
        sel = delays == tau
        v = coeff[:, sel] @ a[sel]                                     # (N, B)
        out += np.einsum("nb,nb->n", v.conj(), v).real
    return out
