"""Two-stage frame orchestration and seeded Monte Carlo campaigns.

A coherence block spans N OFDM symbols: the first N_l sweep the codebook
(one profile per ``dwell`` symbols) while payload rides on the
frequency-differential scheme; the receiver picks the profile with the
highest measured power and the remaining N_h symbols run the mixed-domain
differential scheme (or the coherent baseline) through the boosted link.

Every random draw of block ``i`` comes from ``default_rng([master_seed, i])``,
so campaigns are bit-identical for any worker count; partial results are
reduced in block order.  The transmit-power sweep reuses one set of
channel/noise/payload draws per block (common random numbers): received
grids are rebuilt per point as sqrt(P_x) * signal + noise.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import analysis
from .channel import (ClusterSet, PathChannel, ReflectivePaths, _link_paths,
                      batched_mean_gains, mean_gain_over_subcarriers,
                      sample_clusters, synth_direct)
from .codebook import Codebook, best_phase_config, build_codebook
from .coherent import cds_stage_one_rx, comb_pattern, ls_estimate, \
    qam_hard_demod, qam_modulate, zf_combine
from .config import RunConfig, SystemConfig
from .diffmod import (diff_encode_fds, mds_encode, psk_hard_demod, psk_modulate,
                      select_codeword, serpentine_mapping)
from .errors import ConfigurationError

_CHUNK = 128            # training symbols materialised at once

MOBILITY_PRESETS = {7.3: 1.0, 4.8: 1.5, 3.6: 2.0, 2.4: 3.0}


# ---------------------------------------------------------------------------
# Frame planning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FramePlan:
    """Split of the coherence block plus the training codeword schedule."""

    n_total: int
    n_train: int
    n_data: int
    dwell: int
    codeword_schedule: np.ndarray      # (n_train,), 1-based codeword numbers
    coherence_time_s: float = 0.0

    def __post_init__(self):
        if self.n_total != self.n_train + self.n_data:
            raise ConfigurationError("frame split must satisfy N = N_l + N_h")
        if len(self.codeword_schedule) != self.n_train:
            raise ConfigurationError("schedule must cover every training symbol")


def _make_schedule(n_train: int, n_codewords: int, dwell: int) -> np.ndarray:
    sweep = np.repeat(np.arange(1, n_codewords + 1), dwell)
    reps = int(np.ceil(n_train / len(sweep)))
    return np.tile(sweep, reps)[:n_train]


def _coherence_time(scen: SystemConfig, n_total: int) -> float:
    return n_total * (scen.k_subcarriers + scen.cp_samples) / scen.sample_rate_hz


def plan_frame(config: RunConfig, n_codewords: int,
               n_total: Optional[int] = None,
               n_train: Optional[int] = None) -> FramePlan:
    """Frame plan from the config; a mobility preset overrides the split."""
    fc = config.frame
    if n_total is None and n_train is None and fc.mobility_mps is not None:
        return mobility_to_frame(fc.mobility_mps, config, n_codewords)
    n = n_total if n_total is not None else fc.n_total
    if n_train is None:
        n_train = min(n, n_codewords * fc.dwell)
    if n_train > n:
        raise ConfigurationError(f"N_l={n_train} exceeds N={n}")
    if n_train < n_codewords * fc.dwell:
        raise ConfigurationError(
            f"training stage ({n_train} symbols) cannot sweep {n_codewords} "
            f"codewords at dwell {fc.dwell}")
    return FramePlan(n, n_train, n - n_train, fc.dwell,
                     _make_schedule(n_train, n_codewords, fc.dwell),
                     _coherence_time(config.scenario, n))


def mobility_to_frame(speed_mps: float, config: RunConfig,
                      n_codewords: Optional[int] = None) -> FramePlan:
    """Map the supported speed presets to the N/N_l split (N from the config)."""
    if n_codewords is None:
        n_codewords = config.frame.n_azimuth * config.frame.n_zenith
    ratio = MOBILITY_PRESETS.get(speed_mps)
    if ratio is None:
        raise ConfigurationError(
            f"speed {speed_mps} m/s is not a preset {sorted(MOBILITY_PRESETS)}; "
            "give frame.n_total/n_train explicitly")
    n = config.frame.n_total
    n_train = int(round(n / ratio))
    dwell = max(1, min(config.frame.dwell, n_train // n_codewords))
    if n_codewords * dwell > n_train:
        raise ConfigurationError(
            f"codebook ({n_codewords} entries) does not fit N_l={n_train}")
    return FramePlan(n, n_train, n - n_train, dwell,
                     _make_schedule(n_train, n_codewords, dwell),
                     _coherence_time(config.scenario, n))


# ---------------------------------------------------------------------------
# Per-block simulation
# ---------------------------------------------------------------------------

@dataclass
class BlockPartial:
    """Accumulated per-(scheme, px) outcomes of one coherence block."""

    err1: int = 0
    bits1: int = 0
    err2: int = 0
    bits2: int = 0
    z2_1: float = 0.0          # sum |z|^2, stage one
    sz_1: float = 0.0          # sum Re(conj(s) z), stage one
    n_1: int = 0
    z2_2: float = 0.0
    sz_2: float = 0.0
    n_2: int = 0
    selected: int = 0          # 1-based codeword number, 0 when not selecting
    beta_d: float = 0.0        # measured mean_k ||h_d||^2 / B
    beta_r: float = 0.0        # measured mean_k ||H_q psi||^2 / B
    cplx1: int = 0
    cplx2: int = 0
    n_blocks: int = 1

    def add(self, other: "BlockPartial") -> None:
        for name in ("err1", "bits1", "err2", "bits2", "z2_1", "sz_1", "n_1",
                     "z2_2", "sz_2", "n_2", "beta_d", "beta_r", "n_blocks"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        self.cplx1, self.cplx2 = other.cplx1, other.cplx2
        self.selected = other.selected


def _parse_scheme(scheme: str) -> tuple[str, str, bool]:
    """(stage1, stage2, perfect_estimates) from the scheme name."""
    s = scheme.lower()
    pce = s.endswith("_pce")
    if pce:
        s = s[: -len("_pce")]
    if "+" in s:
        s1, s2 = s.split("+", 1)
    elif s == "rs":
        s1, s2 = "rs", "cds"
    else:
        s1 = s2 = s
    for name in (s1, s2):
        if name not in ("rs", "cds", "ncds"):
            raise ConfigurationError(f"unknown scheme {scheme!r}")
    return s1, s2, pce


def _crand(rng: np.random.Generator, shape, std: float) -> np.ndarray:
    return (std / np.sqrt(2.0)) * (rng.normal(size=shape)
                                   + 1j * rng.normal(size=shape))


def _count_errors(rx_bits: np.ndarray, tx_bits: np.ndarray) -> int:
    return int(np.count_nonzero(rx_bits != tx_bits))


class _BlockChannel:
    """One coherence block's channel state, shared across the px sweep."""

    def __init__(self, scen: SystemConfig, rng: np.random.Generator,
                 use_ris: bool, frozen_bs_ris: Optional[ClusterSet] = None):
        self.scen = scen
        k = scen.k_subcarriers
        direct = sample_clusters(scen.direct_stats(), rng)
        self.h_d = synth_direct(direct, scen.bs_geometry, k,
                                scen.direct_stats().large_scale_gain)
        dg, dd, da, _ = _link_paths(direct, scen.direct_stats().large_scale_gain,
                                    0.0, scen.bs_geometry, None)
        self.direct_paths = PathChannel(dg, dd, da)
        self.beta_d = float(np.sum(np.abs(self.h_d) ** 2) / (k * scen.b_antennas))
        self.reflective = None
        self._factor = None
        if use_ris:
            bs_ris = frozen_bs_ris if frozen_bs_ris is not None else \
                sample_clusters(scen.bs_ris_stats(), rng)
            ris_ue = sample_clusters(scen.ris_ue_stats(), rng)
            self.reflective = ReflectivePaths(
                bs_ris, ris_ue, scen.bs_geometry, scen.ris_geometry,
                scen.bs_ris_stats().large_scale_gain, scen.rician_bs_ris,
                scen.ris_ue_stats().large_scale_gain, scen.rician_ris_ue)
            # profile-independent path factors, reused for every training chunk
            p = self.reflective
            phase = np.exp(-1j * 2.0 * np.pi / k
                           * np.outer(p.pair_delays, np.arange(k)))
            self._factor = (phase[:, :, None] * p.a_bs[:, None, :]).reshape(
                p.n_paths, -1)                                      # (P, K*B)

    def reflective_response(self, psi: np.ndarray) -> np.ndarray:
        coeff = self.reflective.coeffs(psi)
        return (coeff @ self._factor).reshape(self.scen.k_subcarriers,
                                              self.scen.b_antennas)

    def training_responses(self, psis: Optional[np.ndarray], n: int) -> np.ndarray:
        """Effective channels h_d + h_r(psi) for a chunk of profiles, (n, K, B)."""
        if psis is None or self.reflective is None:
            return np.broadcast_to(self.h_d, (n,) + self.h_d.shape)
        coeff = (psis @ self.reflective.ris_prod.T) * self.reflective.pair_gains
        h_r = (coeff @ self._factor).reshape(len(psis), self.scen.k_subcarriers,
                                             self.scen.b_antennas)
        return self.h_d[None] + h_r

    def effective(self, psi: Optional[np.ndarray]) -> np.ndarray:
        if psi is None or self.reflective is None:
            return self.h_d
        return self.h_d + self.reflective_response(psi)

    def measured_gain(self, psi: Optional[np.ndarray]) -> float:
        if psi is None or self.reflective is None:
            return 0.0
        paths = self.reflective.as_paths(psi)
        return mean_gain_over_subcarriers(paths) / self.scen.b_antennas


def _simulate_block(config: RunConfig, plan: FramePlan, codebook: Optional[Codebook],
                    scheme: str, px_list: np.ndarray, rng: np.random.Generator,
                    frozen_bs_ris: Optional[ClusterSet] = None) -> list[BlockPartial]:
    """Run one coherence block at every transmit power of the sweep."""
    scen = config.scenario
    ris_mode = config.campaign.ris_mode
    s1_scheme, s2_scheme, pce = _parse_scheme(scheme)
    k = scen.k_subcarriers
    n_rx = scen.b_antennas
    noise_std = np.sqrt(scen.noise_var)
    use_ris = ris_mode != "off"

    chan = _BlockChannel(scen, rng, use_ris, frozen_bs_ris if use_ris else None)
    px_list = np.asarray(px_list, dtype=float)
    n_px = len(px_list)
    sqrt_px = np.sqrt(px_list)
    out = [BlockPartial(beta_d=chan.beta_d) for _ in range(n_px)]

    genie = None
    if use_ris:
        genie = best_phase_config(scen.ris_geometry, scen.ris_to_bs,
                                  scen.ris_to_ue).vector
    if use_ris and ris_mode == "codebook":
        psi_rows = codebook.matrix[plan.codeword_schedule - 1]
    elif use_ris:
        psi_rows = np.broadcast_to(genie, (plan.n_train, scen.m_elements))
    else:
        psi_rows = None

    # ---- stage one transmit grid (unit power; sqrt(px) applied at receive)
    q1_psk, q1_qam = scen.psk_order_stage1, scen.qam_order_stage1
    b1_psk, b1_qam = q1_psk.bit_length() - 1, q1_qam.bit_length() - 1
    pattern = comb_pattern(k, scen.pilot_ratio)
    data_idx = pattern.data_indices
    if s1_scheme == "ncds":
        tx_bits1 = rng.integers(0, 2, size=plan.n_train * (k - 2) * b1_psk,
                                dtype=np.int64)
        s1 = psk_modulate(tx_bits1, q1_psk).reshape(plan.n_train, k - 2)
        x1 = diff_encode_fds(s1.T, k)                     # (K, n_train)
    elif s1_scheme == "cds":
        n_data_tones = k - pattern.k_p
        tx_bits1 = rng.integers(0, 2, size=plan.n_train * n_data_tones * b1_qam,
                                dtype=np.int64)
        d1 = qam_modulate(tx_bits1, q1_qam).reshape(plan.n_train, n_data_tones)
        x1 = np.ones((k, plan.n_train), dtype=complex)
        x1[data_idx] = d1.T
    else:                                                 # rs: pilots only
        tx_bits1 = np.empty(0, dtype=np.int64)
        x1 = np.ones((k, plan.n_train), dtype=complex)

    # ---- stage one: chunked sweep, every px shares the channel/noise draws
    powers = np.zeros((n_px, plan.n_train))
    for lo in range(0, plan.n_train, _CHUNK):
        hi = min(lo + _CHUNK, plan.n_train)
        n_c = hi - lo
        h_eff = chan.training_responses(
            psi_rows[lo:hi] if psi_rows is not None else None, n_c)
        s_part = h_eff * x1.T[lo:hi, :, None]
        noise = _crand(rng, (n_c, k, n_rx), noise_std)
        # measured power components: P_y = px*A + 2 sqrt(px) Re(C) + W
        a_pow = np.einsum("nkb,nkb->n", s_part.conj(), s_part).real / k
        c_mix = np.einsum("nkb,nkb->n", s_part.conj(), noise) / k
        w_pow = np.einsum("nkb,nkb->n", noise.conj(), noise).real / k
        for i in range(n_px):
            powers[i, lo:hi] = (px_list[i] * a_pow
                                + 2.0 * sqrt_px[i] * c_mix.real + w_pow)
            y = sqrt_px[i] * s_part + noise
            if s1_scheme == "ncds":
                inner = np.einsum("nb,nb->n", y[:, 0].conj(), y[:, 1])
                zeta = np.where(inner == 0, 0.0, np.angle(inner))
                z = np.einsum("nkb,nkb->nk", y[:, 1:-1].conj(), y[:, 2:])
                z = z * (np.exp(-1j * zeta)[:, None] / n_rx)
                rx = psk_hard_demod(z.reshape(-1), q1_psk)
                tx_lo = lo * (k - 2) * b1_psk
                tx = tx_bits1[tx_lo:tx_lo + n_c * (k - 2) * b1_psk]
                out[i].err1 += _count_errors(rx, tx)
                out[i].bits1 += len(tx)
                s_ref = s1[lo:hi].reshape(-1)
                zf = z.reshape(-1)
                out[i].z2_1 += float(np.sum(np.abs(zf) ** 2))
                out[i].sz_1 += float(np.sum((s_ref.conj() * zf).real))
                out[i].n_1 += len(zf)
            elif s1_scheme == "cds":
                perfect = sqrt_px[i] * h_eff if pce else None
                rx, _ = cds_stage_one_rx(y, pattern, q1_qam, perfect_h=perfect)
                tx_lo = lo * len(data_idx) * b1_qam
                tx = tx_bits1[tx_lo:tx_lo + n_c * len(data_idx) * b1_qam]
                out[i].err1 += _count_errors(rx, tx)
                out[i].bits1 += len(tx)

    for i in range(n_px):
        out[i].cplx1 = analysis.complexity(
            s1_scheme, 1, b_antennas=n_rx, k_subcarriers=k,
            k_pilots=pattern.k_p, n_train=plan.n_train,
            c_interp=n_rx * (k - pattern.k_p))

    # ---- codeword selection per px
    selections = np.zeros(n_px, dtype=np.int64)
    if use_ris and ris_mode == "codebook":
        for i in range(n_px):
            selections[i] = select_codeword(powers[i], plan.codeword_schedule)
            out[i].selected = int(selections[i])
            out[i].beta_r = chan.measured_gain(codebook.matrix[selections[i] - 1])
    elif use_ris:
        for i in range(n_px):
            out[i].beta_r = chan.measured_gain(genie)

    if plan.n_data == 0:
        return out

    # ---- stage two payload (drawn once) and replayable noise stream
    q2_psk, q2_qam = scen.psk_order_stage2, scen.qam_order_stage2
    b2_psk, b2_qam = q2_psk.bit_length() - 1, q2_qam.bit_length() - 1
    n_h = plan.n_data
    if s2_scheme == "ncds":
        tx_bits2 = rng.integers(0, 2, size=(k * n_h - 2) * b2_psk, dtype=np.int64)
        s2 = psk_modulate(tx_bits2, q2_psk)
        x2 = mds_encode(s2, k, n_h)
        mapping = serpentine_mapping(k, n_h)
    else:
        tx_bits2 = (rng.integers(0, 2, size=k * (n_h - 1) * b2_qam, dtype=np.int64)
                    if n_h >= 2 else np.empty(0, dtype=np.int64))
        x2 = np.ones((k, n_h), dtype=complex)
        if n_h >= 2:
            x2[:, 1:] = qam_modulate(tx_bits2, q2_qam).reshape(n_h - 1, k).T
        mapping = None
    noise_seed = rng.integers(0, 2 ** 63 - 1)

    def stage_two_ncds(px_idx: list[int], psi: Optional[np.ndarray]) -> None:
        h2 = chan.effective(psi)
        nrng = np.random.default_rng(noise_seed)
        zeta = {}
        prev = None                     # (sig_last, noise_last) of previous symbol
        for n in range(n_h):
            sig_n = h2 * x2[:, n][:, None]
            noise_n = _crand(nrng, (k, n_rx), noise_std)
            order = np.arange(k) if n % 2 == 0 else np.arange(k - 1, -1, -1)
            sig_p, noise_p = sig_n[order], noise_n[order]
            if n == 0:                  # data at path positions 2..K-1
                pos_lo, dirs = 2, mapping.link_dir[2:k]
            else:                       # edge turn plus a full sweep: K symbols
                pos_lo, dirs = n * k, mapping.link_dir[n * k:(n + 1) * k]
            s_slice = s2[pos_lo - 2: pos_lo - 2 + len(dirs)]
            tx_slice = tx_bits2[(pos_lo - 2) * b2_psk:
                                (pos_lo - 2 + len(dirs)) * b2_psk]
            for i in px_idx:
                y_p = sqrt_px[i] * sig_p + noise_p
                links = np.einsum("kb,kb->k", y_p[:-1].conj(), y_p[1:]) / n_rx
                if n == 0:
                    first = links[0]
                    zeta[i] = 0.0 if first == 0 else float(np.angle(first))
                    z_data = links[1:]
                else:
                    y_last = sqrt_px[i] * prev[0] + prev[1]
                    t_link = np.vdot(y_last, y_p[0]) / n_rx
                    z_data = np.concatenate([[t_link], links])
                z_data = z_data * np.exp(-1j * zeta[i] * dirs)
                rx = psk_hard_demod(z_data, q2_psk)
                out[i].err2 += _count_errors(rx, tx_slice)
                out[i].bits2 += len(tx_slice)
                out[i].z2_2 += float(np.sum(np.abs(z_data) ** 2))
                out[i].sz_2 += float(np.sum((s_slice.conj() * z_data).real))
                out[i].n_2 += len(z_data)
            prev = (sig_p[-1], noise_p[-1])
        for i in px_idx:
            out[i].cplx2 = analysis.complexity("ncds", 2, k_subcarriers=k,
                                               n_data=n_h)

    def stage_two_cds(px_idx: list[int], psi: Optional[np.ndarray]) -> None:
        if n_h < 2:
            return
        h2 = chan.effective(psi)
        nrng = np.random.default_rng(noise_seed)
        h_est = {}
        errbits = {i: 0 for i in px_idx}
        for n in range(n_h):
            sig_n = h2 * x2[:, n][:, None]
            noise_n = _crand(nrng, (k, n_rx), noise_std)
            for i in px_idx:
                y_n = sqrt_px[i] * sig_n + noise_n
                if n == 0:
                    h_est[i] = (sqrt_px[i] * h2 if pce
                                else ls_estimate(y_n, np.ones(k, dtype=complex)).h)
                    continue
                s_hat, _ = zf_combine(y_n, h_est[i])
                rx = qam_hard_demod(s_hat, q2_qam)
                tx = tx_bits2[(n - 1) * k * b2_qam: n * k * b2_qam]
                errbits[i] += _count_errors(rx, tx)
        for i in px_idx:
            out[i].err2 += errbits[i]
            out[i].bits2 += len(tx_bits2)
            out[i].cplx2 = analysis.complexity("cds", 2, b_antennas=n_rx,
                                               k_subcarriers=k, n_data=n_h)

    stage_two = stage_two_ncds if s2_scheme == "ncds" else stage_two_cds
    if use_ris and ris_mode == "codebook":
        for sel in np.unique(selections):
            stage_two([i for i in range(n_px) if selections[i] == sel],
                      codebook.matrix[sel - 1])
    elif use_ris:
        stage_two(list(range(n_px)), genie)
    else:
        stage_two(list(range(n_px)), None)
    return out


def block_rng(master_seed: int, block_index: int) -> np.random.Generator:
    """The per-block generator; a pure function of (seed, index)."""
    return np.random.default_rng([master_seed, block_index])


def frozen_bs_ris_clusters(config: RunConfig, master_seed: int) -> Optional[ClusterSet]:
    """The campaign-wide BS-RIS draw when scenario.freeze_bs_ris is set."""
    if not config.scenario.freeze_bs_ris:
        return None
    rng = np.random.default_rng([master_seed, 2 ** 31])
    return sample_clusters(config.scenario.bs_ris_stats(), rng)


def run_block(config: RunConfig, scheme: str, rng: np.random.Generator,
              px_dbw: Optional[float] = None, plan: Optional[FramePlan] = None,
              codebook: Optional[Codebook] = None) -> BlockPartial:
    """One coherence block at a single transmit power (first sweep point)."""
    if px_dbw is None:
        px_dbw = config.campaign.px_dbw[0]
    if codebook is None and config.campaign.ris_mode == "codebook":
        codebook = default_codebook(config)
    if plan is None:
        plan = plan_frame(config, len(codebook) if codebook else
                          config.frame.n_azimuth * config.frame.n_zenith)
    px = 10.0 ** (np.asarray([px_dbw]) / 10.0)
    return _simulate_block(config, plan, codebook, scheme, px, rng)[0]


def default_codebook(config: RunConfig) -> Codebook:
    scen = config.scenario
    return build_codebook(scen.ris_geometry, scen.ris_to_bs,
                          config.frame.n_azimuth, config.frame.n_zenith)


# ---------------------------------------------------------------------------
# Campaigns
# ---------------------------------------------------------------------------

@dataclass
class MetricsReport:
    """Aggregated campaign metrics for one (scheme, sweep point)."""

    px_dbw: float
    scheme: str
    ber_stage1: float
    ber_stage2: float
    bits_stage1: int
    bits_stage2: int
    sinr_emp1_db: float
    sinr_emp2_db: float
    sinr_analytic_db: float
    r_l: float
    r_h: float
    r_total: float
    cplx1: int
    cplx2: int
    selected_mode: int
    selected_histogram: dict
    beta_d_meas: float
    beta_r_meas: float
    n_blocks: int
    master_seed: int


_WORKER_STATE: dict = {}


def _campaign_worker_init(config_yaml: str, n_total, n_train):
    from .config import config_from_dict
    import yaml as _yaml
    config = config_from_dict(_yaml.safe_load(config_yaml))
    codebook = (default_codebook(config)
                if config.campaign.ris_mode == "codebook" else None)
    n_cb = len(codebook) if codebook else \
        config.frame.n_azimuth * config.frame.n_zenith
    plan = plan_frame(config, n_cb, n_total, n_train)
    frozen = frozen_bs_ris_clusters(config, config.campaign.seed)
    _WORKER_STATE.update(config=config, codebook=codebook, plan=plan,
                         frozen=frozen)


def _campaign_worker(args):
    block_index, schemes, px_list, master_seed = args
    st = _WORKER_STATE
    results = {}
    for scheme in schemes:
        rng = block_rng(master_seed, block_index)
        results[scheme] = _simulate_block(
            st["config"], st["plan"], st["codebook"], scheme,
            np.asarray(px_list), rng, st["frozen"])
    return block_index, results


def run_campaign(config: RunConfig,
                 sweep: Optional[list[float]] = None,
                 n_blocks: Optional[int] = None,
                 master_seed: Optional[int] = None,
                 workers: Optional[int] = None,
                 n_total: Optional[int] = None,
                 n_train: Optional[int] = None) -> list[MetricsReport]:
    """Run n_blocks independent coherence blocks over the px sweep.

    Aggregation is order-independent: block partials land in pre-assigned
    slots and reduce in block order, so any worker count yields the same
    report bit for bit.
    """
    camp = config.campaign
    sweep = list(camp.px_dbw) if sweep is None else list(sweep)
    n_blocks = camp.n_blocks if n_blocks is None else n_blocks
    master_seed = camp.seed if master_seed is None else master_seed
    workers = camp.workers if workers is None else workers
    schemes = list(camp.schemes)
    px_list = [10.0 ** (p / 10.0) for p in sweep]

    from .config import config_to_yaml
    cfg_yaml = config_to_yaml(config)
    args = [(b, schemes, px_list, master_seed) for b in range(n_blocks)]
    partials: dict[int, dict] = {}
    if workers <= 1 or n_blocks == 1:
        _campaign_worker_init(cfg_yaml, n_total, n_train)
        for a in args:
            b, res = _campaign_worker(a)
            partials[b] = res
    else:
        with ProcessPoolExecutor(max_workers=workers,
                                 initializer=_campaign_worker_init,
                                 initargs=(cfg_yaml, n_total, n_train)) as ex:
            for b, res in ex.map(_campaign_worker, args, chunksize=4):
                partials[b] = res

    # rebuild the plan locally for reporting
    codebook = (default_codebook(config) if camp.ris_mode == "codebook" else None)
    n_cb = len(codebook) if codebook else \
        config.frame.n_azimuth * config.frame.n_zenith
    plan = plan_frame(config, n_cb, n_total, n_train)

    reports = []
    for scheme in schemes:
        for j, px_dbw in enumerate(sweep):
            total = BlockPartial(n_blocks=0)
            hist: dict[int, int] = {}
            for b in range(n_blocks):                      # fixed reduce order
                part = partials[b][scheme][j]
                total.add(part)
                hist[part.selected] = hist.get(part.selected, 0) + 1
            reports.append(_finalize_report(config, plan, scheme, px_dbw,
                                            total, hist, master_seed))
    return reports


def _finalize_report(config: RunConfig, plan: FramePlan, scheme: str,
                     px_dbw: float, total: BlockPartial, hist: dict,
                     master_seed: int) -> MetricsReport:
    scen = config.scenario
    n_blocks = total.n_blocks
    px = 10.0 ** (px_dbw / 10.0)
    beta_d = total.beta_d / n_blocks
    beta_r = total.beta_r / n_blocks
    ber1 = total.err1 / total.bits1 if total.bits1 else float("nan")
    ber2 = total.err2 / total.bits2 if total.bits2 else float("nan")

    def emp(z2, sz, n, gain):
        if n == 0 or gain <= 0:
            return float("nan")
        rho = analysis.sinr_from_moments(gain, z2 / n, sz / n)
        return float(10.0 * np.log10(rho)) if rho > 0 else float("nan")

    sinr1 = emp(total.z2_1, total.sz_1, total.n_1, beta_d * px)
    sinr2 = emp(total.z2_2, total.sz_2, total.n_2, (beta_d + beta_r) * px)
    budget = analysis.LinkBudget(
        beta_d_sq=scen.direct_stats().large_scale_gain,
        beta_r_sq=beta_r, b_antennas=scen.b_antennas, px=px,
        noise_var=scen.noise_var)
    sinr_analytic = float(10.0 * np.log10(analysis.sinr_ncds(budget)))

    s1_scheme, s2_scheme, _ = _parse_scheme(scheme)
    pattern_kp = scen.k_subcarriers // scen.pilot_ratio
    inputs = analysis.ThroughputInputs(
        subcarrier_spacing_hz=scen.subcarrier_spacing_hz,
        k_subcarriers=scen.k_subcarriers, packet_bits=scen.packet_bits,
        order_stage1=(scen.psk_order_stage1 if s1_scheme == "ncds"
                      else scen.qam_order_stage1),
        order_stage2=(scen.psk_order_stage2 if s2_scheme == "ncds"
                      else scen.qam_order_stage2),
        ber_stage1=0.0 if np.isnan(ber1) else ber1,
        ber_stage2=0.0 if np.isnan(ber2) else ber2,
        n_total=plan.n_total, n_train=plan.n_train, n_data=plan.n_data,
        k_pilots=pattern_kp)
    r_l, r_h, r_total = analysis.throughput(inputs, f"{s1_scheme}+{s2_scheme}")
    if s1_scheme == "rs":
        r_l = 0.0
        r_total = r_h
    mode = max(hist.items(), key=lambda kv: (kv[1], -kv[0]))[0] if hist else 0
    return MetricsReport(
        px_dbw=px_dbw, scheme=scheme, ber_stage1=ber1, ber_stage2=ber2,
        bits_stage1=total.bits1, bits_stage2=total.bits2,
        sinr_emp1_db=sinr1, sinr_emp2_db=sinr2, sinr_analytic_db=sinr_analytic,
        r_l=r_l, r_h=r_h, r_total=r_total, cplx1=total.cplx1, cplx2=total.cplx2,
        selected_mode=mode, selected_histogram=hist, beta_d_meas=beta_d,
        beta_r_meas=beta_r, n_blocks=n_blocks, master_seed=master_seed)


# ---------------------------------------------------------------------------
# Dedicated SINR-verification campaign (direct-only / genie / codebook modes)
# ---------------------------------------------------------------------------

@dataclass
class SinrPoint:
    mode: str
    px_dbw: float
    sinr_emp_db: float
    sinr_analytic_db: float
    beta_d_meas: float
    beta_r_meas: float
    n_samples: int


def _sinr_block(config: RunConfig, codebook: Codebook, px_list: np.ndarray,
                modes: list[str], n_probe: int, rng: np.random.Generator,
                frozen_bs_ris: Optional[ClusterSet]) -> dict:
    """z-statistics for fixed-profile probes over one channel realization.

    Codebook selection is simulated through the exact distribution of the
    measured training powers (signal term computed in closed form per
    codeword; noise terms drawn), avoiding a full training sweep per block.
    """
    scen = config.scenario
    k, n_rx = scen.k_subcarriers, scen.b_antennas
    noise_std = np.sqrt(scen.noise_var)
    chan = _BlockChannel(scen, rng, True, frozen_bs_ris)
    genie = best_phase_config(scen.ris_geometry, scen.ris_to_bs,
                              scen.ris_to_ue).vector

    q = scen.psk_order_stage1
    bits = rng.integers(0, 2, size=n_probe * (k - 2) * (q.bit_length() - 1),
                        dtype=np.int64)
    s_ref = psk_modulate(bits, q).reshape(n_probe, k - 2)
    x = diff_encode_fds(s_ref.T, k)                        # (K, n_probe)
    noise = _crand(rng, (n_probe, k, n_rx), noise_std)

    if "codebook" in modes:
        # per-codeword mean effective gain S_i = mean_k ||h_d + h_r(psi_i)||^2,
        # exact including the direct/reflective cross term
        sig_power = batched_mean_gains(chan.reflective, codebook.matrix,
                                       extra=chan.direct_paths)
        cross_noise = rng.normal(size=len(sig_power))      # Re of CN(0,1)*sqrt(2)
        bulk_noise = rng.gamma(shape=k * n_rx, scale=1.0, size=len(sig_power))

    results = {}
    sqrt_px = np.sqrt(px_list)
    for mode in modes:
        per_px = []
        for i, px in enumerate(px_list):
            if mode == "off":
                h = chan.h_d
                beta_r = 0.0
            elif mode == "genie":
                h = chan.effective(genie)
                beta_r = chan.measured_gain(genie)
            else:
                p_y = (px * sig_power
                       + sqrt_px[i] * np.sqrt(2.0 * scen.noise_var
                                              * sig_power / k) * cross_noise
                       + scen.noise_var * bulk_noise / k)
                sel = int(np.argmax(p_y)) + 1
                psi = codebook.matrix[sel - 1]
                h = chan.effective(psi)
                beta_r = chan.measured_gain(psi)
            s_part = h[None] * x.T[:, :, None]
            y = sqrt_px[i] * s_part + noise
            inner = np.einsum("nb,nb->n", y[:, 0].conj(), y[:, 1])
            zeta = np.where(inner == 0, 0.0, np.angle(inner))
            z = np.einsum("nkb,nkb->nk", y[:, 1:-1].conj(), y[:, 2:])
            z = z * (np.exp(-1j * zeta)[:, None] / n_rx)
            zf = z.reshape(-1)
            sf = s_ref.reshape(-1)
            per_px.append((float(np.sum(np.abs(zf) ** 2)),
                           float(np.sum((sf.conj() * zf).real)),
                           len(zf), chan.beta_d, beta_r))
        results[mode] = per_px
    return results


def _sinr_worker(args):
    block_index, modes, px_list, n_probe, master_seed = args
    st = _WORKER_STATE
    rng = block_rng(master_seed, block_index)
    return block_index, _sinr_block(st["config"], st["codebook"],
                                    np.asarray(px_list), modes, n_probe, rng,
                                    st["frozen"])


def _sinr_worker_init(config_yaml: str):
    from .config import config_from_dict
    import yaml as _yaml
    config = config_from_dict(_yaml.safe_load(config_yaml))
    _WORKER_STATE.update(config=config, codebook=default_codebook(config),
                         frozen=frozen_bs_ris_clusters(config,
                                                       config.campaign.seed))


def run_sinr_verification(config: RunConfig,
                          sweep: Optional[list[float]] = None,
                          n_blocks: int = 2000,
                          master_seed: Optional[int] = None,
                          workers: Optional[int] = None,
                          modes: tuple = ("off", "genie", "codebook"),
                          n_probe: int = 2) -> list[SinrPoint]:
    """Empirical vs closed-form decoder SINR across the px sweep."""
    camp = config.campaign
    sweep = list(camp.px_dbw) if sweep is None else list(sweep)
    master_seed = camp.seed if master_seed is None else master_seed
    workers = camp.workers if workers is None else workers
    px_list = [10.0 ** (p / 10.0) for p in sweep]
    modes = list(modes)

    from .config import config_to_yaml
    cfg_yaml = config_to_yaml(config)
    args = [(b, modes, px_list, n_probe, master_seed) for b in range(n_blocks)]
    blocks: dict[int, dict] = {}
    if (workers or 1) <= 1 or n_blocks == 1:
        _sinr_worker_init(cfg_yaml)
        for a in args:
            b, res = _sinr_worker(a)
            blocks[b] = res
    else:
        with ProcessPoolExecutor(max_workers=workers,
                                 initializer=_sinr_worker_init,
                                 initargs=(cfg_yaml,)) as ex:
            for b, res in ex.map(_sinr_worker, args, chunksize=8):
                blocks[b] = res

    scen = config.scenario
    out = []
    for mode in modes:
        for j, px_dbw in enumerate(sweep):
            z2 = sz = 0.0
            n = 0
            bd = br = 0.0
            for b in range(n_blocks):
                t = blocks[b][mode][j]
                z2 += t[0]
                sz += t[1]
                n += t[2]
                bd += t[3]
                br += t[4]
            bd /= n_blocks
            br /= n_blocks
            px = 10.0 ** (px_dbw / 10.0)
            gain = (bd + br) * px
            rho = analysis.sinr_from_moments(gain, z2 / n, sz / n)
            budget = analysis.LinkBudget(
                beta_d_sq=scen.direct_stats().large_scale_gain, beta_r_sq=br,
                b_antennas=scen.b_antennas, px=px, noise_var=scen.noise_var)
            out.append(SinrPoint(
                mode=mode, px_dbw=px_dbw,
                sinr_emp_db=float(10.0 * np.log10(rho)),
                sinr_analytic_db=float(10.0 * np.log10(analysis.sinr_ncds(budget))),
                beta_d_meas=bd, beta_r_meas=br, n_samples=n))
    return out
