"""Closed-form SINR / throughput / complexity expressions and their oracles.

The differential decoder output z splits into four terms: signal x signal
(I1, carries the payload), two signal x noise cross terms (I2, I3) and a
noise x noise term (I4).  With direct-link gain beta_d^2 and reflective
gain beta_r^2 their moments are

    E[s* I1]  = (beta_d^2 + beta_r^2) * B * P_x^2
    E|I1|^2   = (2 beta_d^4 + beta_r^4 + 4 beta_d^2 beta_r^2) * B^2 * P_x^2
    E|I2|^2   = E|I3|^2 = sigma_v^2 (beta_d^2 + beta_r^2) * B * P_x
    E|I4|^2   = B * sigma_v^4

(the reference symbol s carries the transmit scale, |s| = P_x; the last
moment is the Monte-Carlo-adjudicated value; the per-antenna products of
independent noise vectors add B identical contributions).

The resulting decoder SINR, in the form an EVM-style estimator can match
across a transmit-power sweep, is

    rho = [ 2 sigma_v^2 / (B S P_x)
            + (2 beta_d^2 beta_r^2 + beta_d^4) / S^2
            + sigma_v^4 / (B S^2 P_x^2) ]^-1,     S = beta_d^2 + beta_r^2.

The self-interference term is a power-independent ceiling (it scales with
P_x^2 exactly like the useful power); ``sinr_ncds_printed`` keeps the
alternative grouping that divides it by P_x^2 as well - the two coincide
at P_x = 1.  E|I1|^2 is exact for a single-cluster direct link and an
optimistic bound for many angularly-spread clusters; ``term_powers_mc``
quantifies the gap.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .arrays import ArrayGeometry, steering_matrix, steering_vector
from .channel import LinkStatistics, sample_clusters

_TWO_PI = 2.0 * np.pi


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (np.asarray(x_db) / 10.0)


def linear_to_db(x_lin: float) -> float:
    return 10.0 * np.log10(x_lin)


# ---------------------------------------------------------------------------
# Budgets and decode-term moments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinkBudget:
    """Scalar channel and noise budget feeding every closed form."""

    beta_d_sq: float              # direct-link gain L_d * sigma_d^2, linear
    beta_r_sq: float              # reflective gain (bound or measured), linear
    b_antennas: int
    px: float                     # transmit power, linear watts
    noise_var: float              # sigma_v^2 per receive antenna, linear watts

    def __post_init__(self):
        if min(self.beta_d_sq, self.beta_r_sq, self.px, self.noise_var) < 0:
            raise ValueError("budget entries must be nonnegative")
        if self.b_antennas < 1:
            raise ValueError("need at least one receive antenna")


@dataclass
class TermPowers:
    """First/second moments of the four decoder terms (optionally with SEs)."""

    e_s_i1: float
    p_i1: float
    p_i2: float
    p_i3: float
    p_i4: float
    stderr: Optional[dict] = None


def term_powers_closed_form(budget: LinkBudget) -> TermPowers:
    """Decoder-term moments for the scalar budget."""
    bd, br = budget.beta_d_sq, budget.beta_r_sq
    b, px, nv = budget.b_antennas, budget.px, budget.noise_var
    s = bd + br
    return TermPowers(
        e_s_i1=s * b * px ** 2,
        p_i1=(2.0 * bd ** 2 + br ** 2 + 4.0 * bd * br) * b ** 2 * px ** 2,
        p_i2=nv * s * b * px,
        p_i3=nv * s * b * px,
        p_i4=b * nv ** 2,
    )


def term_powers_mc(geom_bs: ArrayGeometry,
                   direct_stats: Optional[LinkStatistics],
                   n_trials: int,
                   rng: np.random.Generator,
                   px: float = 1.0,
                   noise_var: float = 0.0,
                   reflective_amp: float = 0.0,
                   reflective_dir: tuple[float, float] = (0.0, np.pi / 2),
                   reflective_delay: int = 0,
                   k_subcarriers: int = 1024,
                   k_index: int = 2,
                   chunk: int = 20000) -> TermPowers:
    """Brute-force decoder-term moments over fresh channel/noise draws.

    Every trial draws a direct-link cluster set (when ``direct_stats`` is
    given), adds a deterministic beamformed reflective component of
    amplitude-squared ``reflective_amp`` (the post-profile h_r), forms the
    received vectors on the adjacent subcarrier pair (k_index-1, k_index)
    and evaluates the four decoder terms exactly.
    """
    b = geom_bs.n_elements
    sums = np.zeros(5)
    sums_sq = np.zeros(5)
    done = 0
    beta_r = np.sqrt(reflective_amp)
    a_r = steering_vector(geom_bs, *reflective_dir)
    while done < n_trials:
        t = min(chunk, n_trials - done)
        h_prev = np.zeros((t, b), dtype=complex)
        h_cur = np.zeros((t, b), dtype=complex)
        if direct_stats is not None:
            c = direct_stats.n_clusters
            root_gain = np.sqrt(direct_stats.large_scale_gain)
            for i in range(t):
                cs = sample_clusters(direct_stats, rng)
                a = steering_matrix(geom_bs, cs.aoa[:, 0], cs.aoa[:, 1])
                ph = np.exp(-1j * _TWO_PI / k_subcarriers
                            * cs.delay_samples * (k_index - 2))
                ph2 = ph * np.exp(-1j * _TWO_PI / k_subcarriers * cs.delay_samples)
                h_prev[i] = root_gain * (cs.gains * ph) @ a
                h_cur[i] = root_gain * (cs.gains * ph2) @ a
        if beta_r > 0.0:
            e1 = np.exp(-1j * _TWO_PI / k_subcarriers * reflective_delay * (k_index - 2))
            e2 = e1 * np.exp(-1j * _TWO_PI / k_subcarriers * reflective_delay)
            h_prev += beta_r * e1 * a_r
            h_cur += beta_r * e2 * a_r
        x_prev = np.sqrt(px) * np.exp(1j * rng.uniform(-np.pi, np.pi, size=t))
        s_unit = np.exp(1j * rng.uniform(-np.pi, np.pi, size=t))
        x_cur = x_prev * s_unit
        sig = np.sqrt(noise_var / 2.0)
        v_prev = sig * (rng.normal(size=(t, b)) + 1j * rng.normal(size=(t, b)))
        v_cur = sig * (rng.normal(size=(t, b)) + 1j * rng.normal(size=(t, b)))

        i1 = np.einsum("tb,tb->t", (h_prev * x_prev[:, None]).conj(),
                       h_cur * x_cur[:, None])
        i2 = np.einsum("tb,tb->t", (h_prev * x_prev[:, None]).conj(), v_cur)
        i3 = np.einsum("tb,tb->t", v_prev.conj(), h_cur * x_cur[:, None])
        i4 = np.einsum("tb,tb->t", v_prev.conj(), v_cur)
        s_ref = px * s_unit                       # reference symbol carries P_x
        draws = np.stack([
            (s_ref.conj() * i1).real,
            np.abs(i1) ** 2,
            np.abs(i2) ** 2,
            np.abs(i3) ** 2,
            np.abs(i4) ** 2,
        ])
        sums += draws.sum(axis=1)
        sums_sq += (draws ** 2).sum(axis=1)
        done += t
    mean = sums / n_trials
    var = np.maximum(sums_sq / n_trials - mean ** 2, 0.0)
    se = np.sqrt(var / n_trials)
    keys = ["e_s_i1", "p_i1", "p_i2", "p_i3", "p_i4"]
    return TermPowers(*mean, stderr=dict(zip(keys, se)))


# ---------------------------------------------------------------------------
# SINR closed forms
# ---------------------------------------------------------------------------

def sinr_ncds(budget: LinkBudget) -> float:
    """Decoder SINR of the differential receiver (estimator-consistent form)."""
    s = budget.beta_d_sq + budget.beta_r_sq
    if s <= 0.0 or budget.px <= 0.0:
        raise ValueError("combined channel gain and transmit power must be positive")
    b, px, nv = budget.b_antennas, budget.px, budget.noise_var
    noise = 2.0 * nv / (b * s * px)
    self_int = (2.0 * budget.beta_d_sq * budget.beta_r_sq + budget.beta_d_sq ** 2) / s ** 2
    floor = nv ** 2 / (b * s ** 2 * px ** 2)
    return 1.0 / (noise + self_int + floor)


def sinr_ncds_printed(budget: LinkBudget) -> float:
    """Verbatim alternative grouping (self-interference also divided by P_x^2).

    Coincides with :func:`sinr_ncds` at P_x = 1; see the module docstring for
    why the estimator-consistent form is the primary one.
    """
    s = budget.beta_d_sq + budget.beta_r_sq
    if s <= 0.0 or budget.px <= 0.0:
        raise ValueError("combined channel gain and transmit power must be positive")
    b, px, nv = budget.b_antennas, budget.px, budget.noise_var
    noise = 2.0 * nv / (b * s * px)
    rest = (2.0 * budget.beta_d_sq * budget.beta_r_sq + budget.beta_d_sq ** 2
            + nv ** 2 / b) / (s ** 2 * px ** 2)
    return 1.0 / (noise + rest)


def sinr_direct(budget: LinkBudget) -> float:
    """Direct-link-only SINR; ceiling 1 (0 dB) from the self-interference."""
    bd = budget.beta_d_sq
    if bd <= 0.0 or budget.px <= 0.0:
        raise ValueError("direct gain and transmit power must be positive")
    b, px, nv = budget.b_antennas, budget.px, budget.noise_var
    return 1.0 / (1.0 + 2.0 * nv / (b * bd * px) + nv ** 2 / (b * bd ** 2 * px ** 2))


def sinr_reflective(budget: LinkBudget) -> tuple[float, float]:
    """Reflective-only SINR and its linear (small sigma_v^2) approximation."""
    br = budget.beta_r_sq
    if br <= 0.0 or budget.px <= 0.0:
        raise ValueError("reflective gain and transmit power must be positive")
    b, px, nv = budget.b_antennas, budget.px, budget.noise_var
    exact = b * br * px / (2.0 * nv + nv ** 2)
    approx = b * br * px / (2.0 * nv)
    return exact, approx


def sinr_from_moments(gain: float, mean_abs_z_sq: float, mean_re_sz: float) -> float:
    """EVM-style SINR: useful power over E|g s - z|^2 from accumulated moments.

    ``gain`` is the reference amplitude g = (beta_d^2 + beta_r^2) P_x,
    ``mean_abs_z_sq`` is E|z|^2 and ``mean_re_sz`` is Re E[conj(s) z] for the
    unit-modulus payload symbols s.
    """
    err = gain ** 2 + mean_abs_z_sq - 2.0 * gain * mean_re_sz
    if err <= 0.0:
        return np.inf
    return gain ** 2 / err


# ---------------------------------------------------------------------------
# Efficiency, throughput, complexity
# ---------------------------------------------------------------------------

def efficiency(stage: int, scheme: str, k_subcarriers: int, k_pilots: int = 0,
               n_total: int = 1, n_train: int = 0, n_data: int = 0) -> float:
    """Fraction of the frame's resources carrying payload for one stage.

    Stage one: eta = N_l (K - K_p) / (N K) with K_p = K for reference-signal
    (RS) training, the configured comb for CDS, and 2 for the differential
    scheme.  Stage two: (N_h - 1)/N for CDS (one symbol of pilots),
    (N_h K - 2)/(N K) for the differential scheme.
    """
    scheme = scheme.lower()
    if stage == 1:
        if scheme == "rs":
            k_p = k_subcarriers
        elif scheme == "cds":
            k_p = k_pilots
        elif scheme == "ncds":
            k_p = 2
        else:
            raise ValueError(f"unknown stage-one scheme {scheme!r}")
        return n_train * (k_subcarriers - k_p) / (n_total * k_subcarriers)
    if stage == 2:
        if scheme == "cds":
            return max(n_data - 1, 0) / n_total
        if scheme == "ncds":
            return max(n_data * k_subcarriers - 2, 0) / (n_total * k_subcarriers)
        raise ValueError(f"unknown stage-two scheme {scheme!r}")
    raise ValueError(f"stage must be 1 or 2, got {stage}")


@dataclass(frozen=True)
class ThroughputInputs:
    """Everything the packet-throughput evaluation needs for the two stages."""

    subcarrier_spacing_hz: float
    k_subcarriers: int
    packet_bits: int
    order_stage1: int
    order_stage2: int
    ber_stage1: float
    ber_stage2: float
    n_total: int
    n_train: int
    n_data: int
    k_pilots: int = 0

    def __post_init__(self):
        if self.n_train < 0 or self.n_data < 0:
            raise ValueError("stage lengths must be nonnegative")
        if self.n_total != self.n_train + self.n_data:
            raise ValueError("frame split must satisfy N = N_l + N_h")
        for ber in (self.ber_stage1, self.ber_stage2):
            if not 0.0 <= ber <= 1.0:
                raise ValueError("BER must lie in [0, 1]")
        if self.packet_bits < 1:
            raise ValueError("packet length must be >= 1 bit")


def _stage_rate(inputs: ThroughputInputs, eta: float, ber: float, order: int) -> float:
    packets = inputs.subcarrier_spacing_hz * inputs.k_subcarriers / inputs.packet_bits
    return eta * packets * (1.0 - ber) ** inputs.packet_bits * np.log2(order)


def throughput(inputs: ThroughputInputs, scheme: str) -> tuple[float, float, float]:
    """Packet throughput (R_l, R_h, R) in packets/s.

    ``scheme`` is a per-both-stages name ("cds", "ncds") or a combo
    "stage1+stage2" such as "rs+ncds"; bare "rs" means RS training with the
    classical coherent second stage.
    """
    scheme = scheme.lower()
    if "+" in scheme:
        s1, s2 = scheme.split("+", 1)
    elif scheme == "rs":
        s1, s2 = "rs", "cds"
    else:
        s1 = s2 = scheme
    eta_l = efficiency(1, s1, inputs.k_subcarriers, inputs.k_pilots,
                       inputs.n_total, n_train=inputs.n_train)
    eta_h = efficiency(2, s2, inputs.k_subcarriers, inputs.k_pilots,
                       inputs.n_total, n_data=inputs.n_data)
    r_l = _stage_rate(inputs, eta_l, inputs.ber_stage1, inputs.order_stage1)
    r_h = _stage_rate(inputs, eta_h, inputs.ber_stage2, inputs.order_stage2)
    return r_l, r_h, r_l + r_h


def complexity(scheme: str, stage: int, b_antennas: int = 0, k_subcarriers: int = 0,
               k_pilots: int = 0, n_train: int = 0, n_data: int = 0,
               c_interp: int = 0) -> int:
    """Complex-product count of each receiver, per the comparison ledger.

    Stage one: RS processes nothing (0); the coherent receiver pays
    N_l (B K_p + B^2 (K - K_p) + C_I); the differential one 2 (K-1) N_l.
    Stage two: coherent B K ((B^2 + 1) + B (N_h - 1)); differential
    2 (K N_h - 1).
    """
    scheme = scheme.lower()
    if stage == 1:
        if scheme == "rs":
            return 0
        if scheme == "cds":
            return n_train * (b_antennas * k_pilots
                              + b_antennas ** 2 * (k_subcarriers - k_pilots)
                              + c_interp)
        if scheme == "ncds":
            return 2 * (k_subcarriers - 1) * n_train
    elif stage == 2:
        if scheme == "cds":
            return (b_antennas * k_subcarriers
                    * ((b_antennas ** 2 + 1) + b_antennas * (n_data - 1)))
        if scheme == "ncds":
            return 2 * (k_subcarriers * n_data - 1)
        if scheme == "rs":
            raise ValueError("reference-signal training has no second stage")
    raise ValueError(f"no complexity entry for scheme={scheme!r}, stage={stage}")
