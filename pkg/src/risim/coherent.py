"""Coherent (pilot-aided) baseline receivers: LS estimation, MRC and ZF.

Stage one estimates the channel from a comb of pilot tones inside every
OFDM symbol (the effective channel changes per symbol during training),
interpolates over the data tones and combines with MRC.  Stage two spends
the first OFDM symbol entirely on pilots, then zero-forces the remaining
N_h - 1 data symbols with that one-shot estimate.  Complex-product counts
follow the complexity ledger in :mod:`risim.analysis`.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .analysis import complexity
from .diffmod import _gray, _gray_inverse, bits_to_words, words_to_bits
from .errors import ConfigurationError


# ---------------------------------------------------------------------------
# Square QAM (Gray labelled per axis, unit average power)
# ---------------------------------------------------------------------------

def _check_qam_order(order: int) -> int:
    side = int(round(np.sqrt(order)))
    if side * side != order or side < 2 or (side & (side - 1)):
        raise ValueError(f"QAM order must be square with power-of-two side, got {order}")
    return side


def _pam_levels(side: int) -> np.ndarray:
    return 2.0 * np.arange(side) - side + 1.0


def qam_modulate(bits: np.ndarray, order: int) -> np.ndarray:
    """Gray-mapped square QAM with unit average power."""
    side = _check_qam_order(order)
    b_axis = side.bit_length() - 1
    words = bits_to_words(bits, 2 * b_axis)
    wi, wq = words >> b_axis, words & (side - 1)
    levels = _pam_levels(side)
    scale = np.sqrt(2.0 * (side * side - 1) / 3.0)
    return (levels[_gray_inverse(wi)] + 1j * levels[_gray_inverse(wq)]) / scale


def qam_hard_demod(symbols: np.ndarray, order: int) -> np.ndarray:
    """Per-axis nearest-level decisions back to bits."""
    side = _check_qam_order(order)
    b_axis = side.bit_length() - 1
    scale = np.sqrt(2.0 * (side * side - 1) / 3.0)
    s = np.asarray(symbols) * scale
    li = np.clip(np.round((s.real + side - 1) / 2.0), 0, side - 1).astype(np.int64)
    lq = np.clip(np.round((s.imag + side - 1) / 2.0), 0, side - 1).astype(np.int64)
    words = (_gray(li) << b_axis) | _gray(lq)
    return words_to_bits(words, 2 * b_axis)


# ---------------------------------------------------------------------------
# Pilot patterns and channel estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PilotPattern:
    """Comb of pilot tones inside one OFDM symbol."""

    k_subcarriers: int
    indices: np.ndarray           # sorted pilot tone positions (0-based)
    values: np.ndarray            # unit-modulus pilot symbols

    def __post_init__(self):
        k_p = len(self.indices)
        if not 0 < k_p <= self.k_subcarriers:
            raise ConfigurationError("pilot count must be in (0, K]")
        if len(self.values) != k_p:
            raise ConfigurationError("one pilot value per pilot tone")

    @property
    def k_p(self) -> int:
        return len(self.indices)

    @property
    def data_indices(self) -> np.ndarray:
        mask = np.ones(self.k_subcarriers, dtype=bool)
        mask[self.indices] = False
        return np.flatnonzero(mask)


def comb_pattern(k_subcarriers: int, ratio: int = 3) -> PilotPattern:
    """Every ``ratio``-th tone carries a pilot; K_p = K // ratio."""
    if ratio < 1 or ratio > k_subcarriers:
        raise ConfigurationError(f"invalid comb ratio {ratio}")
    k_p = k_subcarriers // ratio
    idx = ratio * np.arange(k_p)
    return PilotPattern(k_subcarriers, idx, np.ones(k_p, dtype=complex))


@dataclass
class ChannelEstimate:
    """Per-tone estimate with its provenance tag."""

    h: np.ndarray                 # (n_tones, B)
    source: str                   # "pilot-ls" | "interpolated" | "perfect"


def ls_estimate(y_pilots: np.ndarray, pilot_values: np.ndarray) -> ChannelEstimate:
    """Least squares per tone and antenna: h = y / x."""
    x = np.asarray(pilot_values)
    if np.any(x == 0):
        raise ValueError("pilot values must be nonzero")
    return ChannelEstimate(np.asarray(y_pilots) / x[:, None], "pilot-ls")


def interpolate(estimate: ChannelEstimate, pilot_indices: np.ndarray,
                k_subcarriers: int) -> tuple[ChannelEstimate, int]:
    """Linear interpolation to all K tones; also returns the product count C_I.

    Interpolation is linear in the complex plane per antenna, holding the
    edge values outside the pilot span; C_I charges one complex product per
    interpolated tone per antenna, B * (K - K_p).
    """
    idx = np.asarray(pilot_indices)
    if len(idx) < 2:
        raise ValueError("interpolation needs at least 2 pilot tones")
    n_rx = estimate.h.shape[1]
    grid = np.arange(k_subcarriers)
    full = np.empty((k_subcarriers, n_rx), dtype=complex)
    for b in range(n_rx):
        full[:, b] = (np.interp(grid, idx, estimate.h[:, b].real)
                      + 1j * np.interp(grid, idx, estimate.h[:, b].imag))
    c_i = n_rx * (k_subcarriers - len(idx))
    return ChannelEstimate(full, "interpolated"), c_i


# ---------------------------------------------------------------------------
# Combiners
# ---------------------------------------------------------------------------

def mrc_combine(y: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Maximum-ratio combining h^H y / ||h||^2; returns (symbols, erased mask)."""
    y, h = np.asarray(y), np.asarray(h)
    num = np.einsum("...b,...b->...", h.conj(), y)
    den = np.einsum("...b,...b->...", h.conj(), h).real
    erased = den == 0.0
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=~erased)
    return out, erased


def zf_combine(y: np.ndarray, h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Zero-forcing pseudo-inverse (h^H h)^(-1) h^H y for the single-stream uplink.

    Numerically this coincides with MRC normalisation in SIMO; it is kept as
    a distinct path because the complexity ledger charges it differently.
    """
    y, h = np.asarray(y), np.asarray(h)
    gram = np.einsum("...b,...b->...", h.conj(), h).real
    erased = gram == 0.0
    matched = np.einsum("...b,...b->...", h.conj(), y)
    out = np.zeros_like(matched)
    np.divide(matched, gram, out=out, where=~erased)
    return out, erased


# ---------------------------------------------------------------------------
# Stage receivers
# ---------------------------------------------------------------------------

def cds_stage_one_rx(y_grid: np.ndarray, pattern: PilotPattern, order: int,
                     perfect_h: Optional[np.ndarray] = None,
                     pilot_scale: float = 1.0) -> tuple[np.ndarray, int]:
    """Per-symbol LS + interpolation + MRC + QAM demod over the training stage.

    ``y_grid`` has shape (N_l, K, B); ``perfect_h`` (N_l, K, B) switches to
    perfect channel knowledge.  Returns the hard bit decisions on the data
    tones and the stage complexity count.
    """
    n_sym, k_sub, n_rx = y_grid.shape
    data_idx = pattern.data_indices
    bits = []
    for n in range(n_sym):
        if perfect_h is not None:
            h_data = perfect_h[n][data_idx]
        else:
            est = ls_estimate(y_grid[n][pattern.indices],
                              pattern.values * pilot_scale)
            full, _ = interpolate(est, pattern.indices, k_sub)
            h_data = full.h[data_idx]
        s_hat, _ = mrc_combine(y_grid[n][data_idx], h_data)
        bits.append(qam_hard_demod(s_hat, order))
    c_i = n_rx * (k_sub - pattern.k_p)
    count = complexity("cds", 1, b_antennas=n_rx, k_subcarriers=k_sub,
                       k_pilots=pattern.k_p, n_train=n_sym, c_interp=c_i)
    return np.concatenate(bits), count


def cds_stage_two_rx(y_block: np.ndarray, pilot_values: np.ndarray, order: int,
                     perfect_h: Optional[np.ndarray] = None) -> tuple[np.ndarray, int]:
    """One-shot estimation on symbol 1, ZF on symbols 2..N_h, QAM demod.

    ``y_block`` has shape (N_h, K, B) with the first symbol all pilots.
    """
    n_sym, k_sub, n_rx = y_block.shape
    if n_sym < 2:
        raise ValueError("stage two needs N_h >= 2 (one pilot symbol plus data)")
    if perfect_h is not None:
        h = perfect_h
    else:
        h = ls_estimate(y_block[0], pilot_values).h
    bits = []
    for n in range(1, n_sym):
        s_hat, _ = zf_combine(y_block[n], h)
        bits.append(qam_hard_demod(s_hat, order))
    count = complexity("cds", 2, b_antennas=n_rx, k_subcarriers=k_sub,
                       n_data=n_sym)
    return np.concatenate(bits), count
