"""Differential PSK transmission chain for the non-coherent receiver.

Stage one encodes along the frequency axis of each OFDM symbol (the RIS
profile changes every symbol, so time-adjacent resources are useless for
differential detection); stage two encodes along a serpentine path over
the whole K x N_h block, frequency-adjacent inside a symbol and
time-adjacent at the edge subcarriers, so only two reference symbols are
spent for the entire block.

The receiver forms Hermitian products of received vectors on consecutive
path resources, divides by the antenna count and derotates frequency-
direction links by the residual differential phase estimated from the
pilot pair.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFadeWarning

_TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# PSK constellation (Gray labelled, offset by pi/Q so no point sits on a
# decision boundary)
# ---------------------------------------------------------------------------

def _check_psk_order(order: int) -> int:
    b = int(order).bit_length() - 1
    if order < 2 or (1 << b) != order:
        raise ValueError(f"PSK order must be a power of two >= 2, got {order}")
    return b


def _gray(n: np.ndarray) -> np.ndarray:
    return n ^ (n >> 1)


def _gray_inverse(g: np.ndarray) -> np.ndarray:
    n = np.asarray(g).copy()
    shift = 1
    while shift < 32:
        n ^= n >> shift
        shift <<= 1
    return n


def bits_to_words(bits: np.ndarray, bits_per_word: int) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size % bits_per_word:
        raise ValueError(f"bit count {bits.size} not a multiple of {bits_per_word}")
    w = bits.reshape(-1, bits_per_word)
    weights = 1 << np.arange(bits_per_word - 1, -1, -1)
    return w @ weights


def words_to_bits(words: np.ndarray, bits_per_word: int) -> np.ndarray:
    words = np.asarray(words, dtype=np.int64)
    shifts = np.arange(bits_per_word - 1, -1, -1)
    return ((words[:, None] >> shifts) & 1).reshape(-1).astype(np.uint8)


def psk_modulate(bits: np.ndarray, order: int) -> np.ndarray:
    """Gray-mapped Q-PSK points exp(j*(2*pi*m/Q + pi/Q)), unit modulus."""
    b = _check_psk_order(order)
    idx = _gray_inverse(bits_to_words(bits, b))
    return np.exp(1j * (_TWO_PI * idx / order + np.pi / order))


def psk_hard_demod(symbols: np.ndarray, order: int) -> np.ndarray:
    """Nearest-point (phase) decisions back to the Gray-labelled bits."""
    b = _check_psk_order(order)
    ang = np.angle(np.asarray(symbols))
    idx = np.round(ang * order / _TWO_PI - 0.5).astype(np.int64) % order
    return words_to_bits(_gray(idx), b)


# ---------------------------------------------------------------------------
# Frequency-domain scheme (stage one)
# ---------------------------------------------------------------------------

def diff_encode_fds(data: np.ndarray, k_subcarriers: int, power: float = 1.0,
                    pilots: tuple[complex, complex] = (1.0, 1.0)) -> np.ndarray:
    """Differentially encode one OFDM symbol along frequency.

    ``data`` holds the K-2 unit-modulus payload symbols (a trailing axis may
    carry several OFDM symbols at once).  x_1 = p_1, x_2 = x_1 p_2 and
    x_k = x_{k-1} s_k afterwards; the result is scaled to per-symbol power
    ``power``.
    """
    data = np.asarray(data)
    if k_subcarriers < 3:
        raise ValueError("FDS needs at least 3 subcarriers (2 pilots + data)")
    if data.shape[0] != k_subcarriers - 2:
        raise ValueError(f"expected {k_subcarriers - 2} data symbols, got {data.shape[0]}")
    steps = np.concatenate([
        np.broadcast_to(np.asarray(pilots, dtype=complex).reshape(
            (2,) + (1,) * (data.ndim - 1)), (2,) + data.shape[1:]),
        data], axis=0)
    return np.sqrt(power) * np.cumprod(steps, axis=0)


def diff_decode(y: np.ndarray, zeta_hat: float = 0.0) -> np.ndarray:
    """Soft payload symbols z_k = (1/B) y_{k-1}^H y_k e^{-j zeta}, k = 3..K."""
    y = np.asarray(y)
    n_rx = y.shape[-1]
    z = np.einsum("k...b,k...b->k...", y[1:-1].conj(), y[2:])
    return z * (np.exp(-1j * zeta_hat) / n_rx)


def diff_decode_terms(h: np.ndarray, x: np.ndarray, v: np.ndarray,
                      zeta_hat: float = 0.0) -> dict:
    """Term-by-term decomposition of the decoder output (debug path).

    ``y = h * x[:, None] + v`` is reconstructed internally; the four returned
    arrays split y_{k-1}^H y_k into signal x signal, signal x noise,
    noise x signal and noise x noise parts whose sum equals z * B * e^{j zeta}.
    """
    h, x, v = np.asarray(h), np.asarray(x), np.asarray(v)
    s_part = h * x[:, None]
    i1 = np.einsum("kb,kb->k", s_part[1:-1].conj(), s_part[2:])
    i2 = np.einsum("kb,kb->k", s_part[1:-1].conj(), v[2:])
    i3 = np.einsum("kb,kb->k", v[1:-1].conj(), s_part[2:])
    i4 = np.einsum("kb,kb->k", v[1:-1].conj(), v[2:])
    n_rx = h.shape[1]
    z = (i1 + i2 + i3 + i4) * (np.exp(-1j * zeta_hat) / n_rx)
    return {"z": z, "i1": i1, "i2": i2, "i3": i3, "i4": i4}


def estimate_residual_phase(y1: np.ndarray, y2: np.ndarray,
                            p1: complex = 1.0, p2: complex = 1.0) -> float:
    """Residual differential phase from the pilot pair, wrapped to (-pi, pi].

    A vanishing pilot inner product leaves the phase undefined (degenerate
    fade); the estimate falls back to 0 with a warning so a Monte Carlo
    trial survives.
    """
    inner = complex(np.vdot(y1, y2))
    if inner == 0:
        warnings.warn("pilot inner product is exactly zero; using zeta=0",
                      DegenerateFadeWarning)
        return 0.0
    zeta = np.angle(inner) - np.angle(p2 / p1)
    return float(-np.mod(-zeta + np.pi, _TWO_PI) + np.pi)   # wrap into (-pi, pi]


def measure_power(y: np.ndarray) -> float:
    """Mean received power over the subcarriers of one OFDM symbol, (1/K) sum_k ||y_k||^2."""
    y = np.asarray(y)
    return float(np.sum(np.abs(y) ** 2) / y.shape[0])


def select_codeword(powers, schedule) -> int:
    """Codeword number (1-based) with the highest mean measured power.

    ``schedule[n]`` names the codeword active during training symbol n.
    Ties break toward the lowest codeword number.
    """
    powers = np.asarray(powers, dtype=float)
    schedule = np.asarray(schedule, dtype=np.int64)
    if schedule.size == 0 or powers.size != schedule.size:
        raise ValueError("schedule must be non-empty and match the power samples")
    uniq = np.unique(schedule)
    means = np.array([powers[schedule == c].mean() for c in uniq])
    return int(uniq[np.argmax(means)])


# ---------------------------------------------------------------------------
# Mixed-domain scheme (stage two)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MdsMapping:
    """Serpentine resource path over a K x N_h block.

    ``subcarrier[i]``/``symbol[i]`` give the 0-based grid position of linear
    resource i (0-based); ``link_dir[i]`` describes the hop from i-1 to i:
    +1 ascending in frequency, -1 descending, 0 time-adjacent (edge turn).
    """

    k_subcarriers: int
    n_symbols: int
    subcarrier: np.ndarray
    symbol: np.ndarray
    link_dir: np.ndarray

    @property
    def n_resources(self) -> int:
        return self.k_subcarriers * self.n_symbols


def serpentine_mapping(k_subcarriers: int, n_symbols: int) -> MdsMapping:
    """Boustrophedon path: odd symbols sweep k upward, even ones downward."""
    if k_subcarriers < 3 or n_symbols < 1:
        raise ValueError("block needs K >= 3 and N_h >= 1")
    cols = []
    up = np.arange(k_subcarriers)
    for n in range(n_symbols):
        cols.append(up if n % 2 == 0 else up[::-1])
    subcarrier = np.concatenate(cols)
    symbol = np.repeat(np.arange(n_symbols), k_subcarriers)
    dk = np.diff(subcarrier)
    link_dir = np.concatenate([[0], np.sign(dk)]).astype(np.int8)
    return MdsMapping(k_subcarriers, n_symbols, subcarrier, symbol, link_dir)


def mds_encode(data: np.ndarray, k_subcarriers: int, n_symbols: int,
               mapping: MdsMapping | None = None, power: float = 1.0,
               pilots: tuple[complex, complex] = (1.0, 1.0)) -> np.ndarray:
    """Differentially encode K*N_h - 2 payload symbols onto the block grid."""
    mapping = mapping or serpentine_mapping(k_subcarriers, n_symbols)
    data = np.asarray(data)
    n_res = mapping.n_resources
    if data.shape[0] != n_res - 2:
        raise ValueError(f"expected {n_res - 2} data symbols, got {data.shape[0]}")
    steps = np.concatenate([[pilots[0], pilots[1]], data]).astype(complex)
    x_lin = np.sqrt(power) * np.cumprod(steps)
    grid = np.empty((k_subcarriers, n_symbols), dtype=complex)
    grid[mapping.subcarrier, mapping.symbol] = x_lin
    return grid


def mds_decode(y: np.ndarray, zeta_hat: float = 0.0,
               mapping: MdsMapping | None = None) -> np.ndarray:
    """Soft payload symbols along the serpentine path.

    ``y`` has shape (K, N_h, B).  Frequency-direction links are derotated by
    exp(-j*dir*zeta); time-adjacent links at the block edges need no
    compensation (same subcarrier, static channel).
    """
    y = np.asarray(y)
    k_sub, n_sym, n_rx = y.shape
    mapping = mapping or serpentine_mapping(k_sub, n_sym)
    path = y[mapping.subcarrier, mapping.symbol]          # (K*N_h, B)
    z = np.einsum("ib,ib->i", path[1:-1].conj(), path[2:]) / n_rx
    rot = np.exp(-1j * zeta_hat * mapping.link_dir[2:])
    return z * rot
