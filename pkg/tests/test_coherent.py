import numpy as np
import pytest

from risim.analysis import complexity
from risim.coherent import (ChannelEstimate, PilotPattern, cds_stage_one_rx,
                            cds_stage_two_rx, comb_pattern, interpolate,
                            ls_estimate, mrc_combine, qam_hard_demod,
                            qam_modulate, zf_combine)
from risim.errors import ConfigurationError


# ---------------------------------------------------------------------------
# QAM
# ---------------------------------------------------------------------------

def test_qpsk_points():
    bits = np.array([0, 0, 0, 1, 1, 1, 1, 0])
    pts = qam_modulate(bits, 4)
    expect = np.array([-1 - 1j, -1 + 1j, 1 + 1j, 1 - 1j]) / np.sqrt(2)
    np.testing.assert_allclose(pts, expect, atol=1e-12)


@pytest.mark.parametrize("order", [4, 16, 64])
def test_qam_round_trip(order):
    rng = np.random.default_rng(order)
    b = order.bit_length() - 1
    bits = rng.integers(0, 2, size=(10_000 // b) * b)
    sym = qam_modulate(bits, order)
    np.testing.assert_array_equal(qam_hard_demod(sym, order), bits)


def test_16qam_unit_average_power():
    b = 4
    all_words = np.arange(16)
    bits = ((all_words[:, None] >> np.arange(b - 1, -1, -1)) & 1).reshape(-1)
    pts = qam_modulate(bits, 16)
    assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0, rel=1e-12)


def test_non_square_qam_rejected():
    with pytest.raises(ValueError):
        qam_modulate(np.zeros(3, dtype=int), 8)


# ---------------------------------------------------------------------------
# estimation and interpolation
# ---------------------------------------------------------------------------

def test_ls_noiseless_exact():
    rng = np.random.default_rng(0)
    h = rng.normal(size=(5, 3)) + 1j * rng.normal(size=(5, 3))
    x = np.exp(1j * rng.uniform(-np.pi, np.pi, 5))
    est = ls_estimate(h * x[:, None], x)
    np.testing.assert_allclose(est.h, h, atol=1e-12)
    assert est.source == "pilot-ls"


def test_ls_pilot_phase_removed():
    h = np.array([[1.0 + 2j], [0.5 - 1j]])
    est = ls_estimate(1j * h, np.array([1j, 1j]))
    np.testing.assert_allclose(est.h, h, atol=1e-12)


def test_ls_awgn_variance():
    # zero channel: estimate variance is sigma_v^2 / P_x per antenna
    rng = np.random.default_rng(1)
    n, px, nv = 100_000, 2.0, 0.5
    v = np.sqrt(nv / 2) * (rng.normal(size=(n, 1)) + 1j * rng.normal(size=(n, 1)))
    est = ls_estimate(v, np.sqrt(px) * np.ones(n))
    assert np.mean(np.abs(est.h) ** 2) == pytest.approx(nv / px, rel=0.02)


def test_ls_zero_pilot_rejected():
    with pytest.raises(ValueError):
        ls_estimate(np.ones((2, 1), complex), np.array([1.0, 0.0]))


def test_interpolate_flat_exact():
    est = ChannelEstimate(np.full((4, 2), 1.5 - 0.5j), "pilot-ls")
    full, c_i = interpolate(est, np.array([0, 3, 6, 9]), 10)
    np.testing.assert_allclose(full.h, 1.5 - 0.5j, atol=1e-12)
    assert c_i == 2 * (10 - 4)
    assert full.source == "interpolated"


def test_interpolate_hand_case():
    # K=6, pilots at tones 0 and 3; midpoints are convex combinations,
    # edge tones hold the last pilot value
    h0, h3 = 1.0 + 1j, -2.0 + 0.5j
    est = ChannelEstimate(np.array([[h0], [h3]]), "pilot-ls")
    full, c_i = interpolate(est, np.array([0, 3]), 6)
    expect = [h0, (2 * h0 + h3) / 3, (h0 + 2 * h3) / 3, h3, h3, h3]
    np.testing.assert_allclose(full.h[:, 0], expect, atol=1e-12)
    assert c_i == 1 * (6 - 2)


def test_interpolate_single_tap_chord_bound():
    # delay-tau channel: linear interpolation sits on the chord of the
    # unit-circle arc between pilots; the error never exceeds the chord
    # depth 1 - cos(delta/2) with delta = 2*pi*tau*(K/K_p)/K
    k, ratio, tau = 64, 4, 2
    pattern = comb_pattern(k, ratio)
    h = np.exp(-1j * 2 * np.pi / k * tau * np.arange(k))[:, None]
    est = ChannelEstimate(h[pattern.indices], "pilot-ls")
    full, _ = interpolate(est, pattern.indices, k)
    err = np.abs(full.h - h)[: pattern.indices[-1]]      # inside the pilot span
    delta = 2 * np.pi * tau * ratio / k
    bound = 1 - np.cos(delta / 2)
    assert err.max() <= bound + 1e-12
    assert err.max() > 0.2 * bound                       # bound is tight-ish


def test_interpolate_needs_two_pilots():
    with pytest.raises(ValueError):
        interpolate(ChannelEstimate(np.ones((1, 1), complex), "pilot-ls"),
                    np.array([0]), 4)


def test_comb_pattern_table2_count():
    pat = comb_pattern(1024, 3)
    assert pat.k_p == 341
    assert pat.indices[0] == 0 and pat.indices[-1] == 1020
    assert len(pat.data_indices) == 1024 - 341


def test_pilot_pattern_validation():
    with pytest.raises(ConfigurationError):
        PilotPattern(4, np.arange(5), np.ones(5, complex))


# ---------------------------------------------------------------------------
# combiners
# ---------------------------------------------------------------------------

def test_mrc_exact_inversion():
    rng = np.random.default_rng(2)
    h = rng.normal(size=(6, 4)) + 1j * rng.normal(size=(6, 4))
    x = rng.normal(size=6) + 1j * rng.normal(size=6)
    s, erased = mrc_combine(h * x[:, None], h)
    np.testing.assert_allclose(s, x, atol=1e-12)
    assert not erased.any()


def test_mrc_single_antenna_is_division():
    h = np.array([[2.0 + 1j]])
    y = np.array([[3.0 - 1j]])
    s, _ = mrc_combine(y, h)
    assert s[0] == pytest.approx(y[0, 0] / h[0, 0])


def test_mrc_matches_loop_oracle():
    rng = np.random.default_rng(3)
    h = rng.normal(size=(5, 4)) + 1j * rng.normal(size=(5, 4))
    y = rng.normal(size=(5, 4)) + 1j * rng.normal(size=(5, 4))
    s, _ = mrc_combine(y, h)
    for kk in range(5):
        num = sum(np.conj(h[kk, b]) * y[kk, b] for b in range(4))
        den = sum(abs(h[kk, b]) ** 2 for b in range(4))
        assert s[kk] == pytest.approx(num / den, rel=1e-12)


def test_zf_equals_mrc_for_simo():
    rng = np.random.default_rng(4)
    h = rng.normal(size=(7, 3)) + 1j * rng.normal(size=(7, 3))
    y = rng.normal(size=(7, 3)) + 1j * rng.normal(size=(7, 3))
    s_mrc, _ = mrc_combine(y, h)
    s_zf, _ = zf_combine(y, h)
    np.testing.assert_allclose(s_zf, s_mrc, atol=1e-12)


def test_zero_channel_flags_erasure():
    y = np.ones((2, 3), complex)
    h = np.zeros((2, 3), complex)
    s, erased = mrc_combine(y, h)
    assert erased.all()
    np.testing.assert_array_equal(s, 0)
    s2, erased2 = zf_combine(y, h)
    assert erased2.all()


# ---------------------------------------------------------------------------
# stage receivers
# ---------------------------------------------------------------------------

def _stage_one_fixture(k=12, n_sym=3, n_rx=2, order=4, seed=0):
    rng = np.random.default_rng(seed)
    pattern = comb_pattern(k, 3)
    b = order.bit_length() - 1
    data_idx = pattern.data_indices
    bits = rng.integers(0, 2, size=n_sym * len(data_idx) * b)
    d = qam_modulate(bits, order).reshape(n_sym, len(data_idx))
    x = np.ones((n_sym, k), dtype=complex)
    x[:, data_idx] = d
    h = rng.normal(size=(n_sym, k, n_rx)) + 1j * rng.normal(size=(n_sym, k, n_rx))
    y = h * x[:, :, None]
    return y, h, pattern, bits, order


def test_stage_one_perfect_noiseless_zero_errors():
    y, h, pattern, bits, order = _stage_one_fixture()
    rx, _ = cds_stage_one_rx(y, pattern, order, perfect_h=h)
    np.testing.assert_array_equal(rx, bits)


def test_stage_one_estimated_flatish_channel_recovers():
    # flat channel: LS + interpolation is exact, so decisions are clean
    rng = np.random.default_rng(5)
    k, n_sym, n_rx, order = 12, 2, 3, 16
    pattern = comb_pattern(k, 3)
    b = 4
    bits = rng.integers(0, 2, size=n_sym * len(pattern.data_indices) * b)
    d = qam_modulate(bits, order).reshape(n_sym, -1)
    x = np.ones((n_sym, k), dtype=complex)
    x[:, pattern.data_indices] = d
    h = (rng.normal(size=(n_sym, 1, n_rx))
         + 1j * rng.normal(size=(n_sym, 1, n_rx))) * np.ones((1, k, 1))
    rx, _ = cds_stage_one_rx(h * x[:, :, None], pattern, order)
    np.testing.assert_array_equal(rx, bits)


def test_stage_one_complexity_table_value():
    # N_l=64, B=16, K=1024, K_p=341, C_I=B(K-K_p)
    count = complexity("cds", 1, b_antennas=16, k_subcarriers=1024,
                       k_pilots=341, n_train=64, c_interp=16 * (1024 - 341))
    assert count == 64 * (16 * 341 + 256 * 683 + 16 * 683) == 12_238_848
    assert complexity("rs", 1) == 0


def test_stage_two_perfect_noiseless_zero_errors():
    rng = np.random.default_rng(6)
    k, n_h, n_rx, order = 8, 4, 3, 16
    bits = rng.integers(0, 2, size=k * (n_h - 1) * 4)
    x = np.ones((n_h, k), dtype=complex)
    x[1:] = qam_modulate(bits, order).reshape(n_h - 1, k)
    h = rng.normal(size=(k, n_rx)) + 1j * rng.normal(size=(k, n_rx))
    y = h[None] * x[:, :, None]
    rx, _ = cds_stage_two_rx(y, np.ones(k, complex), order, perfect_h=h)
    np.testing.assert_array_equal(rx, bits)
    rx2, _ = cds_stage_two_rx(y, np.ones(k, complex), order)   # LS, still exact
    np.testing.assert_array_equal(rx2, bits)


def test_stage_two_minimal_block():
    rng = np.random.default_rng(7)
    k, n_rx = 6, 2
    bits = rng.integers(0, 2, size=k * 4)
    x = np.ones((2, k), dtype=complex)
    x[1] = qam_modulate(bits, 16).reshape(k)
    h = rng.normal(size=(k, n_rx)) + 1j * rng.normal(size=(k, n_rx))
    rx, _ = cds_stage_two_rx(h[None] * x[:, :, None], np.ones(k, complex), 16)
    np.testing.assert_array_equal(rx, bits)


def test_stage_two_needs_pilot_plus_data():
    with pytest.raises(ValueError):
        cds_stage_two_rx(np.zeros((1, 4, 2), complex), np.ones(4, complex), 16)


def test_stage_two_complexity_table_value():
    count = complexity("cds", 2, b_antennas=16, k_subcarriers=1024, n_data=100)
    assert count == 16 * 1024 * (257 + 16 * 99) == 16384 * 1841
