import numpy as np
import pytest

from risim.arrays import ArrayGeometry, steering_vector
from risim.channel import (ChannelRealization, ClusterSet, LinkStatistics,
                           PathChannel, ReflectivePaths, _link_paths,
                           batched_mean_gains, cascade, delay_phasors,
                           effective_channel, mean_gain_over_subcarriers,
                           sample_clusters, synth_bs_ris, synth_direct,
                           synth_ris_ue)
from risim.errors import ConfigurationError

GEOM_B1 = ArrayGeometry(1, 1)
GEOM_BS = ArrayGeometry(4, 4)
GEOM_RIS = ArrayGeometry(4, 2)


def single_cluster(delay=0, gain=1.0 + 0j, aoa=(0.0, 0.0), aod=(0.0, 0.0)):
    return ClusterSet(
        delay_samples=np.array([delay]),
        gains=np.array([gain], dtype=complex),
        aod=np.array([aod]), aoa=np.array([aoa]),
        mean_powers=np.array([1.0]))


def table2_direct_stats(**over):
    base = dict(large_scale_gain_db=-86.0, rician_factor=0.0, n_clusters=20,
                delay_spread_s=30e-9, asd_deg=7.0, asa_deg=12.0, zsd_deg=15.0,
                zsa_deg=20.0, los_aod=(0.0, np.pi / 2),
                los_aoa=(0.876, 1.698), sample_rate_hz=30.72e6,
                max_delay_samples=128)
    base.update(over)
    return LinkStatistics(**base)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def test_degenerate_delay_spread_single_cluster():
    stats = table2_direct_stats(n_clusters=1, delay_spread_s=0.0)
    cs = sample_clusters(stats, np.random.default_rng(0))
    assert cs.delay_samples[0] == 0
    assert cs.mean_powers[0] == pytest.approx(1.0)


def test_cluster_powers_normalised_and_gain_law():
    stats = table2_direct_stats()
    rng = np.random.default_rng(7)
    n = 100_000
    total = 0.0
    for i in range(n):
        cs = sample_clusters(stats, rng)
        if i < 200:
            assert cs.mean_powers.sum() == pytest.approx(1.0, abs=1e-12)
        total += np.sum(np.abs(cs.gains) ** 2)
    assert total / n == pytest.approx(1.0, rel=0.01)


def test_zenith_clamped_to_range():
    stats = table2_direct_stats(los_aoa=(0.0, np.pi / 2), zsa_deg=20.0)
    rng = np.random.default_rng(3)
    for _ in range(200):
        cs = sample_clusters(stats, rng)
        assert np.all(cs.aoa[:, 1] >= 0.0) and np.all(cs.aoa[:, 1] <= np.pi)


def test_gain_magnitude_is_exponential():
    stats = table2_direct_stats(n_clusters=1, delay_spread_s=0.0)
    rng = np.random.default_rng(11)
    mags = np.array([np.abs(sample_clusters(stats, rng).gains[0]) ** 2
                     for _ in range(20_000)])
    assert mags.mean() == pytest.approx(1.0, rel=0.03)
    assert mags.var() / mags.mean() ** 2 == pytest.approx(1.0, rel=0.08)


def test_oversized_delay_spread_rejected():
    stats = table2_direct_stats(delay_spread_s=1e-3, max_delay_samples=16)
    with pytest.raises(ConfigurationError):
        sample_clusters(stats, np.random.default_rng(0))


def test_rayleigh_link_has_no_los():
    cs = sample_clusters(table2_direct_stats(), np.random.default_rng(0))
    assert cs.los is None


def test_link_statistics_validation():
    with pytest.raises(ConfigurationError):
        table2_direct_stats(large_scale_gain_db=3.0)      # gain > 1
    with pytest.raises(ConfigurationError):
        table2_direct_stats(rician_factor=-1.0)
    with pytest.raises(ConfigurationError):
        table2_direct_stats(n_clusters=0)
    with pytest.raises(ConfigurationError):
        table2_direct_stats(asa_deg=0.0)
    with pytest.raises(ConfigurationError):
        table2_direct_stats(los_aoa=(0.0, 3.5))           # zenith beyond pi


# ---------------------------------------------------------------------------
# synthesis
# ---------------------------------------------------------------------------

def test_direct_flat_channel():
    h = synth_direct(single_cluster(), GEOM_B1, 16, gain_linear=0.25)
    np.testing.assert_allclose(h, 0.5 * np.ones((16, 1)), atol=1e-12)


def test_direct_pure_delay_phase_ramp():
    k = 16
    h = synth_direct(single_cluster(delay=k // 4), GEOM_B1, k)
    np.testing.assert_allclose(np.abs(h[:, 0]), 1.0, atol=1e-12)
    steps = np.angle(h[1:, 0] / h[:-1, 0])
    np.testing.assert_allclose(steps, -np.pi / 2, atol=1e-12)


def test_direct_energy_matches_large_scale_gain():
    # Monte Carlo against the normalisation: mean_k ||h||^2 / B -> L_d
    stats = table2_direct_stats()
    rng = np.random.default_rng(2024)
    n, k = 10_000, 8
    acc = 0.0
    for _ in range(n):
        cs = sample_clusters(stats, rng)
        h = synth_direct(cs, GEOM_BS, k, stats.large_scale_gain)
        acc += np.sum(np.abs(h) ** 2) / (k * GEOM_BS.n_elements)
    assert acc / n == pytest.approx(10 ** -8.6, rel=0.02)


def test_bs_ris_energy_matches_large_scale_gain():
    stats = table2_direct_stats(large_scale_gain_db=-62.0, rician_factor=10.0,
                                n_clusters=10)
    rng = np.random.default_rng(99)
    n, k = 2_000, 4
    acc = 0.0
    for _ in range(n):
        cs = sample_clusters(stats, rng)
        g = synth_bs_ris(cs, GEOM_BS, GEOM_RIS, k, stats.large_scale_gain,
                         stats.rician_factor)
        acc += np.sum(np.abs(g) ** 2) / (k * GEOM_BS.n_elements
                                         * GEOM_RIS.n_elements)
    assert acc / n == pytest.approx(10 ** -6.2, rel=0.02)


def test_ris_ue_energy_matches_large_scale_gain():
    stats = table2_direct_stats(large_scale_gain_db=-60.0, rician_factor=10.0,
                                n_clusters=10)
    rng = np.random.default_rng(5)
    n, k = 2_000, 4
    acc = 0.0
    for _ in range(n):
        cs = sample_clusters(stats, rng)
        g = synth_ris_ue(cs, GEOM_RIS, k, stats.large_scale_gain,
                         stats.rician_factor)
        acc += np.sum(np.abs(g) ** 2) / (k * GEOM_RIS.n_elements)
    assert acc / n == pytest.approx(1e-6, rel=0.02)


def test_pure_los_bs_ris_is_rank_one():
    stats = table2_direct_stats(rician_factor=np.inf, n_clusters=10)
    cs = sample_clusters(stats, np.random.default_rng(1))
    g = synth_bs_ris(cs, GEOM_BS, GEOM_RIS, 4, 1.0, np.inf)
    for k in range(4):
        s = np.linalg.svd(g[k], compute_uv=False)
        assert s[1] / s[0] < 1e-12


def test_rayleigh_bs_ris_has_no_los_term():
    stats = table2_direct_stats(n_clusters=3)
    cs = sample_clusters(stats, np.random.default_rng(1))
    g = synth_bs_ris(cs, GEOM_BS, GEOM_RIS, 4, 1.0, 0.0)
    # reconstruct the NLoS sum by hand
    expect = np.zeros_like(g)
    for c in range(3):
        a_bs = steering_vector(GEOM_BS, *cs.aoa[c])
        a_ris = steering_vector(GEOM_RIS, *cs.aod[c])
        ph = delay_phasors([cs.delay_samples[c]], 4)[0]
        expect += cs.gains[c] * np.einsum("k,b,m->kbm", ph, a_bs, a_ris)
    np.testing.assert_allclose(g, expect, atol=1e-15)


def test_ris_ue_single_cluster_flat():
    cs = single_cluster(aoa=(0.0, 0.0))
    g = synth_ris_ue(cs, ArrayGeometry(1, 1), 8, 1.0, 0.0)
    np.testing.assert_allclose(g, np.ones((8, 1)), atol=1e-12)


# ---------------------------------------------------------------------------
# cascade / effective channel
# ---------------------------------------------------------------------------

def test_cascade_all_ones_and_zero():
    g1 = np.ones((2, 3, 4), dtype=complex)
    g2 = np.ones((2, 4), dtype=complex)
    np.testing.assert_array_equal(cascade(g1, g2), g1)
    np.testing.assert_array_equal(cascade(g1, 0 * g2), 0 * g1)


def test_cascade_matches_hand_loop():
    rng = np.random.default_rng(0)
    k, b, m = 2, 2, 3
    g1 = rng.normal(size=(k, b, m)) + 1j * rng.normal(size=(k, b, m))
    g2 = rng.normal(size=(k, m)) + 1j * rng.normal(size=(k, m))
    got = cascade(g1, g2)
    for kk in range(k):
        for bb in range(b):
            for mm in range(m):
                assert got[kk, bb, mm] == pytest.approx(
                    g1[kk, bb, mm] * g2[kk, mm])


def test_cascade_is_bilinear_in_first_argument():
    rng = np.random.default_rng(1)
    g1 = rng.normal(size=(3, 2, 4)) + 1j * rng.normal(size=(3, 2, 4))
    g2 = rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4))
    a = 0.3 - 1.7j
    np.testing.assert_allclose(cascade(a * g1, g2), a * cascade(g1, g2),
                               atol=1e-12)


def test_cascade_dimension_mismatch():
    with pytest.raises(ValueError):
        cascade(np.ones((2, 3, 4), complex), np.ones((2, 5), complex))


def test_effective_channel_matches_loop():
    rng = np.random.default_rng(4)
    k, b, m = 4, 2, 4
    real = ChannelRealization(
        h_direct=rng.normal(size=(k, b)) + 1j * rng.normal(size=(k, b)),
        g_bs_ris=rng.normal(size=(k, b, m)) + 1j * rng.normal(size=(k, b, m)),
        g_ris_ue=rng.normal(size=(k, m)) + 1j * rng.normal(size=(k, m)))
    psi = np.exp(1j * rng.uniform(-np.pi, np.pi, m))
    for kk in range(k):
        expect = real.h_direct[kk].copy()
        for bb in range(b):
            for mm in range(m):
                expect[bb] += (real.g_bs_ris[kk, bb, mm]
                               * real.g_ris_ue[kk, mm] * psi[mm])
        np.testing.assert_allclose(effective_channel(real, psi, kk), expect,
                                   atol=1e-12)


def test_effective_channel_reflective_part_linear():
    rng = np.random.default_rng(9)
    k, b, m = 3, 2, 4
    real = ChannelRealization(
        h_direct=rng.normal(size=(k, b)) + 1j * rng.normal(size=(k, b)),
        g_bs_ris=rng.normal(size=(k, b, m)) + 1j * rng.normal(size=(k, b, m)),
        g_ris_ue=rng.normal(size=(k, m)) + 1j * rng.normal(size=(k, m)))
    p1 = rng.normal(size=m) + 1j * rng.normal(size=m)
    p2 = rng.normal(size=m) + 1j * rng.normal(size=m)
    refl = lambda p: real.effective_all(p) - real.h_direct
    np.testing.assert_allclose(refl(p1 + p2), refl(p1) + refl(p2), atol=1e-12)


def test_effective_zero_cascade_returns_direct():
    real = ChannelRealization(
        h_direct=np.arange(6, dtype=complex).reshape(3, 2),
        g_bs_ris=np.zeros((3, 2, 4), complex),
        g_ris_ue=np.zeros((3, 4), complex))
    psi = np.ones(4, dtype=complex)
    np.testing.assert_array_equal(real.effective(psi, 1), real.h_direct[1])


def test_effective_single_element():
    real = ChannelRealization(
        h_direct=np.full((1, 1), 2.0 + 0j),
        g_bs_ris=np.full((1, 1, 1), 3.0 + 0j),
        g_ris_ue=np.full((1, 1), 1.0 + 0j))
    assert real.effective([1.0], 0)[0] == pytest.approx(5.0)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_dump_round_trip_and_layout():
    rng = np.random.default_rng(12)
    real = ChannelRealization(
        h_direct=rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2)),
        g_bs_ris=rng.normal(size=(3, 2, 4)) + 1j * rng.normal(size=(3, 2, 4)),
        g_ris_ue=rng.normal(size=(3, 4)) + 1j * rng.normal(size=(3, 4)))
    blob = real.to_bytes()
    back = ChannelRealization.from_bytes(blob)
    np.testing.assert_array_equal(back.h_direct, real.h_direct)
    np.testing.assert_array_equal(back.g_bs_ris, real.g_bs_ris)
    np.testing.assert_array_equal(back.g_ris_ue, real.g_ris_ue)
    # documented layout: magic, <u4 dims, then interleaved re/im f8 pairs
    assert blob[:4] == b"RISC"
    ver, k, b, m = np.frombuffer(blob[4:20], dtype="<u4")
    assert (ver, k, b, m) == (1, 3, 2, 4)
    first = np.frombuffer(blob[20:36], dtype="<f8")
    assert first[0] == real.h_direct[0, 0].real
    assert first[1] == real.h_direct[0, 0].imag


def test_truncated_dump_rejected():
    real = ChannelRealization(
        h_direct=np.ones((2, 1), complex),
        g_bs_ris=np.ones((2, 1, 2), complex),
        g_ris_ue=np.ones((2, 2), complex))
    with pytest.raises(ValueError):
        ChannelRealization.from_bytes(real.to_bytes()[:-8])


# ---------------------------------------------------------------------------
# factored path representation
# ---------------------------------------------------------------------------

def _reflective_fixture(rician=10.0):
    stats_e = table2_direct_stats(large_scale_gain_db=-62.0,
                                  rician_factor=rician, n_clusters=4)
    stats_u = table2_direct_stats(large_scale_gain_db=-60.0,
                                  rician_factor=rician, n_clusters=3)
    rng = np.random.default_rng(21)
    cs_e = sample_clusters(stats_e, rng)
    cs_u = sample_clusters(stats_u, rng)
    k = 16
    dense = cascade(
        synth_bs_ris(cs_e, GEOM_BS, GEOM_RIS, k, stats_e.large_scale_gain, rician),
        synth_ris_ue(cs_u, GEOM_RIS, k, stats_u.large_scale_gain, rician))
    paths = ReflectivePaths(cs_e, cs_u, GEOM_BS, GEOM_RIS,
                            stats_e.large_scale_gain, rician,
                            stats_u.large_scale_gain, rician)
    return dense, paths, k


def test_reflective_paths_match_dense_cascade():
    dense, paths, k = _reflective_fixture()
    rng = np.random.default_rng(2)
    psi = np.exp(1j * rng.uniform(-np.pi, np.pi, GEOM_RIS.n_elements))
    np.testing.assert_allclose(paths.response(psi, k), dense @ psi, atol=1e-18)


def test_mean_gain_exact_over_subcarriers():
    dense, paths, k = _reflective_fixture()
    rng = np.random.default_rng(3)
    psis = np.exp(1j * rng.uniform(-np.pi, np.pi, (5, GEOM_RIS.n_elements)))
    gains = batched_mean_gains(paths, psis)
    for i in range(5):
        ref = np.mean(np.sum(np.abs(dense @ psis[i]) ** 2, axis=1))
        assert gains[i] == pytest.approx(ref, rel=1e-12)
        assert mean_gain_over_subcarriers(paths.as_paths(psis[i])) == \
            pytest.approx(ref, rel=1e-12)


def test_batched_gain_includes_direct_paths():
    dense, paths, k = _reflective_fixture()
    stats_d = table2_direct_stats(n_clusters=5)
    cs_d = sample_clusters(stats_d, np.random.default_rng(8))
    h_d = synth_direct(cs_d, GEOM_BS, k, stats_d.large_scale_gain)
    dg, dd, da, _ = _link_paths(cs_d, stats_d.large_scale_gain, 0.0, GEOM_BS, None)
    direct = PathChannel(dg, dd, da)
    np.testing.assert_allclose(direct.response(k), h_d, atol=1e-18)
    psi = np.exp(1j * np.random.default_rng(5).uniform(
        -np.pi, np.pi, GEOM_RIS.n_elements))
    got = batched_mean_gains(paths, psi[None], extra=direct)[0]
    ref = np.mean(np.sum(np.abs(h_d + dense @ psi) ** 2, axis=1))
    assert got == pytest.approx(ref, rel=1e-12)
