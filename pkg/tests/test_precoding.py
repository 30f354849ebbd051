import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noma_ee.channel import ArrayConfig, PathComponent, channel_from_paths, steering_vector
from noma_ee.config import ScenarioConfig
from noma_ee.exceptions import ConfigError, OrderingError, PrecoderSingularError
from noma_ee.precoding import (
    EffectiveGains,
    HybridBeamformer,
    analog_matrix,
    beam_scores,
    build_codebook,
    build_precoder,
    effective_gains,
    select_analog_beam,
    zf_digital,
)
from noma_ee.sim import draw_realization

SMALL = ScenarioConfig(n_tx=32, n_rf=4, n_clusters=4, users_dropped=32, rf_chains=[4, 8], trials=4)


@pytest.fixture(scope="module")
def pairs():
    return draw_realization(SMALL, 0).pairs


def _cn(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def test_codebook_sizes(rng):
    cfg = ArrayConfig(n_tx=16)
    one = [channel_from_paths([PathComponent(1.0, a)], cfg) for a in (0.3, 1.1)]
    assert build_codebook(*one, cfg).shape == (16, 2)
    eight = [channel_from_paths([PathComponent(1.0, a) for a in rng.uniform(0, 6, 8)], cfg)
             for _ in range(2)]
    assert build_codebook(*eight, cfg).shape == (16, 16)


def test_shared_single_path_picks_its_beam():
    cfg = ArrayConfig(n_tx=16)
    h1 = channel_from_paths([PathComponent(1.0, 0.7)], cfg)
    h2 = channel_from_paths([PathComponent(0.5, 0.7)], cfg)
    cb = np.column_stack([steering_vector(a, cfg) for a in (0.1, 0.7, 2.0)])
    np.testing.assert_allclose(select_analog_beam(h1, h2, cb), steering_vector(0.7, cfg))


def test_single_candidate(rng):
    f = steering_vector(0.4, ArrayConfig(n_tx=4))
    out = select_analog_beam(_cn(rng, 4), _cn(rng, 4), f[:, None])
    np.testing.assert_array_equal(out, f)


@pytest.mark.parametrize("seed", range(10))
def test_beam_selection_brute_force(seed):
    rng = np.random.default_rng(seed)
    cfg = ArrayConfig(n_tx=8)
    cb = np.column_stack([steering_vector(a, cfg) for a in rng.uniform(0, 2 * math.pi, 4)])
    h1, h2 = _cn(rng, 8), _cn(rng, 8)
    scores = [abs(h1 @ cb[:, k]) + abs(h2 @ cb[:, k]) for k in range(4)]
    np.testing.assert_array_equal(select_analog_beam(h1, h2, cb), cb[:, int(np.argmax(scores))])
    np.testing.assert_allclose(beam_scores(h1, h2, cb), scores)


def test_zf_identity():
    np.testing.assert_allclose(zf_digital(np.eye(3)), np.eye(3), atol=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_zf_matches_gram_solve(seed):
    rng = np.random.default_rng(seed)
    H = _cn(rng, 4, 8)
    V = zf_digital(H)
    # independent route: solve the Gram system column by column
    gram = H @ H.conj().T
    ref = np.column_stack([H.conj().T @ np.linalg.solve(gram, e) for e in np.eye(4)])
    np.testing.assert_allclose(V, ref, atol=1e-12)
    assert np.abs(H @ V - np.eye(4)).max() < 1e-9


def test_zf_row_scale_does_not_trip_condition_guard(rng):
    H = _cn(rng, 3, 6) * np.array([[1e-6], [1.0], [1e3]])
    V = zf_digital(H)
    scale = np.outer(np.linalg.norm(H, axis=1), np.linalg.norm(V, axis=0))
    assert (np.abs(H @ V - np.eye(3)) / scale).max() < 1e-12


def test_zf_singular():
    H = np.array([[1, 1j, 0], [2, 2j, 0]], dtype=complex)
    with pytest.raises(PrecoderSingularError):
        zf_digital(H)


@given(st.integers(0, 10_000), st.integers(1, 4), st.integers(0, 4))
def test_extra_chains_never_lose_strong_gain(seed, n_clusters, extra):
    rng = np.random.default_rng(seed)
    cfg = ArrayConfig(n_tx=24)
    B = np.column_stack([steering_vector(a, cfg) for a in rng.uniform(0, 2 * math.pi, n_clusters + extra)])
    H = _cn(rng, n_clusters, 24)
    try:
        base = build_precoder(H, B[:, :n_clusters])
        more = build_precoder(H, B)
    except PrecoderSingularError:
        return
    g_base = np.abs(np.einsum("ln,nl->l", H, base.beams())) ** 2
    g_more = np.abs(np.einsum("ln,nl->l", H, more.beams())) ** 2
    assert np.all(g_more >= g_base * (1 - 1e-9))
    np.testing.assert_allclose(np.linalg.norm(more.beams(), axis=0), 1.0, atol=1e-12)
    off = ~np.eye(n_clusters, dtype=bool)
    assert np.abs((H @ more.beams())[off]).max(initial=0) < 1e-9 * np.linalg.norm(H, axis=1).max()


def test_precoder_invariants(pairs):
    bf = HybridBeamformer(SMALL.noise_power_w, n_rf=4).fit(pairs)
    B = bf.precoder_.analog
    np.testing.assert_allclose(np.abs(B), 1 / math.sqrt(SMALL.n_tx), rtol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(bf.precoder_.beams(), axis=0), 1.0, atol=1e-12)
    strong = bf.channels_[:, 0, :]
    G = strong @ bf.precoder_.beams()
    off = ~np.eye(4, dtype=bool)
    rel = np.abs(G[off]) / np.repeat(np.linalg.norm(strong, axis=1), 3)
    assert rel.max() < 1e-9


def test_effective_gains_recomputation(pairs):
    bf = HybridBeamformer(SMALL.noise_power_w, n_rf=4).fit(pairs)
    B, V = bf.precoder_.analog, bf.precoder_.digital_cols
    chans = bf.channels_
    L = len(chans)
    alpha = np.zeros((L, 2))
    beta = np.zeros((L, L))
    for l in range(L):
        w = B @ V[:, l]
        for i in range(2):
            alpha[l, i] = abs(np.sum(chans[l, i] * w)) ** 2 / SMALL.noise_power_w
    for l in range(L):
        own = abs(np.sum(chans[l, 1] * (B @ V[:, l]))) ** 2
        for j in range(L):
            if j != l:
                beta[l, j] = abs(np.sum(chans[l, 1] * (B @ V[:, j]))) ** 2 / own
    np.testing.assert_allclose(bf.gains_.alpha, alpha, rtol=1e-10)
    np.testing.assert_allclose(bf.gains_.beta, beta, rtol=1e-9, atol=1e-300)
    assert np.all(bf.gains_.alpha[:, 0] >= bf.gains_.alpha[:, 1])


def test_identical_users_equal_alpha(pairs):
    h = pairs[0][0]
    bf = HybridBeamformer(1.0, n_rf=1).fit([(h, h)])
    a = bf.gains_.alpha[0]
    assert a[0] == pytest.approx(a[1], rel=1e-12)
    np.testing.assert_array_equal(bf.gains_.beta, [[0.0]])


def test_single_cluster_has_no_leakage(pairs):
    g = HybridBeamformer(SMALL.noise_power_w).fit(pairs[:1]).gains_
    assert g.beta.shape == (1, 1) and g.beta[0, 0] == 0.0


def test_ordering_violation_relabels(pairs):
    flipped = [(w, s) for s, w in pairs]
    bf = HybridBeamformer(SMALL.noise_power_w, n_rf=4).fit(flipped)
    assert len(bf.swapped_) > 0
    assert np.all(bf.gains_.alpha[:, 0] >= bf.gains_.alpha[:, 1])
    with pytest.raises(OrderingError) as err:
        precoder = build_precoder(np.array([p[0].vector for p in flipped]), bf.precoder_.analog)
        effective_gains(np.array([[a.vector, b.vector] for a, b in flipped]), precoder,
                        SMALL.noise_power_w)
    assert len(err.value.clusters) > 0


def test_transform_reproduces_fit(pairs):
    bf = HybridBeamformer(SMALL.noise_power_w, n_rf=6)
    g = bf.fit_transform(pairs)
    again = bf.transform(pairs)
    np.testing.assert_allclose(again.alpha, g.alpha)
    np.testing.assert_allclose(again.beta, g.beta)
    assert bf.precoder_.n_rf == 6
    assert "n_rf" in bf.get_params()


def test_n_rf_equal_L_is_base_pipeline(pairs):
    a = HybridBeamformer(SMALL.noise_power_w).fit(pairs)
    b = HybridBeamformer(SMALL.noise_power_w, n_rf=len(pairs)).fit(pairs)
    np.testing.assert_array_equal(a.precoder_.analog, b.precoder_.analog)
    np.testing.assert_allclose(a.gains_.alpha, b.gains_.alpha)


def test_digital_mode_nulls_raw_channels(pairs):
    bf = HybridBeamformer(SMALL.noise_power_w, digital=True).fit(pairs)
    np.testing.assert_array_equal(bf.precoder_.analog, np.eye(SMALL.n_tx))
    W = bf.precoder_.digital_cols
    G = bf.channels_[:, 0, :] @ W
    off = ~np.eye(len(pairs), dtype=bool)
    assert (np.abs(G[off]) / np.abs(np.diag(G)).min()).max() < 1e-9


def test_analog_matrix_round_robin(pairs):
    B = analog_matrix(pairs, SMALL.array, n_rf=7)
    assert B.shape == (SMALL.n_tx, 7)
    with pytest.raises(ConfigError):
        analog_matrix(pairs, SMALL.array, n_rf=3)


def test_effective_gains_validation():
    with pytest.raises(ConfigError):
        EffectiveGains([[1.0, -1.0]], None)
    with pytest.raises(ConfigError):
        EffectiveGains([[1.0, 1.0], [1.0, 1.0]], [[0, -1], [0, 0]])
    g = EffectiveGains([[2.0, 1.0], [1.0, 3.0]], [[5.0, 0.1], [0.2, 7.0]])
    np.testing.assert_array_equal(np.diag(g.beta), 0.0)
    np.testing.assert_array_equal(g.ordering_violations(), [1])
