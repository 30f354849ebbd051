import math

import numpy as np
import pytest

from noma_ee import oracle
from noma_ee.config import ScenarioConfig
from noma_ee.exceptions import ConfigError, InfeasibleError
from noma_ee.oma import OmaEEAllocator, oma_gains, oma_power_consumed, oma_rates, oma_solve
from noma_ee.precoding import EffectiveGains, HybridBeamformer
from noma_ee.sim import draw_realization
from noma_ee.solver import PowerModel, QoSConstraints


def test_half_slot_rates():
    gains = EffectiveGains([[100.0, 10.0]], None)
    r = oma_rates([[0.3, 0.7]], gains)
    np.testing.assert_allclose(r, [[0.5 * math.log2(31.0), 0.5 * math.log2(8.0)]])


def test_half_slot_power_accounting():
    model = PowerModel()
    assert oma_power_consumed([[1.0, 1.0]], model, 8, 100) == pytest.approx(model.xi + 21.48)


def test_zero_price_uses_full_slot_power():
    gains = EffectiveGains([[100.0, 10.0], [50.0, 20.0]], None)
    alloc = oma_solve(gains, QoSConstraints(1.0, 1.0), n_rf=8, n_tx=100, lam=0.0)
    np.testing.assert_allclose(alloc.p, 1.0)


def test_infeasible_half_slot():
    gains = EffectiveGains([[100.0, 1.0]], None)
    with pytest.raises(InfeasibleError):
        oma_solve(gains, QoSConstraints(1.0, 1.0), n_rf=8, n_tx=100)


@pytest.mark.parametrize("seed", range(10))
def test_matches_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    a1 = 10 ** rng.uniform(2, 4)
    a2 = a1 * 10 ** rng.uniform(-1.5, -0.2)
    qos = QoSConstraints(1.0, float(10 ** rng.uniform(-1, 0)))
    model = PowerModel(p_bb=float(10 ** rng.uniform(-1, 1)), p_rf=0, p_ps=0, p_pa=0)
    gains = EffectiveGains([[a1, a2]], None)
    try:
        alloc = oma_solve(gains, qos, model, n_rf=0, n_tx=0)
    except InfeasibleError:
        return
    _, _, ref = oracle.grid_search_oma_cluster((a1, a2), qos, model.xi, model.p_bb)
    assert alloc.ee_ratio >= ref * (1 - 1e-6)
    assert alloc.ee_ratio <= ref * (1 + 1e-3)


def test_reuse_mode_sees_weak_leakage():
    cfg = ScenarioConfig(n_tx=32, n_rf=4, n_clusters=4, users_dropped=32, rf_chains=[4, 8],
                         trials=4)
    pairs = draw_realization(cfg, 0).pairs
    bf = HybridBeamformer(cfg.noise_power_w, n_rf=4).fit(pairs)
    per_slot = oma_gains(bf.channels_, bf.precoder_.analog, cfg.noise_power_w)
    reuse = oma_gains(bf.channels_, bf.precoder_.analog, cfg.noise_power_w, mode="reuse")
    np.testing.assert_array_equal(per_slot.beta, 0.0)
    assert reuse.beta.max() > 0
    np.testing.assert_allclose(per_slot.alpha[:, 0], reuse.alpha[:, 0], rtol=1e-9)
    with pytest.raises(ConfigError):
        oma_gains(bf.channels_, bf.precoder_.analog, cfg.noise_power_w, mode="bogus")


def test_estimator():
    gains = EffectiveGains([[100.0, 10.0], [50.0, 20.0]], None)
    est = OmaEEAllocator(n_rf=8, n_tx=100, bandwidth_hz=1.0).fit(gains)
    assert est.score() == pytest.approx(est.allocation_.ee_ratio)
    se = OmaEEAllocator(n_rf=8, n_tx=100, bandwidth_hz=1.0, max_se=True).fit(gains)
    assert se.se_ >= est.se_
    assert "max_se" in est.get_params()
