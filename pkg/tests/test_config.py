import pytest

from noma_ee.config import ScenarioConfig, dump_config, load_config, parse_config
from noma_ee.exceptions import ConfigError


def test_defaults():
    c = ScenarioConfig()
    assert c.power_model.circuit_power(c.n_rf, c.n_tx) == pytest.approx(21.48)
    assert c.noise_power_w == pytest.approx(1.99e-13, rel=0.01)
    assert c.per_cluster_power_w(30.0) == pytest.approx(1.0 / 8)


def test_round_trip(tmp_path):
    c = ScenarioConfig(n_tx=64, rf_chains=[8, 64], total_power_dbm=[20.0, 30.0], oma_precoding="reuse", seed=7)
    path = tmp_path / "scenario.cfg"
    path.write_text(dump_config(c))
    assert load_config(path) == c


def test_parse_forms():
    c = parse_config("# comment\nn_tx = 64  # inline\nrf_chains = [8, 64]\noma_precoding = reuse\n"
                     "total_power_dbm = 30\nbandwidth_hz = 100000000\n")
    assert c.n_tx == 64 and c.oma_precoding == "reuse"
    assert c.total_power_dbm == [30]
    assert isinstance(c.bandwidth_hz, float)


@pytest.mark.parametrize("text, fragment", [
    ("n_tx 64", "expected"),
    ("bogus = 1", "unknown key"),
    ("n_tx = 64\nn_tx = 32", "duplicate"),
    ("n_tx = -1", "n_tx"),
    ("n_clusters = 9", "n_clusters"),
    ("n_rf = 200", "n_rf"),
    ("pa_efficiency = 1.5", "pa_efficiency"),
    ("rf_chains = [4]", "rf_chains"),
    ("oma_precoding = other", "oma_precoding"),
    ("inner_solver = newton", "inner_solver"),
    ("total_power_dbm = []", "total_power_dbm"),
])
def test_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(text)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="nope.cfg"):
        load_config(tmp_path / "nope.cfg")
