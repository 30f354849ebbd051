import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noma_ee.channel import (
    ArrayConfig,
    NoiseModel,
    PathComponent,
    channel_from_paths,
    dbm_to_watts,
    generate_channel,
    noise_power,
    path_loss_linear,
    steering_matrix,
    steering_vector,
)
from noma_ee.exceptions import ConfigError


def test_steering_broadside_is_flat():
    a = steering_vector(0.0, ArrayConfig(n_tx=4))
    np.testing.assert_allclose(a, [0.5, 0.5, 0.5, 0.5], atol=1e-15)


def test_steering_endfire_two_elements():
    # sin(pi/2) = 1 and d/lambda = 0.5 give a phase step of pi
    a = steering_vector(math.pi / 2, ArrayConfig(n_tx=2, spacing_over_wavelength=0.5))
    np.testing.assert_allclose(a, [0.7071067811865476, -0.7071067811865476], atol=1e-12)


@given(st.floats(0.0, 2 * math.pi), st.integers(1, 256))
def test_steering_unit_norm_constant_modulus(aod, n_tx):
    a = steering_vector(aod, ArrayConfig(n_tx=n_tx))
    assert abs(np.linalg.norm(a) - 1.0) < 1e-12
    np.testing.assert_allclose(np.abs(a), 1 / math.sqrt(n_tx), rtol=1e-12)


def test_steering_matrix_columns():
    cfg = ArrayConfig(n_tx=8)
    aods = [0.1, 1.3, 2.9]
    A = steering_matrix(aods, cfg)
    assert A.shape == (8, 3)
    for k, th in enumerate(aods):
        np.testing.assert_allclose(A[:, k], steering_vector(th, cfg))


def test_path_loss_values():
    assert path_loss_linear(1.0, 4.3) == 1.0
    assert path_loss_linear(10.0, 4.3) == pytest.approx(5.011872336272725e-05, rel=1e-12)
    assert path_loss_linear(100.0, 4.3) / path_loss_linear(10.0, 4.3) == pytest.approx(10 ** -4.3)


def test_path_loss_clamps_below_reference():
    assert path_loss_linear(0.2, 4.3) == 1.0


def test_path_loss_intercept():
    assert path_loss_linear(10.0, 2.0, intercept_db=10.0) == pytest.approx(1e-3)


def test_noise_power_default_link():
    sigma2 = noise_power(NoiseModel(-174.0, 50e6))
    assert 10 * math.log10(sigma2) + 30 == pytest.approx(-97.01, abs=5e-3)
    assert sigma2 == pytest.approx(1.99e-13, rel=3e-3)


def test_noise_power_linear_in_bandwidth():
    one = noise_power(NoiseModel(-174.0, 1.0))
    assert one == pytest.approx(dbm_to_watts(-174.0))
    assert noise_power(NoiseModel(-174.0, 2e6)) == pytest.approx(2 * noise_power(NoiseModel(-174.0, 1e6)))


def test_single_path_reduction():
    cfg = ArrayConfig(n_tx=16)
    h = channel_from_paths([PathComponent(1.0, 0.0)], cfg, distance_m=10.0,
                           path_loss=path_loss_linear(10.0, 4.3))
    expected = math.sqrt(path_loss_linear(10.0, 4.3)) * math.sqrt(16) * steering_vector(0.0, cfg).conj()
    np.testing.assert_allclose(h.vector, expected, rtol=1e-12)


def test_generate_deterministic():
    cfg = ArrayConfig(n_tx=32)
    a = generate_channel(7, cfg, 8, 50.0)
    b = generate_channel(7, cfg, 8, 50.0)
    np.testing.assert_array_equal(a.vector, b.vector)
    np.testing.assert_array_equal(a.aods, b.aods)


def test_generate_aods_in_range():
    cfg = ArrayConfig(n_tx=8)
    rng = np.random.default_rng(3)
    for _ in range(50):
        h = generate_channel(rng, cfg, 8, 20.0, aod_center=6.2, angular_spread=0.5)
        assert np.all((h.aods >= 0) & (h.aods < 2 * math.pi))


def test_mean_channel_energy():
    # E||h||^2 = N_TX sigma_f before path loss
    cfg = ArrayConfig(n_tx=100)
    rng = np.random.default_rng(2024)
    energy = [generate_channel(rng, cfg, 8, 1.0, sigma_f=1.0).norm ** 2 for _ in range(10_000)]
    assert np.mean(energy) / 100.0 == pytest.approx(1.0, rel=0.03)


@pytest.mark.parametrize("kwargs", [dict(n_paths=0, distance_m=10.0), dict(n_paths=2, distance_m=0.0)])
def test_generate_rejects_bad_input(kwargs):
    with pytest.raises(ConfigError):
        generate_channel(0, ArrayConfig(n_tx=4), **kwargs)


def test_array_config_validation():
    with pytest.raises(ConfigError):
        ArrayConfig(n_tx=0)
    with pytest.raises(ConfigError):
        ArrayConfig(n_tx=4, spacing_over_wavelength=-1.0)
