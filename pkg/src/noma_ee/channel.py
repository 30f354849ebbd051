"""Geometric mmWave multipath channels on a uniform linear array.

A user's channel is a row vector

    h = sqrt(PL) * sqrt(N_TX / F) * sum_f beta_f * a(theta_f)^H

so that ``h @ a(theta_f)`` picks out the f-th path gain when the array
responses are nearly orthogonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ArrayConfig:
    n_tx: int = 100
    spacing_over_wavelength: float = 0.5

    def __post_init__(self):
        if int(self.n_tx) != self.n_tx or self.n_tx < 1:
            raise ConfigError(f"n_tx must be a positive integer, got {self.n_tx!r}")
        if not self.spacing_over_wavelength > 0:
            raise ConfigError(
                f"spacing_over_wavelength must be > 0, got {self.spacing_over_wavelength!r}"
            )


@dataclass(frozen=True)
class PathComponent:
    gain: complex
    aod: float

    def __post_init__(self):
        if not 0.0 <= self.aod <= TWO_PI:
            raise ConfigError(f"aod must lie in [0, 2*pi], got {self.aod!r}")


@dataclass
class UserChannel:
    """One user's channel vector and the paths it was built from."""

    paths: list[PathComponent]
    vector: np.ndarray
    distance_m: float
    path_loss_linear: float

    def __post_init__(self):
        if len(self.paths) < 1:
            raise ConfigError("a channel needs at least one path")
        self.vector = np.asarray(self.vector, dtype=complex)

    @property
    def aods(self) -> np.ndarray:
        return np.array([p.aod for p in self.paths])

    @property
    def gains(self) -> np.ndarray:
        return np.array([p.gain for p in self.paths], dtype=complex)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


@dataclass(frozen=True)
class NoiseModel:
    psd_dbm_per_hz: float = -174.0
    bandwidth_hz: float = 50e6

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise ConfigError(f"bandwidth_hz must be > 0, got {self.bandwidth_hz!r}")

    @property
    def power_w(self) -> float:
        return noise_power(self)


def steering_vector(aod: float, config: ArrayConfig) -> np.ndarray:
    """ULA response ``a(aod)`` with unit Euclidean norm."""
    k = np.arange(config.n_tx)
    phase = TWO_PI * config.spacing_over_wavelength * k * math.sin(aod)
    return np.exp(1j * phase) / math.sqrt(config.n_tx)


def steering_matrix(aods, config: ArrayConfig) -> np.ndarray:
    """Stack of steering vectors, one column per angle (shape ``n_tx x K``)."""
    aods = np.atleast_1d(np.asarray(aods, dtype=float))
    k = np.arange(config.n_tx)[:, None]
    phase = TWO_PI * config.spacing_over_wavelength * k * np.sin(aods)[None, :]
    return np.exp(1j * phase) / math.sqrt(config.n_tx)


def path_loss_linear(distance_m: float, exponent: float, intercept_db: float = 0.0) -> float:
    """Power attenuation ``10^(-intercept/10) * d^(-exponent)`` with a 1 m reference.

    Distances below the reference are clamped to 1 m, so the result never
    exceeds the intercept gain.
    """
    d = max(float(distance_m), 1.0)
    return 10.0 ** (-intercept_db / 10.0) * d ** (-float(exponent))


def noise_power(model: NoiseModel) -> float:
    """Thermal noise power in watts over the model bandwidth."""
    return 10.0 ** ((model.psd_dbm_per_hz - 30.0) / 10.0) * model.bandwidth_hz


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def assemble_vector(gains, aods, config: ArrayConfig, path_loss: float = 1.0) -> np.ndarray:
    gains = np.asarray(gains, dtype=complex)
    n_paths = gains.size
    a = steering_matrix(aods, config)
    h = math.sqrt(config.n_tx / n_paths) * (a.conj() @ gains)
    return math.sqrt(path_loss) * h


def generate_channel(
    rng_seed,
    config: ArrayConfig,
    n_paths: int,
    distance_m: float,
    sigma_f: float = 1.0,
    pathloss_exponent: float = 4.3,
    *,
    intercept_db: float = 0.0,
    aod_center: float | None = None,
    angular_spread: float | None = None,
) -> UserChannel:
    """Draw one user's multipath channel.

    Path gains are circularly-symmetric complex Gaussian with total variance
    ``sigma_f``. With ``angular_spread`` unset the AoDs are i.i.d. uniform on
    [0, 2*pi]; otherwise they are Gaussian around ``aod_center`` with the
    given standard deviation (radians), wrapped into [0, 2*pi).

    ``rng_seed`` may be anything ``numpy.random.default_rng`` accepts,
    including an existing Generator.
    """
    if int(n_paths) != n_paths or n_paths < 1:
        raise ConfigError(f"path count must be a positive integer, got {n_paths!r}")
    if not distance_m > 0:
        raise ConfigError(f"distance_m must be > 0, got {distance_m!r}")
    if not sigma_f > 0:
        raise ConfigError(f"sigma_f must be > 0, got {sigma_f!r}")
    rng = np.random.default_rng(rng_seed)
    n_paths = int(n_paths)

    scale = math.sqrt(sigma_f / 2.0)
    gains = scale * (rng.standard_normal(n_paths) + 1j * rng.standard_normal(n_paths))
    if angular_spread is None:
        aods = rng.uniform(0.0, TWO_PI, n_paths)
    else:
        center = rng.uniform(0.0, TWO_PI) if aod_center is None else float(aod_center)
        aods = np.mod(center + angular_spread * rng.standard_normal(n_paths), TWO_PI)

    pl = path_loss_linear(distance_m, pathloss_exponent, intercept_db)
    paths = [PathComponent(complex(g), float(t)) for g, t in zip(gains, aods)]
    vector = assemble_vector(gains, aods, config, pl)
    return UserChannel(paths=paths, vector=vector, distance_m=float(distance_m), path_loss_linear=pl)


def channel_from_paths(paths, config: ArrayConfig, distance_m: float = 1.0,
                       path_loss: float = 1.0) -> UserChannel:
    """Build a channel from explicit path components (used for hand-made cases)."""
    paths = [p if isinstance(p, PathComponent) else PathComponent(*p) for p in paths]
    gains = [p.gain for p in paths]
    aods = [p.aod for p in paths]
    return UserChannel(
        paths=paths,
        vector=assemble_vector(gains, aods, config, path_loss),
        distance_m=float(distance_m),
        path_loss_linear=float(path_loss),
    )
