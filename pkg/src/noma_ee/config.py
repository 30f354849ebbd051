"""Scenario parameters and their plain-text ``key = value`` file format.

Keys carry their units (``bandwidth_hz``, ``p_bb_w``, ...). Values are
Python literals: numbers, quoted strings, or bracketed lists. ``#`` starts a
comment.
"""

from __future__ import annotations

import ast
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .channel import ArrayConfig, NoiseModel, noise_power
from .exceptions import ConfigError
from .solver import PowerModel


def _default_power_points():
    return [10.0, 14.0, 18.0, 22.0, 26.0, 30.0, 34.0, 38.0, 42.0, 46.0]


def _default_rf_points():
    return [8, 12, 16, 20, 100]


@dataclass
class ScenarioConfig:
    cell_radius_m: float = 300.0
    min_distance_m: float = 1.0
    n_tx: int = 100
    n_rf: int = 8
    n_clusters: int = 8
    paths_per_user: int = 8
    sigma_f: float = 1.0
    pathloss_exponent: float = 4.3
    pathloss_intercept_db: float = 0.0
    spacing_over_wavelength: float = 0.5
    angular_spread_deg: float = 1.0
    bandwidth_hz: float = 50e6
    noise_psd_dbm_per_hz: float = -174.0
    r_min_bps_hz: float = 1.0
    p_bb_w: float = 0.200
    p_rf_w: float = 0.160
    p_ps_w: float = 0.020
    p_pa_w: float = 0.040
    pa_efficiency: float = 0.38
    epsilon_corr: float = 0.8
    total_power_dbm: list = field(default_factory=_default_power_points)
    rf_chains: list = field(default_factory=_default_rf_points)
    rf_sweep_power_dbm: float = 30.0
    users_dropped: int = 64
    max_redraws: int = 10
    trials: int = 500
    seed: int = 0
    oma_precoding: str = "per-slot"
    inner_solver: str = "kkt"

    def __post_init__(self):
        self.validate()

    def validate(self):
        positive = ("cell_radius_m", "min_distance_m", "n_tx", "n_rf", "n_clusters",
                    "paths_per_user", "sigma_f", "pathloss_exponent", "spacing_over_wavelength",
                    "bandwidth_hz", "pa_efficiency", "users_dropped", "trials")
        for name in positive:
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not value > 0 or not math.isfinite(value):
                raise ConfigError(f"{name} must be a positive number, got {value!r}")
        for name in ("n_tx", "n_rf", "n_clusters", "paths_per_user", "users_dropped", "trials",
                     "max_redraws", "seed"):
            if int(getattr(self, name)) != getattr(self, name):
                raise ConfigError(f"{name} must be an integer")
        if self.min_distance_m > self.cell_radius_m:
            raise ConfigError("min_distance_m exceeds cell_radius_m")
        if self.n_clusters > self.n_rf:
            raise ConfigError(f"n_clusters={self.n_clusters} exceeds n_rf={self.n_rf}")
        if self.n_rf > self.n_tx:
            raise ConfigError(f"n_rf={self.n_rf} exceeds n_tx={self.n_tx}")
        if 2 * self.n_clusters > self.users_dropped:
            raise ConfigError("not enough users dropped to form the clusters")
        if not 0 < self.pa_efficiency <= 1:
            raise ConfigError("pa_efficiency must lie in (0, 1]")
        if not 0 <= self.epsilon_corr <= 1:
            raise ConfigError("epsilon_corr must lie in [0, 1]")
        if self.r_min_bps_hz < 0 or self.angular_spread_deg < 0 or self.max_redraws < 0:
            raise ConfigError("r_min_bps_hz, angular_spread_deg and max_redraws must be >= 0")
        for name in ("p_bb_w", "p_rf_w", "p_ps_w", "p_pa_w"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if not isinstance(self.total_power_dbm, list) or not self.total_power_dbm:
            raise ConfigError("total_power_dbm must be a non-empty list")
        if not isinstance(self.rf_chains, list) or not self.rf_chains:
            raise ConfigError("rf_chains must be a non-empty list")
        for n in self.rf_chains:
            if int(n) != n or n < self.n_clusters or n > self.n_tx:
                raise ConfigError(f"rf_chains entry {n!r} must be an integer in "
                                  f"[{self.n_clusters}, {self.n_tx}]")
        if self.oma_precoding not in ("per-slot", "reuse"):
            raise ConfigError(f"oma_precoding must be 'per-slot' or 'reuse', got {self.oma_precoding!r}")
        if self.inner_solver not in ("kkt", "dual"):
            raise ConfigError(f"inner_solver must be 'kkt' or 'dual', got {self.inner_solver!r}")

    # derived objects
    @property
    def array(self) -> ArrayConfig:
        return ArrayConfig(self.n_tx, self.spacing_over_wavelength)

    @property
    def noise_power_w(self) -> float:
        return noise_power(NoiseModel(self.noise_psd_dbm_per_hz, self.bandwidth_hz))

    @property
    def power_model(self) -> PowerModel:
        return PowerModel(self.p_bb_w, self.p_rf_w, self.p_ps_w, self.p_pa_w,
                          1.0 / self.pa_efficiency)

    @property
    def angular_spread_rad(self) -> float:
        return math.radians(self.angular_spread_deg)

    def per_cluster_power_w(self, total_dbm: float) -> float:
        return 10.0 ** ((total_dbm - 30.0) / 10.0) / self.n_clusters

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def _coerce(name, value):
    default = getattr(ScenarioConfig(), name)
    if isinstance(default, bool):
        return bool(value)
    if isinstance(default, int) and isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(default, float) and isinstance(value, int):
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, (list, tuple)):
            value = [value]
        return list(value)
    return value


def parse_config(text: str, source: str = "<string>") -> ScenarioConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, _, rhs = line.partition("=")
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        rhs = rhs.strip()
        try:
            value = ast.literal_eval(rhs)
        except (ValueError, SyntaxError):
            value = rhs  # bare word, e.g. oma_precoding = per-slot
        values[key] = _coerce(key, value)
    try:
        return ScenarioConfig(**values)
    except TypeError as err:
        raise ConfigError(f"{source}: {err}") from err


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config file {str(path)!r}: {err.strerror}") from err
    return parse_config(text, str(path))


def dump_config(config: ScenarioConfig) -> str:
    lines = ["# scenario configuration", ""]
    for f in fields(ScenarioConfig):
        lines.append(f"{f.name} = {getattr(config, f.name)!r}")
    return "\n".join(lines) + "\n"
