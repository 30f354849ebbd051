"""Energy-efficient power allocation for mmWave massive-MIMO NOMA."""

from .channel import (
    ArrayConfig,
    NoiseModel,
    PathComponent,
    UserChannel,
    generate_channel,
    noise_power,
    path_loss_linear,
    steering_vector,
)
from .clustering import Cluster, PairScore, UserPairer, correlation, pair_users
from .config import ScenarioConfig, dump_config, load_config, parse_config
from .exceptions import (
    ConfigError,
    ConvergenceError,
    DegenerateChannelError,
    InfeasibleError,
    NomaError,
    OrderingError,
    PairingInfeasibleError,
    PrecoderSingularError,
)
from .oma import OmaAllocation, OmaEEAllocator, oma_solve
from .precoding import EffectiveGains, HybridBeamformer, HybridPrecoder
from .solver import (
    DualState,
    MaxSEAllocator,
    NomaEEAllocator,
    PowerAllocation,
    PowerModel,
    QoSConstraints,
    SolverDiagnostics,
    dinkelbach,
    energy_efficiency,
    max_se,
    power_consumed,
    rates,
    sic_margin,
)
from .sim import TrialResult, draw_realization, run_trial, sweep_rf_chains, sweep_total_power

__version__ = "0.1.0"

__all__ = [
    "ArrayConfig",
    "Cluster",
    "ConfigError",
    "ConvergenceError",
    "DegenerateChannelError",
    "DualState",
    "EffectiveGains",
    "HybridBeamformer",
    "HybridPrecoder",
    "InfeasibleError",
    "MaxSEAllocator",
    "NoiseModel",
    "NomaEEAllocator",
    "NomaError",
    "OmaAllocation",
    "OmaEEAllocator",
    "OrderingError",
    "PairScore",
    "PairingInfeasibleError",
    "PathComponent",
    "PowerAllocation",
    "PowerModel",
    "PrecoderSingularError",
    "QoSConstraints",
    "ScenarioConfig",
    "SolverDiagnostics",
    "TrialResult",
    "UserChannel",
    "UserPairer",
    "correlation",
    "dinkelbach",
    "draw_realization",
    "dump_config",
    "energy_efficiency",
    "generate_channel",
    "load_config",
    "max_se",
    "noise_power",
    "oma_solve",
    "pair_users",
    "parse_config",
    "path_loss_linear",
    "power_consumed",
    "rates",
    "run_trial",
    "sic_margin",
    "steering_vector",
    "sweep_rf_chains",
    "sweep_total_power",
]
