"""Byzantine-robust, differentially private sign-based federated learning
simulator for residential short-term load forecasting."""

from .analysis import MetricsReport, metrics, theorem1_bound, theorem2_bound, theorem3_bound
from .attacks import AttackConfig
from .data import ClientShard, LoadSeries, Role, Scaler, SupervisedSet, SynthConfig
from .dp import PrivacyBudget, gaussian_sigma, perturb
from .fed import (
    ProtocolConfig,
    RoundRecord,
    Seeds,
    SimulationResult,
    convergence_round,
    run_simulation,
)
from .model import Batch, ModelArch, ParamVector

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "Batch",
    "ClientShard",
    "LoadSeries",
    "MetricsReport",
    "ModelArch",
    "ParamVector",
    "PrivacyBudget",
    "ProtocolConfig",
    "Role",
    "RoundRecord",
    "Scaler",
    "Seeds",
    "SimulationResult",
    "SupervisedSet",
    "SynthConfig",
    "convergence_round",
    "gaussian_sigma",
    "metrics",
    "perturb",
    "run_simulation",
    "theorem1_bound",
    "theorem2_bound",
    "theorem3_bound",
]
