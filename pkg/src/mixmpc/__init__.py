"""Stochastic MPC with Gaussian-mixture action posteriors and ensemble dynamics.

The library plans action sequences by iteratively reweighting sampled
candidates (elite-indicator, exponential, proportional, or rank-based
weighting) and refitting a Gaussian-mixture distribution over them, with an
optional entropy bonus that rewards low-density candidates.  Dynamics come
either from analytic test systems or from an ensemble of probabilistic MLPs
trained inside a model-based RL loop.
"""

__version__ = "0.1.0"

from .types import (
    Bounds,
    ConfigError,
    EmptyBatchError,
    AllZeroWeightsError,
    InsufficientDataError,
    PlanFailedError,
    UnknownKindError,
    OptimalityConfig,
    TrajectoryBatch,
    normalize_weights,
    validate_config,
)
from .mixture import (
    GmmParams,
    entropy_bonus,
    gmm_fit_weighted,
    gmm_log_density,
    gmm_sample,
    update_particle_weights,
)
from .planner import PlannerConfig, init_gmm, plan, warm_start_shift
from .rollout import RolloutPlan, ts1_rollout

__all__ = [
    "Bounds",
    "ConfigError",
    "EmptyBatchError",
    "AllZeroWeightsError",
    "InsufficientDataError",
    "PlanFailedError",
    "UnknownKindError",
    "OptimalityConfig",
    "TrajectoryBatch",
    "normalize_weights",
    "validate_config",
    "GmmParams",
    "entropy_bonus",
    "gmm_fit_weighted",
    "gmm_log_density",
    "gmm_sample",
    "update_particle_weights",
    "PlannerConfig",
    "init_gmm",
    "plan",
    "warm_start_shift",
    "RolloutPlan",
    "ts1_rollout",
]
