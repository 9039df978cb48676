"""Shared value types, validation, and error classes.

All types are immutable value objects built on plain numpy arrays; they are
safe to share read-only across parallel workers.  Randomness never comes from
module-level state: every stochastic operation in the library takes an
explicit ``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

WEIGHT_SUM_TOL = 1e-9


class MixMpcError(Exception):
    """Base class for library errors."""


class ConfigError(MixMpcError):
    """Invalid configuration; the message names the offending field."""

    def __init__(self, field_name: str, message: str = ""):
        self.field_name = field_name
        super().__init__(f"{field_name}: {message}" if message else field_name)


class EmptyBatchError(MixMpcError):
    """A trajectory batch with zero candidates or zero rollouts."""


class AllZeroWeightsError(MixMpcError):
    """Every candidate weight is zero; normalization is undefined."""


class InsufficientDataError(MixMpcError):
    """Not enough transitions to train a model."""


class PlanFailedError(MixMpcError):
    """Every candidate in every planner iteration produced non-finite rollouts."""


class UnknownKindError(MixMpcError):
    """Unrecognized analytic model or environment name."""


OPTIMALITY_KINDS = ("cem", "mppi", "prop_cem", "cma_es")


@dataclass(frozen=True)
class OptimalityConfig:
    """How raw candidate rewards are turned into unnormalized weights.

    ``kind`` selects the transform: elite indicator ("cem"), normalized
    exponential ("mppi"), min-max proportional ("prop_cem"), or log-rank on
    the elite set ("cma_es").  ``kappa`` weights the entropy bonus and must be
    zero when ``max_ent`` is off.
    """

    kind: str = "cem"
    elite_fraction: float = 0.1
    lam: float = 0.1
    kappa: float = 0.0
    max_ent: bool = False


def validate_config(cfg: OptimalityConfig) -> OptimalityConfig:
    """Check an OptimalityConfig, returning it unchanged or raising ConfigError."""
    if cfg.kind not in OPTIMALITY_KINDS:
        raise ConfigError("kind", f"must be one of {OPTIMALITY_KINDS}, got {cfg.kind!r}")
    if cfg.kind in ("cem", "cma_es") and not (0.0 < cfg.elite_fraction <= 1.0):
        raise ConfigError("elite_fraction", f"must be in (0, 1], got {cfg.elite_fraction}")
    if cfg.kind == "mppi" and not cfg.lam > 0.0:
        raise ConfigError("lambda", f"must be positive, got {cfg.lam}")
    if cfg.kappa < 0.0:
        raise ConfigError("kappa", f"must be nonnegative, got {cfg.kappa}")
    if not cfg.max_ent and cfg.kappa != 0.0:
        raise ConfigError("kappa", "must be 0 when max_ent is false")
    return cfg


@dataclass(frozen=True)
class Bounds:
    """Per-dimension box bounds on actions."""

    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        low = np.asarray(self.low, dtype=float)
        high = np.asarray(self.high, dtype=float)
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)
        if low.shape != high.shape or np.any(low > high):
            raise ConfigError("bounds", "low/high mismatch")

    @classmethod
    def symmetric(cls, magnitude: float, dim: int) -> "Bounds":
        mag = float(magnitude)
        return cls(np.full(dim, -mag), np.full(dim, mag))

    def clip(self, actions: np.ndarray) -> np.ndarray:
        return np.clip(actions, self.low, self.high)

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.low + self.high)

    def contains(self, actions: np.ndarray) -> bool:
        return bool(np.all(actions >= self.low) and np.all(actions <= self.high))

    def sample_uniform(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.low, self.high, size=(n,) + self.low.shape)


@dataclass(frozen=True)
class TrajectoryBatch:
    """Sampled rollouts for K action candidates, P rollouts each.

    ``states`` has shape (K, P, T+1, d_s); ``rewards`` (K, P) holds summed
    per-rollout reward.  ``nonfinite`` marks rollouts whose states exploded
    and whose reward was replaced by the configured floor.
    """

    states: np.ndarray
    rewards: np.ndarray
    nonfinite: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.nonfinite is None:
            object.__setattr__(self, "nonfinite", np.zeros(self.rewards.shape, dtype=bool))

    @property
    def num_candidates(self) -> int:
        return self.rewards.shape[0]

    @property
    def num_rollouts(self) -> int:
        return self.rewards.shape[1]


def normalize_weights(w: np.ndarray) -> np.ndarray:
    """Normalize a nonnegative weight vector to sum to one.

    Raises AllZeroWeightsError on an all-zero input and ConfigError on
    negative entries.
    """
    w = np.asarray(w, dtype=float)
    if np.any(w < 0):
        raise ConfigError("weights", "negative entry")
    total = w.sum()
    if total == 0.0:
        raise AllZeroWeightsError("all candidate weights are zero")
    return w / total
