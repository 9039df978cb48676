"""Iterative mixture-refit planner and the receding-horizon warm start.

One call to :func:`plan` runs the sample / rollout / weight / refit loop for
a fixed number of iterations and returns the optimized mixture together with
per-iteration diagnostics.  Between control steps the mixture is shifted one
step forward and its variances and weights reset (:func:`warm_start_shift`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mixture import GmmParams, gmm_fit_weighted, gmm_log_density, gmm_sample, update_particle_weights
from .rollout import DEFAULT_REWARD_FLOOR, RolloutPlan, ts1_rollout
from .types import Bounds, OptimalityConfig, PlanFailedError, validate_config
from .weighting import apply_transform, mean_rewards


@dataclass(frozen=True)
class PlannerConfig:
    optimality: OptimalityConfig = OptimalityConfig()
    num_components: int = 1
    num_candidates: int = 500
    num_rollouts: int = 20
    num_iterations: int = 5
    horizon: int = 30
    sigma_init: float = 0.25
    variance_floor: float = 1e-12
    reward_floor: float = DEFAULT_REWARD_FLOOR
    deterministic_execution: bool = False

    def __post_init__(self):
        for name in ("num_components", "num_candidates", "num_rollouts", "num_iterations", "horizon"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        validate_config(self.optimality)


@dataclass
class PlanDiagnostics:
    """Per-iteration planner telemetry (cheap to collect, always on)."""

    best_mean_reward: list[float] = field(default_factory=list)
    effective_sample_size: list[float] = field(default_factory=list)
    mixture_weights: list[np.ndarray] = field(default_factory=list)
    degenerate_components: list[np.ndarray] = field(default_factory=list)
    snapshots: list[GmmParams] = field(default_factory=list)


def init_gmm(num_components: int, horizon: int, action_dim: int, sigma_init: float,
             rng: np.random.Generator) -> GmmParams:
    """Fresh mixture: means drawn from N(0, sigma_init), uniform weights."""
    m = num_components
    mu = rng.standard_normal((m, horizon, action_dim)) * np.sqrt(sigma_init)
    var = np.full((m, horizon, action_dim), float(sigma_init))
    return GmmParams(pi=np.full(m, 1.0 / m), mu=mu, var=var)


def warm_start_shift(params: GmmParams, sigma_init: float, bounds: Bounds | None = None) -> GmmParams:
    """Shift every mean one step forward, reset variances and mixture weights.

    The appended action is zero, or the bounds' midpoint when zero is outside
    the bounds.
    """
    m, horizon, action_dim = params.mu.shape
    fill = np.zeros(action_dim)
    if bounds is not None and not bounds.contains(fill):
        fill = bounds.midpoint()
    mu = np.concatenate([params.mu[:, 1:], np.broadcast_to(fill, (m, 1, action_dim))], axis=1)
    var = np.full_like(params.var, float(sigma_init))
    return GmmParams(pi=np.full(m, 1.0 / m), mu=mu, var=var)


def plan(
    s1: np.ndarray,
    params: GmmParams,
    posterior,
    cfg: PlannerConfig,
    rng: np.random.Generator,
    reward_fn,
    bounds: Bounds,
) -> tuple[GmmParams, PlanDiagnostics]:
    """Optimize the action mixture for the current state.

    Each iteration samples candidates from the current mixture, rolls them out
    under the dynamics posterior, converts mean rollout rewards to weights,
    applies the entropy bonus, and refits the mixture with one weighted-EM
    step.  Raises PlanFailedError only when every rollout of every iteration
    went non-finite.
    """
    if params.mu.shape != (cfg.num_components, cfg.horizon, bounds.low.shape[0]):
        raise ValueError(f"mixture shape {params.mu.shape} does not match planner config")
    kappa = cfg.optimality.kappa if cfg.optimality.max_ent else 0.0
    diag = PlanDiagnostics(snapshots=[params])
    any_finite = False

    phi = params
    for _ in range(cfg.num_iterations):
        actions = gmm_sample(phi, cfg.num_candidates, bounds, rng)
        rollout_seed = int(rng.integers(0, 2**63))
        batch = ts1_rollout(
            posterior, s1, actions,
            RolloutPlan(cfg.num_candidates, cfg.num_rollouts, cfg.horizon, rollout_seed),
            reward_fn, cfg.reward_floor,
        )
        if not batch.nonfinite.all():
            any_finite = True
        rewards = mean_rewards(batch)
        w_prime = apply_transform(rewards, cfg.optimality)
        logq = gmm_log_density(phi, actions)
        weights = update_particle_weights(w_prime, logq, kappa)
        phi, degenerate = gmm_fit_weighted(actions, weights, phi, cfg.variance_floor)

        diag.best_mean_reward.append(float(rewards.max()))
        diag.effective_sample_size.append(float(1.0 / np.sum(weights**2)))
        diag.mixture_weights.append(phi.pi.copy())
        diag.degenerate_components.append(degenerate)
        diag.snapshots.append(phi)

    if not any_finite:
        raise PlanFailedError("all rollouts non-finite in every iteration")
    return phi, diag


def execute_action(params: GmmParams, rng: np.random.Generator, bounds: Bounds,
                   deterministic: bool = False) -> np.ndarray:
    """Pick the action sequence to execute from an optimized mixture.

    Default samples a sequence from the full mixture; deterministic mode
    returns the mean of the highest-weight component (for evaluation runs).
    """
    if deterministic:
        return bounds.clip(params.mu[int(np.argmax(params.pi))])
    return gmm_sample(params, 1, bounds, rng)[0]
