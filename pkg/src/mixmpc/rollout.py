"""Trajectory sampling under an ensemble dynamics posterior.

For every (candidate k, rollout i, step t) a model index is redrawn uniformly
from the ensemble and the next state is sampled from that model's predictive
Gaussian.  All randomness (model indices and predictive noise) is derived from
the plan seed in a fixed order before/independent of any execution schedule,
so results are bit-reproducible however the K x P rollouts are parallelized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .types import TrajectoryBatch

DEFAULT_REWARD_FLOOR = -1e6


@dataclass(frozen=True)
class RolloutPlan:
    """Shape and seed of one rollout batch."""

    num_candidates: int
    num_rollouts: int
    horizon: int
    seed: int

    def __post_init__(self):
        if self.num_candidates * self.num_rollouts * self.horizon <= 0:
            raise ValueError("num_candidates * num_rollouts * horizon must be positive")


def ts1_rollout(
    posterior,
    s1: np.ndarray,
    actions: np.ndarray,
    plan: RolloutPlan,
    reward_fn: Callable[[np.ndarray, np.ndarray], np.ndarray],
    reward_floor: float = DEFAULT_REWARD_FLOOR,
) -> TrajectoryBatch:
    """Roll K candidates through P stochastic rollouts, resampling the model per step.

    ``posterior`` exposes ``size`` and ``models``; each model maps batched
    (s, a) to a predictive (mean, var) over the next state.  ``reward_fn``
    maps batched (s, a) to per-row step rewards, accumulated over the horizon.
    A rollout that produces a non-finite state or reward is frozen and its
    total reward replaced by ``reward_floor``.
    """
    k, t_len, d_a = actions.shape
    p = plan.num_rollouts
    s1 = np.asarray(s1, dtype=float)
    d_s = s1.shape[-1]
    e = posterior.size

    rng = np.random.default_rng(np.random.SeedSequence(plan.seed))
    if e > 1:
        model_idx = rng.integers(0, e, size=(t_len, k * p))
    else:
        model_idx = np.zeros((t_len, k * p), dtype=int)

    states = np.empty((k, p, t_len + 1, d_s))
    states[:, :, 0] = s1
    rewards = np.zeros((k, p))
    alive = np.ones((k, p), dtype=bool)

    s = np.broadcast_to(s1, (k, p, d_s)).reshape(k * p, d_s).copy()
    for t in range(t_len):
        a = np.broadcast_to(actions[:, None, t, :], (k, p, d_a)).reshape(k * p, d_a)
        with np.errstate(over="ignore", invalid="ignore"):
            r_t = np.asarray(reward_fn(s, a), dtype=float).reshape(k, p)

            mean = np.empty((k * p, d_s))
            var = np.empty((k * p, d_s))
            idx_t = model_idx[t]
            for j, model in enumerate(posterior.models):
                mask = idx_t == j
                if mask.any():
                    mean[mask], var[mask] = model.predict_dist(s[mask], a[mask])

            # Noise is drawn for every rollout every step, dead or alive, so the
            # stream layout never depends on which rollouts have exploded.
            noise = rng.standard_normal((k * p, d_s))
            nxt = mean + np.sqrt(var) * noise

        flat_alive = alive.reshape(k * p)
        bad = ~np.isfinite(nxt).all(axis=1) | ~np.isfinite(r_t).reshape(k * p)
        rewards += np.where(alive & np.isfinite(r_t), r_t, 0.0)
        alive &= ~bad.reshape(k, p)
        s = np.where((flat_alive & ~bad)[:, None], nxt, s)
        s = np.where(np.isfinite(s), s, 0.0)
        states[:, :, t + 1] = s.reshape(k, p, d_s)

    rewards = np.where(alive, rewards, reward_floor)
    return TrajectoryBatch(states=states, rewards=rewards, nonfinite=~alive)
