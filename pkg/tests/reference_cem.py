"""Independently written vanilla CEM planner used as a test oracle.

Deliberately implemented from scratch against the textbook procedure
(sample a diagonal Gaussian, keep the top fraction, refit mean/variance to
the elites) rather than by calling library internals, so that agreement
with the library's single-component planner is evidence of correctness,
not circularity.  The only sharing is the random-number consumption
pattern: one standard-normal block per iteration of shape (K, T, d_a),
then one 63-bit integer for the rollout seed.
"""

from __future__ import annotations

import numpy as np

from mixmpc.dynamics import EnsemblePosterior
from mixmpc.rollout import RolloutPlan, ts1_rollout
from mixmpc.types import Bounds


def vanilla_cem(
    s1: np.ndarray,
    mu0: np.ndarray,
    var0: np.ndarray,
    posterior: EnsemblePosterior,
    num_candidates: int,
    num_rollouts: int,
    num_iterations: int,
    elite_fraction: float,
    rng: np.random.Generator,
    reward_fn,
    bounds: Bounds,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Plain CEM; returns the (mean, variance) after every iteration."""
    t_len, d_a = mu0.shape
    mu = mu0.copy()
    var = var0.copy()
    history = []
    n_elite = max(1, int(np.floor(elite_fraction * num_candidates)))
    for _ in range(num_iterations):
        eps = rng.standard_normal((num_candidates, t_len, d_a))
        candidates = np.clip(mu + np.sqrt(var) * eps, bounds.low, bounds.high)
        seed = int(rng.integers(0, 2**63))
        batch = ts1_rollout(posterior, s1, candidates,
                            RolloutPlan(num_candidates, num_rollouts, t_len, seed), reward_fn)
        scores = batch.rewards.mean(axis=1)
        elite_idx = np.argsort(-scores, kind="stable")[:n_elite]
        elites = candidates[elite_idx]
        mu = elites.mean(axis=0)
        var = np.maximum(elites.var(axis=0), 1e-12)
        history.append((mu.copy(), var.copy()))
    return history
