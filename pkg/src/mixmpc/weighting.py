"""Reward-to-weight transforms for candidate action sequences.

Each transform maps a length-K vector of per-candidate rewards to an
unnormalized, nonnegative weight vector.  Rewards arrive as the mean over the
P rollouts of each candidate (``mean_rewards``); transforming the mean rather
than averaging the transformed per-rollout values deliberately penalizes
candidates whose rollouts disagree (Jensen's inequality for the convex
exponential transform makes the mean-first estimate a lower bound).

All functions are pure and safe to call from parallel workers.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .types import EmptyBatchError, OptimalityConfig, TrajectoryBatch


def mean_rewards(batch: TrajectoryBatch) -> np.ndarray:
    """Per-candidate arithmetic mean reward over rollouts (the mean-first estimator)."""
    if batch.rewards.size == 0:
        raise EmptyBatchError("batch has no rollouts")
    return batch.rewards.mean(axis=1)


def transformed_mean_rewards(batch: TrajectoryBatch, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Average f over rollouts instead of applying f to the mean.

    The alternate estimator kept for comparison; never used by the planner.
    """
    if batch.rewards.size == 0:
        raise EmptyBatchError("batch has no rollouts")
    return f(batch.rewards).mean(axis=1)


def elite_count(elite_fraction: float, k: int) -> int:
    """Number of elites: max(1, floor(e*K)), so at least one elite exists."""
    return max(1, int(np.floor(elite_fraction * k)))


def _elite_indices(r: np.ndarray, n_elite: int) -> np.ndarray:
    # Stable sort on descending reward: ties resolve to the lowest index.
    order = np.argsort(-r, kind="stable")
    return order[:n_elite]


def transform_cem(r: np.ndarray, elite_fraction: float) -> np.ndarray:
    """Indicator weights on the top elite_fraction of candidates."""
    r = np.asarray(r, dtype=float)
    w = np.zeros(r.shape[0])
    w[_elite_indices(r, elite_count(elite_fraction, r.shape[0]))] = 1.0
    return w


def transform_mppi(r: np.ndarray, lam: float) -> np.ndarray:
    """Exponential weights exp((1/lam) * minmax(r)); a degenerate range maps to all ones.

    Min-max normalizing the rewards before exponentiation keeps the weights in
    [1, e^(1/lam)] regardless of the reward scale.
    """
    r = np.asarray(r, dtype=float)
    lo, hi = r.min(), r.max()
    if hi == lo:
        return np.ones(r.shape[0])
    return np.exp((r - lo) / (hi - lo) / lam)


def transform_prop_cem(r: np.ndarray) -> np.ndarray:
    """Min-max proportional weights in [0, 1]; degenerate range falls back to uniform."""
    r = np.asarray(r, dtype=float)
    lo, hi = r.min(), r.max()
    if hi == lo:
        return np.full(r.shape[0], 1.0 / r.shape[0])
    return (r - lo) / (hi - lo)


def transform_cma_es(r: np.ndarray, elite_fraction: float) -> np.ndarray:
    """Log-rank weights on the elite set: the i-th best elite gets log(1 + (N_e + 1 - i)).

    Any rank-preserving map would do; log of the reverse rank is the simplest
    monotone choice.
    """
    r = np.asarray(r, dtype=float)
    n_elite = elite_count(elite_fraction, r.shape[0])
    idx = _elite_indices(r, n_elite)
    w = np.zeros(r.shape[0])
    # idx[0] is the best candidate (rank i=1).
    w[idx] = np.log(1.0 + (n_elite - np.arange(n_elite)))
    return w


def apply_transform(r: np.ndarray, cfg: OptimalityConfig) -> np.ndarray:
    """Dispatch to the transform selected by cfg.kind."""
    if cfg.kind == "cem":
        return transform_cem(r, cfg.elite_fraction)
    if cfg.kind == "mppi":
        return transform_mppi(r, cfg.lam)
    if cfg.kind == "prop_cem":
        return transform_prop_cem(r)
    if cfg.kind == "cma_es":
        return transform_cma_es(r, cfg.elite_fraction)
    raise ValueError(f"unknown optimality kind {cfg.kind!r}")
