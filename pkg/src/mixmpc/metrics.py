"""Geometric evaluation helpers for planned trajectories."""

from __future__ import annotations

import numpy as np

from .mixture import GmmParams


def hausdorff_distance(p: np.ndarray, q: np.ndarray) -> float:
    """Symmetric Hausdorff distance between two point sets (n, d) and (m, d)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    d = np.linalg.norm(p[:, None, :] - q[None, :, :], axis=2)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def mean_action_path(env, mu: np.ndarray, s0: np.ndarray) -> np.ndarray:
    """States visited by executing a mean action sequence under the true dynamics."""
    s = np.asarray(s0, dtype=float).copy()
    path = [s]
    for t in range(mu.shape[0]):
        s = env.true_step(s, env.bounds.clip(mu[t]))
        path.append(s)
    return np.stack(path)


def distinct_routes(params: GmmParams, env, s0: np.ndarray,
                    pi_threshold: float, hausdorff_threshold: float) -> tuple[bool, float]:
    """Whether two above-threshold mixture components trace separated paths.

    Returns (separated?, max pairwise Hausdorff distance over the
    above-threshold components; 0.0 when fewer than two qualify).
    """
    big = [m for m in range(params.pi.shape[0]) if params.pi[m] > pi_threshold]
    paths = [mean_action_path(env, params.mu[m], s0) for m in big]
    best = 0.0
    for i in range(len(big)):
        for j in range(i + 1, len(big)):
            best = max(best, hausdorff_distance(paths[i], paths[j]))
    return best > hausdorff_threshold, best
