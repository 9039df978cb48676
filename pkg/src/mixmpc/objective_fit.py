"""Fitting the action mixture to a static action-space objective.

The planner is reused unchanged by treating the objective as a one-step
"environment": a dummy scalar state that never changes, and a reward that
depends only on the action.  This exposes the optimizer's mode-seeking /
mode-covering behavior without any dynamics in the way.
"""

from __future__ import annotations

import numpy as np

from .dynamics import AnalyticModel, EnsemblePosterior
from .envs import MultimodalObjective, multimodal_eval
from .mixture import GmmParams
from .planner import PlanDiagnostics, PlannerConfig, init_gmm, plan
from .types import Bounds

ACTION_BOUND = 2.0


def fit_objective(objective: MultimodalObjective, cfg: PlannerConfig,
                  seed: int) -> tuple[GmmParams, PlanDiagnostics]:
    """Optimize a mixture over single 2D actions against the objective.

    ``cfg.horizon`` must be 1; the returned diagnostics carry the
    U + 1 mixture snapshots of the run.
    """
    if cfg.horizon != 1:
        raise ValueError("objective fitting uses horizon 1")
    posterior = EnsemblePosterior([AnalyticModel(lambda s, a: s, 1, 2)])
    bounds = Bounds.symmetric(ACTION_BOUND, 2)
    rng = np.random.default_rng(seed)
    params = init_gmm(cfg.num_components, 1, 2, cfg.sigma_init, rng)

    def reward_fn(s: np.ndarray, a: np.ndarray) -> np.ndarray:
        return multimodal_eval(a, objective)

    return plan(np.zeros(1), params, posterior, cfg, rng, reward_fn, bounds)


def distance_to_centers(params: GmmParams, objective: MultimodalObjective) -> np.ndarray:
    """Per-component Euclidean distance from its mean to the nearest mode center."""
    centers = objective.centers()
    means = params.mu[:, 0, :]
    d = np.linalg.norm(means[:, None, :] - centers[None, :, :], axis=2)
    return d.min(axis=1)
