"""Outer model-based RL loop: seed with random actions, then alternate
ensemble training and planned episodes while the dataset grows.

The episode loop is inherently serial (real environment interaction);
independent seeds of a sweep run as separate jobs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dynamics import EnsembleConfig, EnsemblePosterior, TransitionDataset, ensemble_nll, train_ensemble
from .planner import PlannerConfig, execute_action, init_gmm, plan, warm_start_shift
from .types import PlanFailedError

log = logging.getLogger(__name__)

VALIDATION_FRACTION = 0.1


@dataclass(frozen=True)
class MbrlConfig:
    episodes: int = 15
    episode_length: int = 100
    planner: PlannerConfig = PlannerConfig()
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)

    def __post_init__(self):
        if self.episode_length < 1 or self.episodes < 1:
            raise ValueError("episodes and episode_length must be >= 1")


@dataclass
class EpisodeRecord:
    episode: int
    total_reward: float
    dataset_size: int
    plan_ess_mean: float
    validation_nll: float
    plan_failures: int


@dataclass
class MbrlResult:
    records: list[EpisodeRecord]
    posterior: EnsemblePosterior
    dataset: TransitionDataset


def seed_dataset(env, episode_length: int, rng: np.random.Generator) -> TransitionDataset:
    """One episode of uniformly random bounded actions, all transitions recorded."""
    dataset = TransitionDataset(env.state_dim, env.action_dim)
    s = env.reset(rng)
    for _ in range(episode_length):
        a = env.bounds.sample_uniform(1, rng)[0]
        s_next, _ = env.step(s, a)
        dataset.append(s, a, s_next)
        s = s_next
    return dataset


def _train_with_holdout(dataset: TransitionDataset, cfg: EnsembleConfig,
                        seed: int) -> tuple[EnsemblePosterior, float]:
    """Train on a 90% split, report mean one-step NLL on the held-out 10%."""
    n = len(dataset)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xB0)))
    order = rng.permutation(n)
    n_val = max(1, int(VALIDATION_FRACTION * n))
    val_idx, train_idx = order[:n_val], order[n_val:]
    posterior = train_ensemble(dataset.subset(train_idx), cfg, seed)
    s, a, s_next = dataset.subset(val_idx).arrays()
    return posterior, ensemble_nll(posterior, s, a, s_next)


def run_mbrl(env, cfg: MbrlConfig, seed: int) -> MbrlResult:
    """Alternate ensemble training and planned episodes, growing the dataset.

    A failed plan executes a zero action (clipped to bounds) and is counted,
    not fatal.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xA1)))
    dataset = seed_dataset(env, cfg.episode_length, rng)
    pcfg = cfg.planner
    posterior = None
    records: list[EpisodeRecord] = []

    for episode in range(1, cfg.episodes + 1):
        posterior, val_nll = _train_with_holdout(dataset, cfg.ensemble, int(rng.integers(2**31)))
        phi = init_gmm(pcfg.num_components, pcfg.horizon, env.action_dim, pcfg.sigma_init, rng)
        s = env.reset(rng)
        total_reward = 0.0
        ess_values: list[float] = []
        failures = 0
        for _ in range(cfg.episode_length):
            try:
                phi, diag = plan(s, phi, posterior, pcfg, rng, env.reward_fn, env.bounds)
                ess_values.extend(diag.effective_sample_size)
                seq = execute_action(phi, rng, env.bounds, pcfg.deterministic_execution)
                a = seq[0]
            except PlanFailedError:
                failures += 1
                log.warning("plan failed at episode %d; executing zero action", episode)
                a = env.bounds.clip(np.zeros(env.action_dim))
            s_next, r = env.step(s, a)
            dataset.append(s, a, s_next)
            total_reward += r
            s = s_next
            phi = warm_start_shift(phi, pcfg.sigma_init, env.bounds)
        records.append(EpisodeRecord(
            episode=episode,
            total_reward=total_reward,
            dataset_size=len(dataset),
            plan_ess_mean=float(np.mean(ess_values)) if ess_values else float("nan"),
            validation_nll=val_nll,
            plan_failures=failures,
        ))
    return MbrlResult(records=records, posterior=posterior, dataset=dataset)


def cover_ratio(dataset: TransitionDataset, bins: int, lows: np.ndarray, highs: np.ndarray) -> float:
    """Fraction of occupied cells in a joint (s, a) histogram at fixed resolution.

    ``lows`` / ``highs`` bound each of the d_s + d_a dimensions; samples are
    clipped into range before binning.
    """
    s, a, _ = dataset.arrays()
    x = np.concatenate([s, a], axis=1)
    lows = np.asarray(lows, dtype=float)
    highs = np.asarray(highs, dtype=float)
    frac = (np.clip(x, lows, highs) - lows) / (highs - lows)
    cells = np.minimum((frac * bins).astype(int), bins - 1)
    flat = np.ravel_multi_index(cells.T, (bins,) * x.shape[1])
    return np.unique(flat).size / float(bins ** x.shape[1])
