"""Gaussian-mixture action distributions with diagonal covariances.

Holds the variational distribution over T x d_a action sequences: sampling,
stable log-density evaluation, the entropy-bonus particle reweighting, and a
single weighted-EM refit step.  One EM step per planner iteration is
deliberate: the refit sits inside the planner's iteration loop, which supplies
the outer convergence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import Bounds, ConfigError, normalize_weights

VARIANCE_FLOOR = 1e-12
DEGENERATE_COMPONENT_TOL = 1e-12
LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GmmParams:
    """Mixture weights, means, and per-coordinate variances.

    Shapes: pi (M,), mu (M, T, d_a), var (M, T, d_a).  All variances are
    strictly positive (floored); pi lies on the simplex.
    """

    pi: np.ndarray
    mu: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        var = np.asarray(self.var, dtype=float)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "var", var)
        if pi.ndim != 1 or mu.ndim != 3 or var.shape != mu.shape or pi.shape[0] != mu.shape[0]:
            raise ConfigError("gmm", f"inconsistent shapes pi={pi.shape} mu={mu.shape} var={var.shape}")
        if np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-9:
            raise ConfigError("pi", "must be a simplex vector")
        if np.any(var <= 0):
            raise ConfigError("var", "must be strictly positive")

    @property
    def num_components(self) -> int:
        return self.pi.shape[0]

    @property
    def horizon(self) -> int:
        return self.mu.shape[1]

    @property
    def action_dim(self) -> int:
        return self.mu.shape[2]


def gmm_sample(params: GmmParams, n: int, bounds: Bounds, rng: np.random.Generator) -> np.ndarray:
    """Draw n action sequences: component ~ Categorical(pi), then diagonal Gaussian, then clip.

    Returns (n, T, d_a).  With a single component no categorical draw is
    consumed, so the generator stream matches a plain Gaussian sampler.
    """
    m = params.num_components
    if m == 1:
        idx = np.zeros(n, dtype=int)
    else:
        idx = rng.choice(m, size=n, p=params.pi)
    eps = rng.standard_normal((n,) + params.mu.shape[1:])
    samples = params.mu[idx] + np.sqrt(params.var[idx]) * eps
    return bounds.clip(samples)


def _component_log_densities(params: GmmParams, actions: np.ndarray) -> np.ndarray:
    """log N(a_k; mu_m, var_m) for every (k, m); returns (K, M)."""
    a = actions[:, None, :, :]  # (K, 1, T, d)
    diff = a - params.mu[None]  # (K, M, T, d)
    quad = (diff * diff / params.var[None]).sum(axis=(2, 3))
    logdet = np.log(params.var).sum(axis=(1, 2))  # (M,)
    dim = params.horizon * params.action_dim
    return -0.5 * (quad + logdet[None] + dim * LOG_2PI)


def gmm_log_density(params: GmmParams, actions: np.ndarray) -> np.ndarray:
    """log q(a) = log sum_m pi_m N(a; mu_m, var_m), via max-shifted log-sum-exp.

    ``actions`` is (K, T, d_a) or a single (T, d_a) sequence.
    """
    single = actions.ndim == 2
    if single:
        actions = actions[None]
    comp = _component_log_densities(params, actions)  # (K, M)
    with np.errstate(divide="ignore"):
        logpi = np.where(params.pi > 0, np.log(np.maximum(params.pi, 1e-300)), -np.inf)
    scored = comp + logpi[None]
    shift = scored.max(axis=1, keepdims=True)
    out = shift[:, 0] + np.log(np.exp(scored - shift).sum(axis=1))
    return out[0] if single else out


def entropy_bonus(logq: np.ndarray, kappa: float) -> np.ndarray:
    """Per-candidate bonus exp(kappa * nq) with nq the min-max normalized -log q.

    The lowest-density candidate gets e^kappa, the highest-density one gets 1;
    a degenerate density range yields all ones.
    """
    neg = -np.asarray(logq, dtype=float)
    lo, hi = neg.min(), neg.max()
    if hi == lo:
        return np.ones(neg.shape[0])
    return np.exp(kappa * (neg - lo) / (hi - lo))


def update_particle_weights(w_prime: np.ndarray, logq: np.ndarray, kappa: float) -> np.ndarray:
    """Combine transformed reward weights with the entropy bonus and normalize."""
    return normalize_weights(np.asarray(w_prime, dtype=float) * entropy_bonus(logq, kappa))


def gmm_fit_weighted(
    actions: np.ndarray,
    weights: np.ndarray,
    prev: GmmParams,
    variance_floor: float = VARIANCE_FLOOR,
) -> tuple[GmmParams, np.ndarray]:
    """One weighted-EM step refitting the mixture to weighted particles.

    Responsibilities come from ``prev``; each component is then updated with
    the responsibility-and-particle-weight product:

        omega_{m,k} = resp_m(a_k) w_k / N_m,   N_m = sum_k resp_m(a_k) w_k
        mu_m    = sum_k omega_{m,k} a_k
        var_m   = sum_k omega_{m,k} (a_k - mu_m)^2   (elementwise, floored)
        pi_m    = N_m / sum_m N_m

    A component whose N_m underflows keeps its previous parameters and is
    reported in the returned boolean flag vector (M,).
    """
    actions = np.asarray(actions, dtype=float)
    w = np.asarray(weights, dtype=float)
    m = prev.num_components

    if m == 1:
        resp = np.ones((actions.shape[0], 1))
    else:
        comp = _component_log_densities(prev, actions)
        with np.errstate(divide="ignore"):
            logpi = np.where(prev.pi > 0, np.log(np.maximum(prev.pi, 1e-300)), -np.inf)
        scored = comp + logpi[None]
        shift = scored.max(axis=1, keepdims=True)
        unnorm = np.exp(scored - shift)
        resp = unnorm / unnorm.sum(axis=1, keepdims=True)

    rw = resp * w[:, None]  # (K, M)
    n_m = rw.sum(axis=0)  # (M,)
    degenerate = n_m < DEGENERATE_COMPONENT_TOL

    mu = prev.mu.copy()
    var = prev.var.copy()
    flat = actions.reshape(actions.shape[0], -1)
    for j in range(m):
        if degenerate[j]:
            continue
        omega = rw[:, j] / n_m[j]
        mu_j = omega @ flat
        diff = flat - mu_j
        var_j = omega @ (diff * diff)
        mu[j] = mu_j.reshape(prev.mu.shape[1:])
        var[j] = np.maximum(var_j, variance_floor).reshape(prev.var.shape[1:])

    if np.all(degenerate):
        pi = prev.pi.copy()
    else:
        # Degenerate components keep their old mass share before renormalizing.
        masses = np.where(degenerate, prev.pi, n_m)
        pi = masses / masses.sum()
    return GmmParams(pi=pi, mu=mu, var=var), degenerate
