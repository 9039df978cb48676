"""Dynamics-model posterior: analytic ground-truth models and a trainable
probabilistic MLP ensemble.

Each MLP predicts the mean and log-variance of the *normalized next-state
delta*; the ensemble approximates the model posterior as a set of
independently trained particles.  Networks, loss, gradients, and the Adam
update are implemented directly on numpy arrays so the analytic gradients can
be audited against finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .envs import PendulumParams, pendulum_step, pointmass_step
from .types import InsufficientDataError, UnknownKindError

STD_FLOOR = 1e-8
LOG_2PI = float(np.log(2.0 * np.pi))
CHECKPOINT_VERSION = 1

# Small fixed system for equivalence and oracle tests: s' = A s + B a.
LINEAR_TEST_A = np.array([[0.9, 0.1], [0.0, 0.9]])
LINEAR_TEST_B = np.array([[0.2, 0.0], [0.0, 0.2]])


def _swish(x: np.ndarray) -> np.ndarray:
    sig = 1.0 / (1.0 + np.exp(-x))
    return x * sig


def _swish_grad(x: np.ndarray) -> np.ndarray:
    sig = 1.0 / (1.0 + np.exp(-x))
    return sig + x * sig * (1.0 - sig)


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


# ---------------------------------------------------------------------------
# Dataset and normalization
# ---------------------------------------------------------------------------

@dataclass
class Normalizer:
    """Per-dimension statistics for inputs (s, a) and target deltas (s' - s)."""

    in_mean: np.ndarray
    in_std: np.ndarray
    out_mean: np.ndarray
    out_std: np.ndarray

    @classmethod
    def identity(cls, input_dim: int, output_dim: int) -> "Normalizer":
        return cls(np.zeros(input_dim), np.ones(input_dim), np.zeros(output_dim), np.ones(output_dim))

    @classmethod
    def fit(cls, x: np.ndarray, y: np.ndarray) -> "Normalizer":
        return cls(
            x.mean(axis=0),
            np.maximum(x.std(axis=0), STD_FLOOR),
            y.mean(axis=0),
            np.maximum(y.std(axis=0), STD_FLOOR),
        )

    def normalize_in(self, x: np.ndarray) -> np.ndarray:
        return (x - self.in_mean) / self.in_std

    def normalize_out(self, y: np.ndarray) -> np.ndarray:
        return (y - self.out_mean) / self.out_std

    def denormalize_out(self, y: np.ndarray) -> np.ndarray:
        return y * self.out_std + self.out_mean


class TransitionDataset:
    """Growing store of (s, a, s') transitions."""

    def __init__(self, state_dim: int, action_dim: int):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self._states: list[np.ndarray] = []
        self._actions: list[np.ndarray] = []
        self._next_states: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self._states)

    def append(self, s: np.ndarray, a: np.ndarray, s_next: np.ndarray) -> None:
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(a)) and np.all(np.isfinite(s_next))):
            raise ValueError("transitions must be finite")
        self._states.append(np.asarray(s, dtype=float).copy())
        self._actions.append(np.asarray(a, dtype=float).copy())
        self._next_states.append(np.asarray(s_next, dtype=float).copy())

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            np.asarray(self._states),
            np.asarray(self._actions),
            np.asarray(self._next_states),
        )

    def training_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Inputs (s, a) and target deltas (s' - s)."""
        s, a, s_next = self.arrays()
        return np.concatenate([s, a], axis=1), s_next - s

    def subset(self, indices: np.ndarray) -> "TransitionDataset":
        sub = TransitionDataset(self.state_dim, self.action_dim)
        for i in indices:
            sub._states.append(self._states[i])
            sub._actions.append(self._actions[i])
            sub._next_states.append(self._next_states[i])
        return sub


# ---------------------------------------------------------------------------
# Probabilistic MLP
# ---------------------------------------------------------------------------

@dataclass
class MlpConfig:
    hidden: tuple = (64, 64)
    logvar_min: float = -10.0
    logvar_max: float = 4.0


class MlpModel:
    """Feed-forward net predicting mean and bounded log-variance of the next-state delta."""

    def __init__(self, state_dim: int, action_dim: int, cfg: MlpConfig, normalizer: Normalizer,
                 weights: list[np.ndarray], biases: list[np.ndarray]):
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.cfg = cfg
        self.normalizer = normalizer
        self.weights = weights
        self.biases = biases

    @classmethod
    def init(cls, state_dim: int, action_dim: int, cfg: MlpConfig,
             normalizer: Normalizer, rng: np.random.Generator) -> "MlpModel":
        sizes = [state_dim + action_dim, *cfg.hidden, 2 * state_dim]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in))
            biases.append(np.zeros(fan_out))
        return cls(state_dim, action_dim, cfg, normalizer, weights, biases)

    # -- forward ------------------------------------------------------------

    def _forward(self, x: np.ndarray):
        """Forward pass on normalized inputs; returns (mean, logvar, cache)."""
        pre, post = [], [x]
        h = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            z = h @ w + b
            h = _swish(z)
            pre.append(z)
            post.append(h)
        out = h @ self.weights[-1] + self.biases[-1]
        mean = out[:, : self.state_dim]
        lv_raw = out[:, self.state_dim:]
        # Soft clamp keeps the log-variance inside (logvar_min, logvar_max)
        # while staying differentiable everywhere.
        upper = self.cfg.logvar_max - _softplus(self.cfg.logvar_max - lv_raw)
        logvar = self.cfg.logvar_min + _softplus(upper - self.cfg.logvar_min)
        cache = (pre, post, lv_raw, upper)
        return mean, logvar, cache

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        mean, logvar, _ = self._forward(x)
        return mean, logvar

    def predict_dist(self, s: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Predictive mean and variance of the next state for batched (s, a)."""
        x = self.normalizer.normalize_in(np.concatenate([s, a], axis=-1))
        mean_n, logvar_n = self.forward(x)
        delta = self.normalizer.denormalize_out(mean_n)
        var = np.exp(logvar_n) * self.normalizer.out_std**2
        return s + delta, var

    def predict_next(self, s: np.ndarray, a: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
        """Sample the next state; deterministic (mean) when rng is None."""
        squeeze = s.ndim == 1
        s2 = np.atleast_2d(s)
        a2 = np.atleast_2d(a)
        mean, var = self.predict_dist(s2, a2)
        out = mean if rng is None else mean + np.sqrt(var) * rng.standard_normal(mean.shape)
        return out[0] if squeeze else out

    # -- loss and gradients -------------------------------------------------

    def nll(self, x: np.ndarray, y: np.ndarray) -> float:
        """Mean Gaussian negative log-likelihood of normalized targets y given x."""
        mean, logvar, _ = self._forward(x)
        err = y - mean
        per = 0.5 * (err**2 * np.exp(-logvar) + logvar + LOG_2PI)
        return float(per.sum(axis=1).mean())

    def nll_grad(self, x: np.ndarray, y: np.ndarray):
        """Analytic gradient of nll(); returns (loss, dW list, db list)."""
        n = x.shape[0]
        mean, logvar, cache = self._forward(x)
        pre, post, lv_raw, upper = cache
        err = y - mean
        inv_var = np.exp(-logvar)
        loss = float((0.5 * (err**2 * inv_var + logvar + LOG_2PI)).sum(axis=1).mean())

        d_mean = -err * inv_var / n
        d_logvar = 0.5 * (1.0 - err**2 * inv_var) / n
        # Chain through the two softplus clamps.
        d_upper = d_logvar * _sigmoid(upper - self.cfg.logvar_min)
        d_lv_raw = d_upper * _sigmoid(self.cfg.logvar_max - lv_raw)
        d_out = np.concatenate([d_mean, d_lv_raw], axis=1)

        d_weights = [np.empty(0)] * len(self.weights)
        d_biases = [np.empty(0)] * len(self.biases)
        grad = d_out
        for layer in range(len(self.weights) - 1, -1, -1):
            d_weights[layer] = post[layer].T @ grad
            d_biases[layer] = grad.sum(axis=0)
            if layer > 0:
                grad = (grad @ self.weights[layer].T) * _swish_grad(pre[layer - 1])
        return loss, d_weights, d_biases

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]


class AdamOptimizer:
    """Plain Adam on a list of parameter arrays (updated in place)."""

    def __init__(self, params: list[np.ndarray], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: list[np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


# ---------------------------------------------------------------------------
# Ensemble posterior
# ---------------------------------------------------------------------------

class EnsemblePosterior:
    """Immutable set of dynamics-model particles; read-only during planning."""

    def __init__(self, models: list):
        if not models:
            raise ValueError("posterior needs at least one model")
        self.models = list(models)

    @property
    def size(self) -> int:
        return len(self.models)


@dataclass
class EnsembleConfig:
    num_models: int = 5
    hidden: tuple = (64, 64)
    learning_rate: float = 1e-3
    batch_size: int = 160
    epochs: int = 40
    weight_decay: float = 1e-4
    logvar_min: float = -10.0
    logvar_max: float = 4.0


def train_ensemble(dataset: TransitionDataset, cfg: EnsembleConfig, seed: int) -> EnsemblePosterior:
    """Train num_models networks independently on the dataset.

    Every member sees the full dataset; diversity comes solely from distinct
    weight initializations and independent minibatch shuffling.  Loss is the
    Gaussian NLL of normalized deltas plus L2 weight decay.
    """
    if len(dataset) == 0:
        raise InsufficientDataError("dataset is empty")
    x_raw, y_raw = dataset.training_arrays()
    normalizer = Normalizer.fit(x_raw, y_raw)
    x = normalizer.normalize_in(x_raw)
    y = normalizer.normalize_out(y_raw)
    n = x.shape[0]
    batch = min(cfg.batch_size, n)
    mlp_cfg = MlpConfig(hidden=tuple(cfg.hidden), logvar_min=cfg.logvar_min, logvar_max=cfg.logvar_max)

    root = np.random.SeedSequence(seed)
    models = []
    for child in root.spawn(cfg.num_models):
        rng = np.random.default_rng(child)
        model = MlpModel.init(dataset.state_dim, dataset.action_dim, mlp_cfg, normalizer, rng)
        opt = AdamOptimizer(model.params(), lr=cfg.learning_rate)
        for _ in range(cfg.epochs):
            order = rng.permutation(n)
            for start in range(0, n, batch):
                sel = order[start:start + batch]
                _, dw, db = model.nll_grad(x[sel], y[sel])
                if cfg.weight_decay > 0:
                    dw = [g + cfg.weight_decay * w for g, w in zip(dw, model.weights)]
                opt.step([*dw, *db])
        models.append(model)
    return EnsemblePosterior(models)


def ensemble_nll(posterior: EnsemblePosterior, s: np.ndarray, a: np.ndarray, s_next: np.ndarray) -> float:
    """Mean over members of the one-step Gaussian NLL on held-out transitions."""
    total = 0.0
    for model in posterior.models:
        x = model.normalizer.normalize_in(np.concatenate([s, a], axis=-1))
        y = model.normalizer.normalize_out(s_next - s)
        total += model.nll(x, y)
    return total / posterior.size


# ---------------------------------------------------------------------------
# Analytic ground-truth models
# ---------------------------------------------------------------------------

class AnalyticModel:
    """Deterministic closed-form transition with zero predictive variance."""

    def __init__(self, step_fn: Callable[[np.ndarray, np.ndarray], np.ndarray], state_dim: int, action_dim: int):
        self._step_fn = step_fn
        self.state_dim = state_dim
        self.action_dim = action_dim

    def predict_dist(self, s: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        nxt = self._step_fn(s, a)
        return nxt, np.zeros_like(nxt)

    def predict_next(self, s: np.ndarray, a: np.ndarray, rng=None) -> np.ndarray:
        return self._step_fn(s, a)


def analytic_model(kind: str, **kwargs) -> AnalyticModel:
    if kind == "point_mass":
        max_step = kwargs.get("max_step", 0.05)
        return AnalyticModel(lambda s, a: pointmass_step(s, a, max_step), 2, 2)
    if kind == "pendulum":
        params = kwargs.get("params", PendulumParams())
        return AnalyticModel(lambda s, a: pendulum_step(s, a, params), 3, 1)
    if kind == "linear_test":
        return AnalyticModel(lambda s, a: s @ LINEAR_TEST_A.T + a @ LINEAR_TEST_B.T, 2, 2)
    raise UnknownKindError(f"unknown analytic model {kind!r}")


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_posterior(posterior: EnsemblePosterior, path) -> None:
    """Serialize an MLP ensemble (architecture, normalization, parameters) to .npz."""
    first = posterior.models[0]
    meta = {
        "version": CHECKPOINT_VERSION,
        "num_models": posterior.size,
        "state_dim": first.state_dim,
        "action_dim": first.action_dim,
        "hidden": list(first.cfg.hidden),
        "logvar_min": first.cfg.logvar_min,
        "logvar_max": first.cfg.logvar_max,
    }
    arrays = {"meta": np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)}
    norm = first.normalizer
    arrays.update(
        norm_in_mean=norm.in_mean, norm_in_std=norm.in_std,
        norm_out_mean=norm.out_mean, norm_out_std=norm.out_std,
    )
    for i, model in enumerate(posterior.models):
        for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
            arrays[f"w_{i}_{layer}"] = w
            arrays[f"b_{i}_{layer}"] = b
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_posterior(path) -> EnsemblePosterior:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]).decode())
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        normalizer = Normalizer(
            data["norm_in_mean"], data["norm_in_std"],
            data["norm_out_mean"], data["norm_out_std"],
        )
        cfg = MlpConfig(tuple(meta["hidden"]), meta["logvar_min"], meta["logvar_max"])
        n_layers = len(meta["hidden"]) + 1
        models = []
        for i in range(meta["num_models"]):
            weights = [data[f"w_{i}_{layer}"] for layer in range(n_layers)]
            biases = [data[f"b_{i}_{layer}"] for layer in range(n_layers)]
            models.append(MlpModel(meta["state_dim"], meta["action_dim"], cfg, normalizer, weights, biases))
    return EnsemblePosterior(models)
