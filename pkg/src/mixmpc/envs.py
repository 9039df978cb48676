"""Desk-scale tasks: point-mass navigation, a two-mode action objective,
pendulum swing-up, and reward-shaping helpers.

Step and reward functions are pure, stateless, and vectorized over a leading
batch axis; the small Env classes on top of them provide the episode
interface used by the model-based RL loop.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .types import Bounds, UnknownKindError

OBSTACLE_PENALTY = 100.0


# ---------------------------------------------------------------------------
# Point-mass navigation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PointMassTask:
    """Navigate from start to goal on the plane around circular obstacles.

    The default layout puts three obstacles between start and goal so that
    near-optimal paths fall into at least two distinct corridors (above and
    below the center obstacle).  It is a surrogate layout; override it from
    the experiment config.
    """

    start: np.ndarray = field(default_factory=lambda: np.zeros(2))
    goal: np.ndarray = field(default_factory=lambda: np.array([1.2, 0.0]))
    obstacles: tuple = (
        (np.array([0.7, 0.0]), 0.15),
        (np.array([0.7, 0.5]), 0.12),
        (np.array([0.7, -0.5]), 0.12),
    )
    max_step: float = 0.05

    def __post_init__(self):
        if self.max_step <= 0:
            raise ValueError("max_step must be positive")
        for _, radius in self.obstacles:
            if radius <= 0:
                raise ValueError("obstacle radii must be positive")


def pointmass_step(s: np.ndarray, a: np.ndarray, max_step: float = 0.05) -> np.ndarray:
    """Apply a displacement action, radially capped at max_step."""
    s = np.asarray(s, dtype=float)
    a = np.asarray(a, dtype=float)
    norm = np.linalg.norm(a, axis=-1, keepdims=True)
    scale = np.where(norm > max_step, max_step / np.maximum(norm, 1e-300), 1.0)
    return s + a * scale


def pointmass_reward(s: np.ndarray, a: np.ndarray, task: PointMassTask) -> np.ndarray:
    """Negative goal distance of the post-step position, minus a smooth obstacle penalty.

    The penalty is a squared hinge on fractional obstacle penetration: zero at
    or outside the boundary, OBSTACLE_PENALTY at the center.
    """
    nxt = pointmass_step(s, a, task.max_step)
    reward = -np.linalg.norm(nxt - task.goal, axis=-1)
    for center, radius in task.obstacles:
        dist = np.linalg.norm(nxt - center, axis=-1)
        reward = reward - OBSTACLE_PENALTY * np.maximum(0.0, 1.0 - dist / radius) ** 2
    return reward


# ---------------------------------------------------------------------------
# Two-mode action-space objective
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MultimodalObjective:
    """Sum of isotropic Gaussian bumps over a 2D action.

    Defaults: modes at (-1, 0) and (+1, 0) with heights 1.0 / 0.9 and width
    0.3.  The concrete shape is a surrogate for the qualitative two-mode
    optimization target; override it from the config.
    """

    modes: tuple = (
        (np.array([-1.0, 0.0]), 1.0, 0.3),
        (np.array([1.0, 0.0]), 0.9, 0.3),
    )

    def __post_init__(self):
        for _, height, width in self.modes:
            if height <= 0 or width <= 0:
                raise ValueError("mode heights and widths must be positive")

    def centers(self) -> np.ndarray:
        return np.stack([c for c, _, _ in self.modes])


def multimodal_eval(a: np.ndarray, obj: MultimodalObjective) -> np.ndarray:
    """Evaluate the objective at a 2-vector or a batch of 2-vectors."""
    a = np.asarray(a, dtype=float)
    value = np.zeros(a.shape[:-1])
    for center, height, width in obj.modes:
        sq = ((a - center) ** 2).sum(axis=-1)
        value = value + height * np.exp(-sq / (2.0 * width**2))
    return value


# ---------------------------------------------------------------------------
# Reward shaping helpers
# ---------------------------------------------------------------------------

def shaping_phi(z: np.ndarray, z_des: float) -> np.ndarray:
    """Height-keeping factor exp(-(z - z_des)^2), in (0, 1]."""
    return np.exp(-((np.asarray(z, dtype=float) - z_des) ** 2))


def shaping_psi(angle: np.ndarray) -> np.ndarray:
    """Posture-keeping factor (1 + cos(2*angle)) / 2, in [0, 1]."""
    return (1.0 + np.cos(2.0 * np.asarray(angle, dtype=float))) / 2.0


# ---------------------------------------------------------------------------
# Pendulum swing-up
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PendulumParams:
    mass: float = 1.0
    length: float = 1.0
    gravity: float = 10.0
    dt: float = 0.05
    max_torque: float = 6.0
    max_speed: float = 8.0


def pendulum_step(s: np.ndarray, a: np.ndarray, params: PendulumParams = PendulumParams()) -> np.ndarray:
    """Semi-implicit Euler step of the torque-driven pendulum.

    State is (cos th, sin th, thdot) with th = 0 upright; dynamics
    thddot = (g/l) sin th + u / (m l^2), torque clipped to the bounds.
    """
    s = np.asarray(s, dtype=float)
    a = np.asarray(a, dtype=float)
    theta = np.arctan2(s[..., 1], s[..., 0])
    thdot = s[..., 2]
    u = np.clip(a[..., 0], -params.max_torque, params.max_torque)
    acc = (params.gravity / params.length) * np.sin(theta) + u / (params.mass * params.length**2)
    thdot = np.clip(thdot + params.dt * acc, -params.max_speed, params.max_speed)
    theta = theta + params.dt * thdot
    return np.stack([np.cos(theta), np.sin(theta), thdot], axis=-1)


def pendulum_reward(s: np.ndarray, a: np.ndarray, params: PendulumParams = PendulumParams()) -> np.ndarray:
    """Quadratic cost on angle from upright, angular speed, and torque."""
    s = np.asarray(s, dtype=float)
    a = np.asarray(a, dtype=float)
    theta = np.arctan2(s[..., 1], s[..., 0])
    u = np.clip(a[..., 0], -params.max_torque, params.max_torque)
    return -(theta**2 + 0.1 * s[..., 2] ** 2 + 0.001 * u**2)


def pendulum_energy(s: np.ndarray, params: PendulumParams = PendulumParams()) -> np.ndarray:
    """Total mechanical energy, with potential m g l cos(th) (zero-torque invariant)."""
    s = np.asarray(s, dtype=float)
    kinetic = 0.5 * params.mass * params.length**2 * s[..., 2] ** 2
    potential = params.mass * params.gravity * params.length * s[..., 0]
    return kinetic + potential


# ---------------------------------------------------------------------------
# Episode interfaces for the MBRL loop
# ---------------------------------------------------------------------------

class PointMassEnv:
    """Episodic wrapper around the point-mass task."""

    def __init__(self, task: PointMassTask | None = None):
        self.task = task or PointMassTask()
        self.state_dim = 2
        self.action_dim = 2
        self.bounds = Bounds.symmetric(self.task.max_step, 2)

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        return np.asarray(self.task.start, dtype=float).copy()

    def step(self, s: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, float]:
        r = float(pointmass_reward(s, a, self.task))
        return pointmass_step(s, a, self.task.max_step), r

    def reward_fn(self, s: np.ndarray, a: np.ndarray) -> np.ndarray:
        return pointmass_reward(s, a, self.task)

    def true_step(self, s: np.ndarray, a: np.ndarray) -> np.ndarray:
        return pointmass_step(s, a, self.task.max_step)


class PendulumEnv:
    """Pendulum swing-up starting near the hanging position."""

    def __init__(self, params: PendulumParams | None = None):
        self.params = params or PendulumParams()
        self.state_dim = 3
        self.action_dim = 1
        self.bounds = Bounds.symmetric(self.params.max_torque, 1)

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        theta = np.pi + rng.uniform(-0.1, 0.1)
        thdot = rng.uniform(-0.05, 0.05)
        return np.array([np.cos(theta), np.sin(theta), thdot])

    def step(self, s: np.ndarray, a: np.ndarray) -> tuple[np.ndarray, float]:
        r = float(pendulum_reward(s, a, self.params))
        return pendulum_step(s, a, self.params), r

    def reward_fn(self, s: np.ndarray, a: np.ndarray) -> np.ndarray:
        return pendulum_reward(s, a, self.params)

    def true_step(self, s: np.ndarray, a: np.ndarray) -> np.ndarray:
        return pendulum_step(s, a, self.params)


def make_env(name: str, **kwargs):
    if name == "point_mass":
        task = kwargs.pop("task", None)
        if kwargs:
            task = PointMassTask(**kwargs)
        return PointMassEnv(task)
    if name == "pendulum":
        params = kwargs.pop("params", None)
        if kwargs:
            params = PendulumParams(**kwargs)
        return PendulumEnv(params)
    raise UnknownKindError(f"unknown environment {name!r}")
