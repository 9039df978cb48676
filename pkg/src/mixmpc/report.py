"""Figure rendering for experiment artifacts.

All figures are drawn with the non-interactive Agg backend and written
straight to files next to the CSV artifacts they visualize.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .envs import MultimodalObjective, PointMassTask, multimodal_eval


def render_pointmass_paths(task: PointMassTask, component_paths: list[np.ndarray],
                           executed_path: np.ndarray, out_path: str) -> None:
    """Obstacle map with the executed path and per-component planned paths."""
    fig, ax = plt.subplots(figsize=(6, 5))
    for center, radius in task.obstacles:
        ax.add_patch(plt.Circle(center, radius, color="0.7"))
    for i, path in enumerate(component_paths):
        ax.plot(path[:, 0], path[:, 1], "--", lw=1.5, label=f"component {i}")
    ax.plot(executed_path[:, 0], executed_path[:, 1], "k-", lw=2, label="executed")
    ax.plot(*task.start, "go", ms=10, label="start")
    ax.plot(*task.goal, "r*", ms=14, label="goal")
    ax.set_aspect("equal")
    ax.legend(fontsize=8, loc="upper left")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def render_objective_fit(objective: MultimodalObjective, mean_trace: np.ndarray,
                         out_path: str) -> None:
    """Objective contours with per-iteration component mean trajectories.

    ``mean_trace`` has shape (iterations, components, 2).
    """
    fig, ax = plt.subplots(figsize=(6, 5))
    grid = np.linspace(-2.0, 2.0, 200)
    xx, yy = np.meshgrid(grid, grid)
    zz = multimodal_eval(np.stack([xx, yy], axis=-1), objective)
    ax.contourf(xx, yy, zz, levels=30, cmap="viridis")
    for m in range(mean_trace.shape[1]):
        ax.plot(mean_trace[:, m, 0], mean_trace[:, m, 1], "o-", ms=3, lw=1,
                label=f"component {m}")
    ax.legend(fontsize=8)
    ax.set_xlabel("a1")
    ax.set_ylabel("a2")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def render_learning_curves(curves: dict[int, list[float]], out_path: str) -> None:
    """Per-seed episode reward curves plus their mean."""
    fig, ax = plt.subplots(figsize=(6, 4))
    all_rewards = []
    for seed, rewards in sorted(curves.items()):
        ax.plot(range(1, len(rewards) + 1), rewards, alpha=0.4, label=f"seed {seed}")
        all_rewards.append(rewards)
    if all_rewards:
        mean = np.mean(np.array(all_rewards), axis=0)
        ax.plot(range(1, len(mean) + 1), mean, "k-", lw=2, label="mean")
    ax.set_xlabel("episode")
    ax.set_ylabel("total reward")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def render_sweep(values: list, final_rewards: list[list[float]], parameter: str,
                 out_path: str) -> None:
    """Final-episode reward distribution for each swept parameter value."""
    fig, ax = plt.subplots(figsize=(6, 4))
    positions = range(len(values))
    means = [float(np.mean(r)) for r in final_rewards]
    ax.boxplot(final_rewards, positions=list(positions))
    ax.plot(positions, means, "k.-", label="mean")
    ax.set_xticks(list(positions))
    ax.set_xticklabels([str(v) for v in values])
    ax.set_xlabel(parameter)
    ax.set_ylabel("final-episode reward")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
