"""Experiment harness: run config-driven experiments and write artifacts.

Subcommands map onto the config modes::

    mixmpc plan  --config cfg.yaml --out DIR   # receding-horizon control demo
    mixmpc fit   --config cfg.yaml --out DIR   # fit mixture to the 2D objective
    mixmpc mbrl  --config cfg.yaml --out DIR   # full model-based RL loop
    mixmpc sweep --config cfg.yaml --out DIR   # grid over one config parameter

Every run writes ``run_manifest.json`` (resolved config, seeds, library
version — no timestamps), per-seed CSVs with round-trip float formatting
(re-runs are byte-identical), a merged summary CSV, and rendered figures.
Seeds are independent jobs; ``--threads`` runs them in parallel processes.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentSpec, apply_sweep_value, parse_config
from .dynamics import EnsemblePosterior, analytic_model, save_posterior
from .envs import MultimodalObjective, PendulumParams, PointMassTask, make_env
from .mbrl import MbrlConfig, cover_ratio, run_mbrl
from .metrics import distinct_routes, mean_action_path
from .mixture import gmm_sample
from .planner import init_gmm, plan, warm_start_shift
from .objective_fit import distance_to_centers, fit_objective
from .report import (
    render_learning_curves,
    render_objective_fit,
    render_pointmass_paths,
    render_sweep,
)

log = logging.getLogger(__name__)

LEARNING_CURVE_COLUMNS = ("seed", "episode", "total_reward", "dataset_size", "plan_ess_mean")
DIAGNOSTICS_COLUMNS = ("seed", "episode", "validation_nll", "plan_failures")
TRACE_COLUMNS = ("seed", "iteration", "component", "t", "dim", "pi", "mu", "var")
PLAN_SUMMARY_COLUMNS = ("seed", "reached_goal", "distinct_routes", "max_hausdorff", "steps")
FIT_SUMMARY_COLUMNS = ("seed", "component", "pi", "mean_0", "mean_1", "dist_to_nearest_center")


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_manifest(out_dir: Path, spec: ExperimentSpec) -> None:
    manifest = {
        "version": __version__,
        "spec": dataclasses.asdict(spec),
        "seeds": list(spec.seeds),
    }
    with open(out_dir / "run_manifest.json", "w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True, default=_json_default)
        handle.write("\n")


def _json_default(value):
    if isinstance(value, tuple):
        return list(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    raise TypeError(f"not JSON serializable: {type(value)}")


def _build_env(spec: ExperimentSpec):
    kwargs = dict(spec.env_kwargs)
    if spec.env == "point_mass":
        for key in ("start", "goal"):
            if key in kwargs:
                kwargs[key] = np.asarray(kwargs[key], dtype=float)
        if "obstacles" in kwargs:
            kwargs["obstacles"] = tuple(
                (np.asarray(center, dtype=float), float(radius))
                for center, radius in kwargs["obstacles"]
            )
    return make_env(spec.env, **kwargs)


def _true_posterior(spec: ExperimentSpec, env) -> EnsemblePosterior:
    if spec.env == "point_mass":
        model = analytic_model("point_mass", max_step=env.task.max_step)
    else:
        model = analytic_model("pendulum", params=env.params)
    return EnsemblePosterior([model])


def _trace_rows(seed: int, snapshots) -> list:
    rows = []
    for it, phi in enumerate(snapshots):
        m, horizon, d_a = phi.mu.shape
        for comp in range(m):
            for t in range(horizon):
                for dim in range(d_a):
                    rows.append((seed, it, comp, t, dim, phi.pi[comp],
                                 phi.mu[comp, t, dim], phi.var[comp, t, dim]))
    return rows


# ---------------------------------------------------------------------------
# Per-seed jobs (top-level functions so they are picklable for --threads)
# ---------------------------------------------------------------------------

def _plan_job(spec: ExperimentSpec, seed: int) -> dict:
    """Receding-horizon control with ground-truth dynamics, full telemetry."""
    env = _build_env(spec)
    posterior = _true_posterior(spec, env)
    pcfg = spec.planner
    ev = spec.evaluation
    rng = np.random.default_rng(seed)
    phi = init_gmm(pcfg.num_components, pcfg.horizon, env.action_dim, pcfg.sigma_init, rng)
    s = env.reset(rng)

    trace_rows: list = []
    episode_rows: list = []
    best_routes: tuple = ()
    max_hausdorff = 0.0
    multimodal = False
    goal = getattr(getattr(env, "task", None), "goal", None)
    steps = 0
    for step in range(ev.max_control_steps):
        phi, diag = plan(s, phi, posterior, pcfg, rng, env.reward_fn, env.bounds)
        if step == 0:
            trace_rows = _trace_rows(seed, diag.snapshots)
        separated, dist = distinct_routes(phi, env, s, ev.pi_threshold, ev.hausdorff_threshold)
        if dist > max_hausdorff:
            max_hausdorff = dist
            big = [m for m in range(pcfg.num_components) if phi.pi[m] > ev.pi_threshold]
            best_routes = tuple(mean_action_path(env, phi.mu[m], s) for m in big)
        multimodal = multimodal or separated
        if pcfg.deterministic_execution:
            a = env.bounds.clip(phi.mu[int(np.argmax(phi.pi))][0])
        else:
            a = gmm_sample(phi, 1, env.bounds, rng)[0][0]
        s, r = env.step(s, a)
        episode_rows.append((seed, step, *s.tolist(), *a.tolist(), r))
        phi = warm_start_shift(phi, pcfg.sigma_init, env.bounds)
        steps = step + 1
        if goal is not None and np.linalg.norm(s - goal) < ev.goal_tolerance and multimodal:
            break
    reached = bool(goal is not None and np.linalg.norm(s - goal) < ev.goal_tolerance)
    executed = np.array([[row[2 + i] for i in range(env.state_dim)] for row in episode_rows])
    return {
        "seed": seed,
        "trace_rows": trace_rows,
        "episode_rows": episode_rows,
        "summary": (seed, reached, multimodal, max_hausdorff, steps),
        "routes": best_routes,
        "executed": executed,
    }


def _fit_job(spec: ExperimentSpec, seed: int) -> dict:
    objective = MultimodalObjective()
    phi, diag = fit_objective(objective, spec.planner, seed)
    distances = distance_to_centers(phi, objective)
    summary = [(seed, m, phi.pi[m], phi.mu[m, 0, 0], phi.mu[m, 0, 1], distances[m])
               for m in range(spec.planner.num_components)]
    mean_trace = np.stack([snap.mu[:, 0, :] for snap in diag.snapshots])
    return {
        "seed": seed,
        "trace_rows": _trace_rows(seed, diag.snapshots),
        "summary": summary,
        "mean_trace": mean_trace,
        "objective": objective,
    }


def _mbrl_job(spec: ExperimentSpec, seed: int, out_dir: str) -> dict:
    env = _build_env(spec)
    result = run_mbrl(env, spec.mbrl, seed)
    curve_rows = [(seed, r.episode, r.total_reward, r.dataset_size, r.plan_ess_mean)
                  for r in result.records]
    diag_rows = [(seed, r.episode, r.validation_nll, r.plan_failures)
                 for r in result.records]
    save_posterior(result.posterior, Path(out_dir) / f"posterior_seed{seed}.npz")
    lows = np.concatenate([_state_lows(spec, env), env.bounds.low])
    highs = np.concatenate([_state_highs(spec, env), env.bounds.high])
    cr = cover_ratio(result.dataset, bins=10, lows=lows, highs=highs)
    return {
        "seed": seed,
        "curve_rows": curve_rows,
        "diag_rows": diag_rows,
        "rewards": [r.total_reward for r in result.records],
        "cover_ratio": cr,
    }


def _state_lows(spec: ExperimentSpec, env) -> np.ndarray:
    if spec.env == "point_mass":
        return np.array([-0.5, -1.0])
    return np.array([-1.0, -1.0, -env.params.max_speed])


def _state_highs(spec: ExperimentSpec, env) -> np.ndarray:
    if spec.env == "point_mass":
        return np.array([1.7, 1.0])
    return np.array([1.0, 1.0, env.params.max_speed])


# ---------------------------------------------------------------------------
# Mode runners
# ---------------------------------------------------------------------------

def _map_seeds(job, spec: ExperimentSpec, threads: int, *extra) -> tuple[list, list]:
    """Run a per-seed job for every seed; collect results and failures."""
    results, failures = [], []
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = {seed: pool.submit(job, spec, seed, *extra) for seed in spec.seeds}
            for seed, future in futures.items():
                try:
                    results.append(future.result())
                except Exception as exc:  # keep partial artifacts, fail at exit
                    log.error("seed %d failed: %s", seed, exc)
                    failures.append(seed)
    else:
        for seed in spec.seeds:
            try:
                results.append(job(spec, seed, *extra))
            except Exception as exc:
                log.error("seed %d failed: %s", seed, exc)
                failures.append(seed)
    return results, failures


def _run_plan(spec: ExperimentSpec, out_dir: Path, threads: int) -> int:
    results, failures = _map_seeds(_plan_job, spec, threads)
    summary_rows = []
    for res in sorted(results, key=lambda r: r["seed"]):
        seed = res["seed"]
        _write_csv(out_dir / f"plan_trace_seed{seed}.csv", TRACE_COLUMNS, res["trace_rows"])
        n_state = res["executed"].shape[1] if len(res["executed"]) else 0
        n_action = len(res["episode_rows"][0]) - 3 - n_state if res["episode_rows"] else 0
        header = ("seed", "step", *[f"state_{i}" for i in range(n_state)],
                  *[f"action_{i}" for i in range(n_action)], "reward")
        _write_csv(out_dir / f"episode_seed{seed}.csv", header, res["episode_rows"])
        summary_rows.append(res["summary"])
        if spec.env == "point_mass" and len(res["executed"]):
            env = _build_env(spec)
            render_pointmass_paths(env.task, list(res["routes"]), res["executed"],
                                   str(out_dir / f"paths_seed{seed}.png"))
    _write_csv(out_dir / "plan_summary.csv", PLAN_SUMMARY_COLUMNS, summary_rows)
    return 1 if failures else 0


def _run_fit(spec: ExperimentSpec, out_dir: Path, threads: int) -> int:
    results, failures = _map_seeds(_fit_job, spec, threads)
    summary_rows = []
    for res in sorted(results, key=lambda r: r["seed"]):
        seed = res["seed"]
        _write_csv(out_dir / f"fit_trace_seed{seed}.csv", TRACE_COLUMNS, res["trace_rows"])
        summary_rows.extend(res["summary"])
        render_objective_fit(res["objective"], res["mean_trace"],
                             str(out_dir / f"fit_seed{seed}.png"))
    _write_csv(out_dir / "fit_summary.csv", FIT_SUMMARY_COLUMNS, summary_rows)
    return 1 if failures else 0


def _summarize_curves(results: list) -> tuple[list, dict]:
    curves = {res["seed"]: res["rewards"] for res in results}
    episodes = max((len(r) for r in curves.values()), default=0)
    rows = []
    for ep in range(episodes):
        values = np.array([r[ep] for r in curves.values() if len(r) > ep])
        half = 1.96 * values.std(ddof=1) / np.sqrt(len(values)) if len(values) > 1 else 0.0
        rows.append((ep + 1, float(values.mean()), float(half)))
    return rows, curves


def _run_mbrl_mode(spec: ExperimentSpec, out_dir: Path, threads: int) -> int:
    results, failures = _map_seeds(_mbrl_job, spec, threads, str(out_dir))
    for res in sorted(results, key=lambda r: r["seed"]):
        seed = res["seed"]
        _write_csv(out_dir / f"learning_curve_seed{seed}.csv", LEARNING_CURVE_COLUMNS,
                   res["curve_rows"])
        _write_csv(out_dir / f"diagnostics_seed{seed}.csv", DIAGNOSTICS_COLUMNS,
                   res["diag_rows"])
    summary_rows, curves = _summarize_curves(results)
    _write_csv(out_dir / "summary.csv",
               ("episode", "mean_total_reward", "ci95_halfwidth"), summary_rows)
    _write_csv(out_dir / "cover_ratio.csv", ("seed", "cover_ratio"),
               [(res["seed"], res["cover_ratio"]) for res in sorted(results, key=lambda r: r["seed"])])
    if curves:
        render_learning_curves(curves, str(out_dir / "learning_curves.png"))
    return 1 if failures else 0


def _run_sweep(spec: ExperimentSpec, out_dir: Path, threads: int) -> int:
    assert spec.sweep is not None
    status = 0
    all_rows = []
    final_rewards = []
    for value in spec.sweep.values:
        sub_spec = apply_sweep_value(spec, value)
        sub_dir = out_dir / f"value_{value}"
        sub_dir.mkdir(parents=True, exist_ok=True)
        results, failures = _map_seeds(_mbrl_job, sub_spec, threads, str(sub_dir))
        if failures:
            status = 1
        for res in sorted(results, key=lambda r: r["seed"]):
            _write_csv(sub_dir / f"learning_curve_seed{res['seed']}.csv",
                       LEARNING_CURVE_COLUMNS, res["curve_rows"])
            all_rows.append((spec.sweep.parameter, value, res["seed"], res["rewards"][-1]))
        final_rewards.append([res["rewards"][-1] for res in results])
    _write_csv(out_dir / "sweep_summary.csv",
               ("parameter", "value", "seed", "final_episode_reward"), all_rows)
    if final_rewards:
        render_sweep(list(spec.sweep.values), final_rewards, spec.sweep.parameter,
                     str(out_dir / "sweep.png"))
    return status


MODE_RUNNERS = {
    "plan_once": _run_plan,
    "fit_objective": _run_fit,
    "mbrl": _run_mbrl_mode,
    "sweep": _run_sweep,
}

SUBCOMMAND_MODES = {"plan": "plan_once", "fit": "fit_objective", "mbrl": "mbrl", "sweep": "sweep"}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="mixmpc", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("subcommand", choices=sorted(SUBCOMMAND_MODES))
    parser.add_argument("--config", required=True, help="YAML experiment config")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seeds", default=None,
                        help="comma-separated seed list overriding the config")
    parser.add_argument("--threads", type=int, default=1,
                        help="parallel seed jobs (default: serial)")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    spec = parse_config(args.config)
    mode = SUBCOMMAND_MODES[args.subcommand]
    if spec.mode != mode:
        print(f"error: config mode {spec.mode!r} does not match subcommand {args.subcommand!r}",
              file=sys.stderr)
        return 2
    if args.seeds:
        seeds = tuple(int(s) for s in args.seeds.split(","))
        spec = dataclasses.replace(spec, seeds=seeds)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_manifest(out_dir, spec)
    return MODE_RUNNERS[mode](spec, out_dir, max(1, args.threads))


if __name__ == "__main__":
    sys.exit(main())
