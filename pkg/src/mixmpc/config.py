"""Strict YAML experiment configuration.

A config file fully determines an experiment: mode, environment, seeds,
planner / ensemble / episode-loop settings, and evaluation thresholds.
Parsing is strict — unknown keys and missing required fields raise
``ParseError`` naming the offending field — so sweep typos fail loudly
instead of silently running defaults.

The planner section names the optimizer as the triple (``optimality``,
``dist``, ``max_ent``): ``optimality`` selects the reward transform,
``dist`` is ``Gaussian`` or ``GMM(M=n)``, and ``max_ent`` toggles the
entropy bonus.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import yaml

from .dynamics import EnsembleConfig
from .mbrl import MbrlConfig
from .planner import PlannerConfig
from .types import ConfigError, OptimalityConfig

MODES = ("plan_once", "fit_objective", "mbrl", "sweep")
ENVS = ("point_mass", "pendulum")

_DIST_RE = re.compile(r"^GMM\(M=(\d+)\)$")


class ParseError(Exception):
    """Raised on malformed config files; ``field_name`` locates the problem."""

    def __init__(self, message: str, field_name: str = ""):
        super().__init__(message)
        self.field_name = field_name


@dataclass(frozen=True)
class EvaluationThresholds:
    """Pass/fail thresholds for experiment reports (design choices, not physics)."""

    goal_tolerance: float = 0.1
    pi_threshold: float = 0.1
    hausdorff_threshold: float = 0.3
    max_control_steps: int = 60


@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional grid over a dotted config path, e.g. ``planner.kappa``."""

    parameter: str
    values: tuple


@dataclass(frozen=True)
class ExperimentSpec:
    mode: str
    env: str
    seeds: tuple
    planner: PlannerConfig
    ensemble: EnsembleConfig
    mbrl: MbrlConfig
    env_kwargs: dict = field(default_factory=dict)
    evaluation: EvaluationThresholds = EvaluationThresholds()
    sweep: SweepSpec | None = None


def _require(mapping: dict, key: str, section: str):
    if key not in mapping:
        where = f"{section}.{key}" if section else key
        raise ParseError(f"missing required field {where!r}", where)
    return mapping[key]


def _check_known(mapping: dict, known: set, section: str):
    for key in mapping:
        if key not in known:
            where = f"{section}.{key}" if section else key
            raise ParseError(f"unknown field {where!r}", where)


def parse_dist(dist: str) -> int:
    """Component count from a distribution name: ``Gaussian`` or ``GMM(M=n)``."""
    if dist == "Gaussian":
        return 1
    match = _DIST_RE.match(dist)
    if match:
        m = int(match.group(1))
        if m >= 1:
            return m
    raise ParseError(f"dist must be 'Gaussian' or 'GMM(M=n)', got {dist!r}", "planner.dist")


def _parse_planner(raw: dict) -> PlannerConfig:
    known = {"optimality", "dist", "max_ent", "kappa", "lam", "elite_fraction",
             "num_candidates", "num_rollouts", "num_iterations", "horizon",
             "sigma_init", "deterministic_execution"}
    _check_known(raw, known, "planner")
    optimality = OptimalityConfig(
        kind=_require(raw, "optimality", "planner"),
        elite_fraction=float(raw.get("elite_fraction", 0.1)),
        lam=float(raw.get("lam", 0.1)),
        kappa=float(raw.get("kappa", 0.0)),
        max_ent=bool(raw.get("max_ent", False)),
    )
    return PlannerConfig(
        optimality=optimality,
        num_components=parse_dist(str(_require(raw, "dist", "planner"))),
        num_candidates=int(raw.get("num_candidates", 500)),
        num_rollouts=int(raw.get("num_rollouts", 20)),
        num_iterations=int(raw.get("num_iterations", 5)),
        horizon=int(raw.get("horizon", 30)),
        sigma_init=float(raw.get("sigma_init", 0.25)),
        deterministic_execution=bool(raw.get("deterministic_execution", False)),
    )


def _parse_ensemble(raw: dict) -> EnsembleConfig:
    known = {"num_models", "hidden", "learning_rate", "batch_size", "epochs", "weight_decay"}
    _check_known(raw, known, "ensemble")
    defaults = EnsembleConfig()
    return EnsembleConfig(
        num_models=int(raw.get("num_models", defaults.num_models)),
        hidden=tuple(int(h) for h in raw.get("hidden", defaults.hidden)),
        learning_rate=float(raw.get("learning_rate", defaults.learning_rate)),
        batch_size=int(raw.get("batch_size", defaults.batch_size)),
        epochs=int(raw.get("epochs", defaults.epochs)),
        weight_decay=float(raw.get("weight_decay", defaults.weight_decay)),
    )


def _parse_evaluation(raw: dict) -> EvaluationThresholds:
    known = {"goal_tolerance", "pi_threshold", "hausdorff_threshold", "max_control_steps"}
    _check_known(raw, known, "evaluation")
    defaults = EvaluationThresholds()
    return EvaluationThresholds(
        goal_tolerance=float(raw.get("goal_tolerance", defaults.goal_tolerance)),
        pi_threshold=float(raw.get("pi_threshold", defaults.pi_threshold)),
        hausdorff_threshold=float(raw.get("hausdorff_threshold", defaults.hausdorff_threshold)),
        max_control_steps=int(raw.get("max_control_steps", defaults.max_control_steps)),
    )


def _parse_sweep(raw: dict) -> SweepSpec:
    known = {"parameter", "values"}
    _check_known(raw, known, "sweep")
    values = _require(raw, "values", "sweep")
    if not isinstance(values, list) or not values:
        raise ParseError("sweep.values must be a non-empty list", "sweep.values")
    return SweepSpec(parameter=str(_require(raw, "parameter", "sweep")), values=tuple(values))


def parse_config(path: str) -> ExperimentSpec:
    """Load and validate a YAML experiment config; see module docstring."""
    try:
        with open(path) as handle:
            raw = yaml.safe_load(handle)
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ParseError("config root must be a mapping")

    known = {"mode", "env", "seeds", "planner", "ensemble", "mbrl", "env_overrides",
             "evaluation", "sweep"}
    _check_known(raw, known, "")

    mode = str(_require(raw, "mode", ""))
    if mode not in MODES:
        raise ParseError(f"mode must be one of {MODES}, got {mode!r}", "mode")
    env = str(_require(raw, "env", ""))
    if env not in ENVS:
        raise ParseError(f"env must be one of {ENVS}, got {env!r}", "env")

    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) for s in seeds):
        raise ParseError("seeds must be a non-empty list of integers", "seeds")

    for section in ("planner", "ensemble", "mbrl", "env_overrides", "evaluation", "sweep"):
        if section in raw and not isinstance(raw[section], dict):
            raise ParseError(f"{section} must be a mapping", section)

    try:
        planner = _parse_planner(raw.get("planner", {"optimality": "cem", "dist": "Gaussian"}))
        ensemble = _parse_ensemble(raw.get("ensemble", {}))
    except (ConfigError, ValueError) as exc:
        raise ParseError(str(exc), getattr(exc, "field_name", "")) from exc

    mbrl_raw = dict(raw.get("mbrl", {}))
    _check_known(mbrl_raw, {"episodes", "episode_length"}, "mbrl")
    try:
        mbrl = MbrlConfig(
            episodes=int(mbrl_raw.get("episodes", 15)),
            episode_length=int(mbrl_raw.get("episode_length", 100)),
            planner=planner,
            ensemble=ensemble,
        )
    except ValueError as exc:
        raise ParseError(str(exc), "mbrl") from exc

    sweep = _parse_sweep(raw["sweep"]) if "sweep" in raw else None
    if mode == "sweep" and sweep is None:
        raise ParseError("mode 'sweep' requires a sweep section", "sweep")

    return ExperimentSpec(
        mode=mode,
        env=env,
        seeds=tuple(seeds),
        planner=planner,
        ensemble=ensemble,
        mbrl=mbrl,
        env_kwargs=dict(raw.get("env_overrides", {})),
        evaluation=_parse_evaluation(raw.get("evaluation", {})),
        sweep=sweep,
    )


def apply_sweep_value(spec: ExperimentSpec, value) -> ExperimentSpec:
    """Return a copy of ``spec`` with the sweep parameter set to ``value``.

    Supported dotted paths cover the planner and episode-loop sections
    (e.g. ``planner.kappa``, ``planner.num_components``, ``mbrl.episodes``).
    """
    import dataclasses

    if spec.sweep is None:
        raise ParseError("spec has no sweep section", "sweep")
    section, _, name = spec.sweep.parameter.partition(".")
    if section == "planner":
        planner = spec.planner
        if name in ("kind", "elite_fraction", "lam", "kappa", "max_ent", "optimality"):
            opt_name = "kind" if name == "optimality" else name
            opt = dataclasses.replace(planner.optimality, **{opt_name: value})
            planner = dataclasses.replace(planner, optimality=opt)
        elif name == "dist":
            planner = dataclasses.replace(planner, num_components=parse_dist(str(value)))
        else:
            try:
                planner = dataclasses.replace(planner, **{name: value})
            except TypeError as exc:
                raise ParseError(f"unknown sweep parameter {spec.sweep.parameter!r}",
                                 spec.sweep.parameter) from exc
        mbrl = dataclasses.replace(spec.mbrl, planner=planner)
        return dataclasses.replace(spec, planner=planner, mbrl=mbrl)
    if section == "mbrl":
        try:
            mbrl = dataclasses.replace(spec.mbrl, **{name: value})
        except TypeError as exc:
            raise ParseError(f"unknown sweep parameter {spec.sweep.parameter!r}",
                             spec.sweep.parameter) from exc
        return dataclasses.replace(spec, mbrl=mbrl)
    raise ParseError(f"unknown sweep parameter {spec.sweep.parameter!r}", spec.sweep.parameter)
