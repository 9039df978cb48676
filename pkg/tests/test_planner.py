import numpy as np
import pytest
from reference_cem import vanilla_cem

from mixmpc.dynamics import EnsemblePosterior, analytic_model
from mixmpc.envs import PointMassEnv
from mixmpc.mixture import GmmParams
from mixmpc.planner import (
    PlannerConfig,
    execute_action,
    init_gmm,
    plan,
    warm_start_shift,
)
from mixmpc.types import Bounds, OptimalityConfig, PlanFailedError

LINEAR_BOUNDS = Bounds.symmetric(1.0, 2)


def _linear_posterior():
    return EnsemblePosterior([analytic_model("linear_test")])


def _linear_reward(s, a):
    return -np.linalg.norm(s, axis=-1) - 0.01 * np.linalg.norm(a, axis=-1)


class TestPlannerConfig:
    def test_counts_validated(self):
        with pytest.raises(ValueError):
            PlannerConfig(num_candidates=0)

    def test_optimality_validated(self):
        with pytest.raises(Exception):
            PlannerConfig(optimality=OptimalityConfig(kind="bogus"))


class TestInitGmm:
    def test_shapes_and_uniform_weights(self):
        params = init_gmm(3, 5, 2, 0.25, np.random.default_rng(0))
        assert params.mu.shape == (3, 5, 2)
        assert np.allclose(params.pi, 1 / 3)
        assert np.all(params.var == 0.25)

    def test_mean_spread_scales_with_sigma(self):
        rng = np.random.default_rng(0)
        params = init_gmm(100, 10, 2, 0.25, rng)
        assert params.mu.std() == pytest.approx(0.5, rel=0.1)


class TestWarmStartShift:
    def test_shift_appends_zero(self):
        mu = np.arange(6.0).reshape(1, 3, 2)
        params = GmmParams(pi=np.ones(1), mu=mu, var=np.full((1, 3, 2), 0.1))
        out = warm_start_shift(params, 0.5, Bounds.symmetric(10.0, 2))
        assert np.allclose(out.mu[0, :2], mu[0, 1:])
        assert np.allclose(out.mu[0, 2], 0.0)
        assert np.all(out.var == 0.5)

    def test_weights_reset_uniform(self):
        params = GmmParams(pi=np.array([0.9, 0.1]), mu=np.zeros((2, 2, 1)),
                           var=np.ones((2, 2, 1)))
        out = warm_start_shift(params, 1.0)
        assert np.allclose(out.pi, 0.5)

    def test_zero_outside_bounds_uses_midpoint(self):
        params = GmmParams(pi=np.ones(1), mu=np.zeros((1, 2, 1)), var=np.ones((1, 2, 1)))
        bounds = Bounds(np.array([2.0]), np.array([4.0]))
        out = warm_start_shift(params, 1.0, bounds)
        assert out.mu[0, -1, 0] == 3.0


class TestPlan:
    def _config(self, **kwargs):
        defaults = dict(
            optimality=OptimalityConfig("cem", elite_fraction=0.2),
            num_components=1, num_candidates=50, num_rollouts=1,
            num_iterations=2, horizon=4, sigma_init=0.25,
        )
        defaults.update(kwargs)
        return PlannerConfig(**defaults)

    def test_shape_mismatch_rejected(self):
        cfg = self._config()
        params = init_gmm(1, 3, 2, 0.25, np.random.default_rng(0))  # wrong horizon
        with pytest.raises(ValueError):
            plan(np.zeros(2), params, _linear_posterior(), cfg,
                 np.random.default_rng(0), _linear_reward, LINEAR_BOUNDS)

    def test_single_iteration_cem_is_elite_mean(self):
        cfg = self._config(num_iterations=1)
        rng = np.random.default_rng(3)
        params = init_gmm(1, 4, 2, 0.25, rng)
        mirror = np.random.default_rng(3)
        mirror_params = init_gmm(1, 4, 2, 0.25, mirror)
        out, _ = plan(np.ones(2), params, _linear_posterior(), cfg, rng,
                      _linear_reward, LINEAR_BOUNDS)
        [(mu_ref, var_ref)] = vanilla_cem(
            np.ones(2), mirror_params.mu[0], mirror_params.var[0], _linear_posterior(),
            50, 1, 1, 0.2, mirror, _linear_reward, LINEAR_BOUNDS)
        assert np.allclose(out.mu[0], mu_ref, atol=1e-12)
        assert np.allclose(out.var[0], var_ref, atol=1e-12)

    def test_matches_vanilla_cem_across_iterations_and_seeds(self):
        cfg = self._config(num_iterations=3, num_candidates=40)
        for seed in range(10):
            rng = np.random.default_rng(seed)
            params = init_gmm(1, 4, 2, 0.25, rng)
            mirror = np.random.default_rng(seed)
            mirror_params = init_gmm(1, 4, 2, 0.25, mirror)
            _, diag = plan(np.ones(2), params, _linear_posterior(), cfg, rng,
                           _linear_reward, LINEAR_BOUNDS)
            history = vanilla_cem(np.ones(2), mirror_params.mu[0], mirror_params.var[0],
                                  _linear_posterior(), 40, 1, 3, 0.2, mirror,
                                  _linear_reward, LINEAR_BOUNDS)
            for snap, (mu_ref, var_ref) in zip(diag.snapshots[1:], history):
                assert np.max(np.abs(snap.mu[0] - mu_ref)) <= 1e-9
                assert np.max(np.abs(snap.var[0] - var_ref)) <= 1e-9

    def test_diagnostics_counts(self):
        cfg = self._config(num_iterations=4)
        rng = np.random.default_rng(0)
        params = init_gmm(1, 4, 2, 0.25, rng)
        _, diag = plan(np.zeros(2), params, _linear_posterior(), cfg, rng,
                       _linear_reward, LINEAR_BOUNDS)
        assert len(diag.snapshots) == 5  # initial + one per iteration
        assert len(diag.best_mean_reward) == 4
        assert len(diag.effective_sample_size) == 4
        assert diag.snapshots[0] is params

    def test_best_reward_nondecreasing_on_deterministic_task(self):
        cfg = self._config(num_iterations=6, num_candidates=200)
        rng = np.random.default_rng(1)
        params = init_gmm(1, 4, 2, 0.25, rng)
        _, diag = plan(np.ones(2), params, _linear_posterior(), cfg, rng,
                       _linear_reward, LINEAR_BOUNDS)
        best = np.array(diag.best_mean_reward)
        # Monotone up to Monte Carlo sampling noise of the candidate draw.
        assert best[-1] >= best[0]

    def test_plan_failed_when_all_rollouts_explode(self):
        from mixmpc.dynamics import AnalyticModel
        exploding = EnsemblePosterior([AnalyticModel(lambda s, a: s * np.inf, 2, 2)])
        cfg = self._config()
        rng = np.random.default_rng(0)
        params = init_gmm(1, 4, 2, 0.25, rng)
        with pytest.raises(PlanFailedError):
            plan(np.ones(2), params, exploding, cfg, rng, _linear_reward, LINEAR_BOUNDS)

    def test_entropy_bonus_disabled_when_max_ent_off(self):
        # kappa is stored on the optimality config but must be ignored when
        # max_ent is off; enabling it changes the result.
        rng_a = np.random.default_rng(5)
        rng_b = np.random.default_rng(5)
        rng_c = np.random.default_rng(5)
        pa = init_gmm(2, 3, 2, 0.25, rng_a)
        pb = init_gmm(2, 3, 2, 0.25, rng_b)
        pc = init_gmm(2, 3, 2, 0.25, rng_c)
        base = self._config(num_components=2, horizon=3,
                            optimality=OptimalityConfig("mppi", lam=0.5))
        bonus = self._config(num_components=2, horizon=3,
                             optimality=OptimalityConfig("mppi", lam=0.5, kappa=2.0,
                                                         max_ent=True))
        out_a, _ = plan(np.ones(2), pa, _linear_posterior(), base, rng_a,
                        _linear_reward, LINEAR_BOUNDS)
        out_b, _ = plan(np.ones(2), pb, _linear_posterior(), base, rng_b,
                        _linear_reward, LINEAR_BOUNDS)
        out_c, _ = plan(np.ones(2), pc, _linear_posterior(), bonus, rng_c,
                        _linear_reward, LINEAR_BOUNDS)
        assert np.array_equal(out_a.mu, out_b.mu)
        assert not np.array_equal(out_a.mu, out_c.mu)

    def test_multimodal_objective_fit_reaches_both_centers(self):
        from mixmpc.objective_fit import distance_to_centers, fit_objective
        from mixmpc.envs import MultimodalObjective
        cfg = PlannerConfig(
            optimality=OptimalityConfig("mppi", lam=0.25, kappa=3.0, max_ent=True),
            num_components=2, num_candidates=500, num_rollouts=1,
            num_iterations=20, horizon=1, sigma_init=0.3,
        )
        objective = MultimodalObjective()
        hits = 0
        for seed in range(5):
            params, _ = fit_objective(objective, cfg, seed)
            if np.all(distance_to_centers(params, objective) < 0.1):
                hits += 1
        assert hits >= 4


class TestExecuteAction:
    def test_deterministic_returns_top_component_mean(self):
        params = GmmParams(pi=np.array([0.2, 0.8]),
                           mu=np.stack([np.zeros((3, 1)), np.ones((3, 1))]),
                           var=np.full((2, 3, 1), 0.01))
        seq = execute_action(params, np.random.default_rng(0), Bounds.symmetric(2.0, 1),
                             deterministic=True)
        assert np.allclose(seq, 1.0)

    def test_deterministic_clipped_to_bounds(self):
        params = GmmParams(pi=np.ones(1), mu=np.full((1, 2, 1), 5.0),
                           var=np.ones((1, 2, 1)))
        seq = execute_action(params, np.random.default_rng(0), Bounds.symmetric(1.0, 1),
                             deterministic=True)
        assert np.all(seq <= 1.0)

    def test_stochastic_sample_within_bounds(self):
        params = GmmParams(pi=np.ones(1), mu=np.zeros((1, 2, 1)), var=np.ones((1, 2, 1)))
        bounds = Bounds.symmetric(0.3, 1)
        seq = execute_action(params, np.random.default_rng(0), bounds)
        assert bounds.contains(seq)


class TestRecedingHorizonSmoke:
    def test_point_mass_progresses_toward_goal(self):
        env = PointMassEnv()
        posterior = EnsemblePosterior([analytic_model("point_mass")])
        cfg = PlannerConfig(
            optimality=OptimalityConfig("cem", elite_fraction=0.1),
            num_components=1, num_candidates=200, num_rollouts=1,
            num_iterations=3, horizon=10, sigma_init=0.0025,
        )
        rng = np.random.default_rng(0)
        params = init_gmm(1, 10, 2, 0.0025, rng)
        s = env.reset(rng)
        d0 = np.linalg.norm(s - env.task.goal)
        for _ in range(10):
            params, _ = plan(s, params, posterior, cfg, rng, env.reward_fn, env.bounds)
            a = execute_action(params, rng, env.bounds, deterministic=True)[0]
            s, _ = env.step(s, a)
            params = warm_start_shift(params, cfg.sigma_init, env.bounds)
        assert np.linalg.norm(s - env.task.goal) < d0 - 0.3
