import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixmpc.mixture import (
    GmmParams,
    entropy_bonus,
    gmm_fit_weighted,
    gmm_log_density,
    gmm_sample,
    update_particle_weights,
)
from mixmpc.types import Bounds, ConfigError

WIDE = Bounds.symmetric(1e9, 1)


def _gmm(pi, mu, var):
    return GmmParams(pi=np.asarray(pi, float), mu=np.asarray(mu, float),
                     var=np.asarray(var, float))


def _scalar_gmm(pi, means, variances):
    """Mixture over 1-step, 1-dim action sequences from plain scalars."""
    m = len(pi)
    return _gmm(pi, np.reshape(means, (m, 1, 1)), np.reshape(variances, (m, 1, 1)))


class TestGmmParamsValidation:
    def test_simplex_enforced(self):
        with pytest.raises(ConfigError):
            _scalar_gmm([0.5, 0.6], [0.0, 1.0], [1.0, 1.0])

    def test_negative_weight_rejected(self):
        with pytest.raises(ConfigError):
            _scalar_gmm([-0.2, 1.2], [0.0, 1.0], [1.0, 1.0])

    def test_nonpositive_variance_rejected(self):
        with pytest.raises(ConfigError):
            _scalar_gmm([1.0], [0.0], [0.0])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            _gmm([1.0], np.zeros((2, 1, 1)), np.ones((2, 1, 1)))


class TestGmmSample:
    def test_floor_variance_concentrates_at_mean(self):
        params = _scalar_gmm([1.0], [0.7], [1e-12])
        samples = gmm_sample(params, 3, WIDE, np.random.default_rng(0))
        assert np.all(np.abs(samples - 0.7) < 1e-4)

    def test_zero_probability_component_never_sampled(self):
        params = _scalar_gmm([1.0, 0.0], [0.0, 100.0], [1.0, 1.0])
        samples = gmm_sample(params, 5000, WIDE, np.random.default_rng(1))
        assert np.all(samples < 50.0)

    def test_component_frequencies_match_weights(self):
        params = _scalar_gmm([0.5, 0.5], [-100.0, 100.0], [1.0, 1.0])
        samples = gmm_sample(params, 10000, WIDE, np.random.default_rng(2))
        frac_right = np.mean(samples[:, 0, 0] > 0)
        assert abs(frac_right - 0.5) < 0.02

    def test_samples_respect_bounds(self):
        params = _scalar_gmm([1.0], [0.0], [4.0])
        bounds = Bounds.symmetric(0.5, 1)
        samples = gmm_sample(params, 1000, bounds, np.random.default_rng(3))
        assert bounds.contains(samples)

    def test_single_component_stream_matches_plain_gaussian(self):
        # With M=1 no categorical draw is consumed, so the same generator
        # state yields exactly mu + sqrt(var) * standard_normal.
        params = _gmm([1.0], np.full((1, 4, 2), 0.3), np.full((1, 4, 2), 0.25))
        got = gmm_sample(params, 6, Bounds.symmetric(100.0, 2), np.random.default_rng(7))
        eps = np.random.default_rng(7).standard_normal((6, 4, 2))
        assert np.array_equal(got, 0.3 + 0.5 * eps)


class TestGmmLogDensity:
    def test_gaussian_at_its_mean(self):
        t_len, d = 3, 2
        params = _gmm([1.0], np.zeros((1, t_len, d)), np.ones((1, t_len, d)))
        dim = t_len * d
        expected = -0.5 * dim * np.log(2.0 * np.pi)
        assert gmm_log_density(params, np.zeros((t_len, d))) == pytest.approx(expected)

    def test_duplicate_components_collapse(self):
        mu = np.random.default_rng(0).standard_normal((1, 2, 2))
        single = _gmm([1.0], mu, np.ones((1, 2, 2)))
        double = _gmm([0.5, 0.5], np.concatenate([mu, mu]), np.ones((2, 2, 2)))
        a = np.random.default_rng(1).standard_normal((5, 2, 2))
        assert np.allclose(gmm_log_density(single, a), gmm_log_density(double, a))

    def test_matches_brute_force_mixture_density(self):
        rng = np.random.default_rng(4)
        pi = np.array([0.2, 0.5, 0.3])
        mu = rng.standard_normal((3, 2, 2))
        var = rng.uniform(0.5, 2.0, (3, 2, 2))
        params = _gmm(pi, mu, var)
        a = rng.standard_normal((10, 2, 2))
        brute = np.zeros(10)
        for m in range(3):
            dens = np.ones(10)
            for t in range(2):
                for d in range(2):
                    z = (a[:, t, d] - mu[m, t, d]) ** 2 / var[m, t, d]
                    dens *= np.exp(-0.5 * z) / np.sqrt(2.0 * np.pi * var[m, t, d])
            brute += pi[m] * dens
        assert np.allclose(gmm_log_density(params, a), np.log(brute))

    def test_extreme_offsets_stay_finite(self):
        params = _scalar_gmm([0.5, 0.5], [0.0, 1.0], [1e-10, 1e-10])
        logq = gmm_log_density(params, np.full((3, 1, 1), 500.0))
        assert np.all(np.isfinite(logq))


class TestEntropyBonus:
    def test_range_endpoints(self):
        logq = np.array([-1.0, -5.0, -3.0])
        bonus = entropy_bonus(logq, kappa=0.5)
        assert bonus[0] == pytest.approx(1.0)  # highest density
        assert bonus[1] == pytest.approx(np.exp(0.5))  # lowest density
        assert np.all((bonus >= 1.0) & (bonus <= np.exp(0.5)))

    def test_degenerate_range_gives_ones(self):
        assert np.array_equal(entropy_bonus(np.full(4, -2.0), 0.7), np.ones(4))

    def test_zero_kappa_gives_ones(self):
        assert np.array_equal(entropy_bonus(np.array([-1.0, -9.0]), 0.0), np.ones(2))


class TestUpdateParticleWeights:
    def test_zero_kappa_reduces_to_normalization(self):
        w = update_particle_weights(np.array([1.0, 3.0]), np.array([-1.0, -2.0]), 0.0)
        assert np.allclose(w, [0.25, 0.75])

    def test_bonus_favors_low_density(self):
        w = update_particle_weights(np.ones(2), np.array([-1.0, -2.0]), 0.5)
        expected = np.array([1.0, np.exp(0.5)])
        assert np.allclose(w, expected / expected.sum())

    def test_equal_densities_match_zero_kappa(self):
        w_prime = np.array([2.0, 5.0, 3.0])
        logq = np.full(3, -1.3)
        assert np.allclose(update_particle_weights(w_prime, logq, 0.5),
                           update_particle_weights(w_prime, logq, 0.0))

    def test_scale_invariant_at_zero_kappa(self):
        w_prime = np.array([0.1, 0.4, 0.5])
        logq = np.array([-1.0, -2.0, -3.0])
        a = update_particle_weights(w_prime, logq, 0.0)
        b = update_particle_weights(1000.0 * w_prime, logq, 0.0)
        assert np.allclose(a, b)


def _brute_force_refit(actions, weights, prev):
    """Independent transcription of the weighted-EM update equations.

    Deliberately scalar-looped and separate from the library implementation
    so the two can only agree by computing the same thing.
    """
    k = actions.shape[0]
    m = prev.num_components
    flat = actions.reshape(k, -1)
    dim = flat.shape[1]

    # Responsibilities under the previous mixture.
    resp = np.zeros((k, m))
    for i in range(k):
        for j in range(m):
            dens = 1.0
            for d in range(dim):
                mu = prev.mu.reshape(m, dim)[j, d]
                var = prev.var.reshape(m, dim)[j, d]
                dens *= np.exp(-0.5 * (flat[i, d] - mu) ** 2 / var) / np.sqrt(2 * np.pi * var)
            resp[i, j] = prev.pi[j] * dens
        resp[i] /= resp[i].sum()

    n_m = np.array([sum(resp[i, j] * weights[i] for i in range(k)) for j in range(m)])
    mu_out = np.zeros((m, dim))
    var_out = np.zeros((m, dim))
    for j in range(m):
        omega = np.array([resp[i, j] * weights[i] / n_m[j] for i in range(k)])
        for d in range(dim):
            mu_out[j, d] = sum(omega[i] * flat[i, d] for i in range(k))
            var_out[j, d] = sum(omega[i] * (flat[i, d] - mu_out[j, d]) ** 2 for i in range(k))
    pi_out = n_m / n_m.sum()
    return pi_out, mu_out.reshape(prev.mu.shape), np.maximum(var_out, 1e-12).reshape(prev.var.shape)


class TestGmmFitWeighted:
    def test_single_component_moment_matching(self):
        actions = np.array([0.0, 1.0, 2.0, 5.0]).reshape(4, 1, 1)
        weights = np.array([0.1, 0.2, 0.3, 0.4])
        prev = _scalar_gmm([1.0], [0.0], [1.0])
        out, degenerate = gmm_fit_weighted(actions, weights, prev)
        mean = float(weights @ actions[:, 0, 0])
        var = float(weights @ (actions[:, 0, 0] - mean) ** 2)
        assert out.mu[0, 0, 0] == pytest.approx(mean, abs=1e-12)
        assert out.var[0, 0, 0] == pytest.approx(var, abs=1e-12)
        assert np.array_equal(out.pi, [1.0])
        assert not degenerate.any()

    def test_uniform_weights_single_component_is_sample_mean(self):
        rng = np.random.default_rng(5)
        actions = rng.standard_normal((20, 2, 2))
        prev = _gmm([1.0], np.zeros((1, 2, 2)), np.ones((1, 2, 2)))
        out, _ = gmm_fit_weighted(actions, np.full(20, 0.05), prev)
        assert np.allclose(out.mu[0], actions.mean(axis=0), atol=1e-12)

    def test_well_separated_clusters(self):
        prev = _scalar_gmm([0.5, 0.5], [-5.0, 5.0], [1.0, 1.0])
        actions = np.array([-5.1, -4.9, 4.9, 5.1]).reshape(4, 1, 1)
        out, _ = gmm_fit_weighted(actions, np.full(4, 0.25), prev)
        assert out.mu[0, 0, 0] == pytest.approx(-5.0, abs=1e-3)
        assert out.mu[1, 0, 0] == pytest.approx(5.0, abs=1e-3)
        assert np.allclose(out.pi, [0.5, 0.5], atol=1e-3)

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            m = int(rng.integers(1, 5))
            k = int(rng.integers(m + 1, 30))
            t_len = int(rng.integers(1, 3))
            d = int(rng.integers(1, 3))
            pi = rng.dirichlet(np.ones(m))
            prev = _gmm(pi, rng.standard_normal((m, t_len, d)),
                        rng.uniform(0.5, 2.0, (m, t_len, d)))
            actions = rng.standard_normal((k, t_len, d)) * 2.0
            weights = rng.dirichlet(np.ones(k))
            out, _ = gmm_fit_weighted(actions, weights, prev)
            pi_b, mu_b, var_b = _brute_force_refit(actions, weights, prev)
            assert np.allclose(out.pi, pi_b, atol=1e-9)
            assert np.allclose(out.mu, mu_b, atol=1e-9)
            assert np.allclose(out.var, var_b, atol=1e-9)

    def test_degenerate_component_keeps_previous_parameters(self):
        # Component 2 sits 1000 sigma away from every particle: its
        # responsibility mass underflows and it must stay untouched.
        prev = _scalar_gmm([0.5, 0.5], [0.0, 1000.0], [1.0, 1.0])
        actions = np.array([-0.1, 0.1]).reshape(2, 1, 1)
        out, degenerate = gmm_fit_weighted(actions, np.array([0.5, 0.5]), prev)
        assert degenerate[1] and not degenerate[0]
        assert out.mu[1, 0, 0] == 1000.0
        assert out.var[1, 0, 0] == 1.0

    def test_variance_floor_applied(self):
        prev = _scalar_gmm([1.0], [0.0], [1.0])
        actions = np.zeros((3, 1, 1))
        out, _ = gmm_fit_weighted(actions, np.full(3, 1 / 3), prev)
        assert out.var[0, 0, 0] == 1e-12

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=100, deadline=None)
    def test_refit_preserves_invariants(self, seed):
        rng = np.random.default_rng(seed)
        m = int(rng.integers(1, 4))
        k = int(rng.integers(2, 20))
        pi = rng.dirichlet(np.ones(m))
        prev = _gmm(pi, rng.standard_normal((m, 2, 1)), rng.uniform(0.1, 2.0, (m, 2, 1)))
        actions = rng.standard_normal((k, 2, 1))
        weights = rng.dirichlet(np.ones(k))
        out, _ = gmm_fit_weighted(actions, weights, prev)
        assert abs(out.pi.sum() - 1.0) < 1e-9
        assert np.all(out.pi >= 0)
        assert np.all(out.var > 0)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=50, deadline=None)
    def test_single_component_equals_closed_form(self, seed):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, 30))
        actions = rng.standard_normal((k, 3, 2))
        weights = rng.dirichlet(np.ones(k))
        prev = _gmm([1.0], rng.standard_normal((1, 3, 2)), rng.uniform(0.1, 2.0, (1, 3, 2)))
        out, _ = gmm_fit_weighted(actions, weights, prev)
        mean = np.einsum("k,ktd->td", weights, actions)
        var = np.einsum("k,ktd->td", weights, (actions - mean) ** 2)
        assert np.allclose(out.mu[0], mean, atol=1e-12)
        assert np.allclose(out.var[0], np.maximum(var, 1e-12), atol=1e-12)
