import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ldp_bandit.envs import (
    PRESETS,
    EnvSpec,
    arm_values,
    draw_round,
    instant_regret,
    make_preset,
    make_pricing_env,
    realize_reward,
    uniform_price_grid,
    with_sampler,
)
from ldp_bandit.estimators import LinkFunction


def single_env(theta, link="identity", noise_sigma=0.0, **kw):
    theta = np.asarray(theta, dtype=float)
    noise = "bernoulli" if link == "logistic" else "truncated_gaussian"
    return EnvSpec("single_param", theta.size, kw.pop("K", 2), theta, LinkFunction(link), noise_kind=noise, noise_sigma=noise_sigma, **kw)


class TestSpec:
    def test_defaults(self):
        env = single_env([1.0, 0.0], noise_sigma=0.1)
        assert env.c_r == pytest.approx(1.3)
        assert single_env([0.0, 0.0], link="logistic").c_r == 1.0

    def test_rejects_large_theta(self):
        with pytest.raises(ValueError, match="norm"):
            single_env([1.0, 0.5])

    def test_rejects_shape(self):
        with pytest.raises(ValueError, match="shape"):
            EnvSpec("multi_param", 2, 3, np.zeros(2))

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="unknown environment preset"):
            make_preset("nope")

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_presets_build(self, name):
        env = make_preset(name)
        assert env.name == name
        sample = draw_round(env, np.random.default_rng(0))
        assert sample.values.shape == (env.K,)


class TestDrawRound:
    @given(st.integers(1, 30), st.integers(0, 2**32))
    def test_unit_sphere_norms(self, d, seed):
        env = make_preset("single_sphere", d=d, K=4)
        s = draw_round(env, np.random.default_rng(seed))
        assert np.all(np.abs(np.linalg.norm(s.contexts, axis=1) - 1) < 1e-12)

    def test_sphere_mean(self):
        env = make_preset("single_sphere", d=5, K=10)
        rng = np.random.default_rng(1)
        X = np.concatenate([draw_round(env, rng).contexts for _ in range(10_000)])
        assert np.all(np.abs(X.mean(axis=0)) < 5 / math.sqrt(X.shape[0] * 5))

    def test_fixture_argmax(self):
        env = with_sampler(single_env([1.0, 0.0]), lambda rng: np.array([[1.0, 0.0], [-1.0, 0.0]]))
        s = draw_round(env, np.random.default_rng(0))
        assert s.optimal_arm == 0 and s.optimal_value == 1.0

    def test_tie_goes_to_lowest(self):
        env = with_sampler(single_env([1.0, 0.0], K=3), lambda rng: np.array([[0.0, 1.0], [0.5, 0], [0.5, 0]]))
        assert draw_round(env, np.random.default_rng(0)).optimal_arm == 1

    def test_multi_shares_context(self):
        env = make_preset("multi_random")
        s = draw_round(env, np.random.default_rng(2))
        assert s.contexts.shape == (1, env.d)
        np.testing.assert_allclose(s.values, env.theta_star @ s.contexts[0])

    def test_gaussian_law_bounded(self):
        env = EnvSpec("single_param", 3, 50, np.array([0.5, 0, 0]), context_law="gaussian_isotropic")
        rng = np.random.default_rng(3)
        for _ in range(200):
            assert np.all(np.linalg.norm(draw_round(env, rng).contexts, axis=1) <= 1 + 1e-12)

    def test_argmax_invariant_to_shift(self):
        env = make_preset("single_sphere")
        rng = np.random.default_rng(4)
        for _ in range(100):
            s = draw_round(env, rng)
            assert int(np.argmax(s.values + 3.7)) == s.optimal_arm

    def test_deterministic(self):
        env = make_preset("single_sphere")
        a = draw_round(env, np.random.default_rng(5))
        b = draw_round(env, np.random.default_rng(5))
        assert np.array_equal(a.contexts, b.contexts)


class TestRewards:
    def test_noiseless(self):
        env = single_env([1.0, 0.0])
        assert realize_reward(env, np.array([1.0, 0.0]), 0, np.random.default_rng(0)) == 1.0

    def test_logistic_fair_coin(self):
        env = single_env([0.0, 0.0], link="logistic")
        rng = np.random.default_rng(1)
        N = 100_000
        mean = np.mean([realize_reward(env, np.array([1.0, 0.0]), 0, rng) for _ in range(N)])
        assert abs(mean - 0.5) < 5 * 0.5 / math.sqrt(N)

    def test_truncated_gaussian_mean(self):
        env = single_env([0.3, 0.0], noise_sigma=0.1)
        rng = np.random.default_rng(2)
        N = 100_000
        r = np.array([realize_reward(env, np.array([1.0, 0.0]), 0, rng) for _ in range(N)])
        assert abs(r.mean() - 0.3) < 5 * 0.1 / math.sqrt(N)
        assert np.all(np.abs(r - 0.3) <= 0.3 + 1e-12)

    def test_reward_and_context_bounds(self):
        env = make_preset("single_sphere", noise_sigma=0.5)
        rng = np.random.default_rng(3)
        for _ in range(20_000):
            s = draw_round(env, rng)
            assert np.all(np.linalg.norm(s.contexts, axis=1) <= env.C_B + 1e-12)
            for a in (0, 5):
                assert abs(realize_reward(env, s.contexts[a], a, rng)) <= env.c_r

    def test_bad_arm(self):
        with pytest.raises(ValueError):
            realize_reward(single_env([1.0, 0.0]), np.zeros(2), 5, np.random.default_rng(0))


class TestRegret:
    def _sample(self, env, contexts):
        return draw_round(with_sampler(env, lambda rng: contexts), np.random.default_rng(0))

    def test_zero_for_optimal(self):
        env = make_preset("single_sphere")
        s = draw_round(env, np.random.default_rng(0))
        assert instant_regret(env, s, s.optimal_arm) == 0.0

    def test_identity_difference(self):
        env = single_env([1.0, 0.0])
        s = self._sample(env, np.array([[0.9, 0.0], [0.4, 0.0]]))
        assert instant_regret(env, s, 1) == pytest.approx(0.5)

    def test_logistic_difference(self):
        env = single_env([1.0, 0.0], link="logistic")
        s = self._sample(env, np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert instant_regret(env, s, 1) == pytest.approx(1 / (1 + math.exp(-1)) - 0.5)
        assert instant_regret(env, s, 1) == pytest.approx(0.2311, abs=1e-4)

    @given(st.integers(0, 2**32))
    def test_nonnegative(self, seed):
        env = make_preset("multi_random", K=4)
        s = draw_round(env, np.random.default_rng(seed))
        assert all(instant_regret(env, s, a) >= 0 for a in range(env.K))


class TestPricingEnv:
    def test_grid_endpoints(self):
        g = uniform_price_grid()
        assert g.size == 25 and g[0] == 0.0 and g[-1] == 25000.0

    def test_zero_theta_no_regret(self):
        env = make_pricing_env(np.zeros(6), uniform_price_grid(), 3)
        rng = np.random.default_rng(0)
        for _ in range(50):
            s = draw_round(env, rng)
            assert np.allclose(s.values, 0.5)
            assert all(instant_regret(env, s, a) == 0 for a in range(env.K))

    def test_negative_price_effect_monotone(self):
        theta = np.array([0.3, 0.1, -0.2, -0.6, 0.0, 0.0])
        feats = np.abs(np.random.default_rng(1).standard_normal((100, 3)))
        feats[:, 0] = 1.0
        env = make_pricing_env(theta / np.linalg.norm(theta), uniform_price_grid(), 3, features=feats)
        for row in env.features:
            if row[0] <= 0:
                continue
            p = env.prices / env.price_scale
            z = np.concatenate([np.tile(row, (p.size, 1)), p[:, None] * row], axis=1)
            assert np.all(np.diff(env.link.eval(z @ env.theta_star)) <= 0)

    def test_context_layout_and_bounds(self):
        env = make_pricing_env(np.zeros(4), uniform_price_grid(), 2)
        s = draw_round(env, np.random.default_rng(2))
        x = s.contexts[0, :2]
        p = env.prices / env.price_scale
        np.testing.assert_allclose(s.contexts[:, 2:], p[:, None] * x)
        assert np.all(np.linalg.norm(s.contexts, axis=1) <= 1 + 1e-12)

    def test_revenue_metric(self):
        env = make_pricing_env(np.zeros(4), uniform_price_grid(), 2, regret_metric="revenue")
        s = draw_round(env, np.random.default_rng(3))
        assert s.optimal_arm == env.K - 1
        np.testing.assert_allclose(arm_values(env, s.contexts), 0.5 * env.prices / env.price_scale)

    @pytest.mark.parametrize("grid", [[0, 30000], [10, 5], [-1, 5], [5]])
    def test_bad_grid(self, grid):
        with pytest.raises(ValueError):
            make_pricing_env(np.zeros(2), grid, 1)
