import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldp_bandit.estimators import (
    EstimatorError,
    LinkFunction,
    OlsObservation,
    OlsState,
    SgdState,
    default_c_tilde,
    make_ols_observation,
    make_sgd_observation,
    ols_ingest,
    ols_point_estimate,
    sgd_step,
)
from ldp_bandit.privacy import PrivacyBudget, ball_radius, gaussian_sigma

E1 = np.array([1.0, 0.0])


class TestLink:
    def test_identity(self):
        link = LinkFunction("identity")
        assert link.eval(0.3) == 0.3 and link.deriv(0.3) == 1.0
        assert link.lipschitz == 1.0 and link.zeta == 1.0

    def test_logistic(self):
        link = LinkFunction("logistic", C_B=1.0)
        s = 1 / (1 + math.exp(-1))
        assert link.eval(1.0) == pytest.approx(s, rel=1e-15)
        assert link.deriv(1.0) == pytest.approx(s * (1 - s), rel=1e-15)
        assert link.lipschitz == 0.25
        assert link.zeta == pytest.approx(s * (1 - s))

    def test_logistic_stable_far_out(self):
        link = LinkFunction("logistic")
        assert link.eval(-800.0) == 0.0 and link.eval(800.0) == 1.0
        v = link.eval(np.array([-800.0, 0.0, 800.0]))
        assert np.all(np.isfinite(v))

    @pytest.mark.parametrize("kind", ["identity", "logistic"])
    def test_monotone_on_grid(self, kind):
        grid = np.linspace(-10, 10, 10_000)
        link = LinkFunction(kind)
        assert np.all(link.deriv(grid) > 0)
        assert np.all(np.diff(link.eval(grid)) >= 0)

    def test_unknown(self):
        with pytest.raises(ValueError):
            LinkFunction("probit")


class TestOlsObservation:
    def test_noiseless(self):
        obs = make_ols_observation(E1, 3.0, 0.0, 1.0, 3.0, np.random.default_rng(0))
        assert np.array_equal(obs.M, [[1, 0], [0, 0]]) and np.array_equal(obs.u, [3, 0])

    def test_noise_scales(self):
        rng = np.random.default_rng(1)
        N = 100_000
        m00 = np.empty(N)
        m01 = np.empty(N)
        for i in range(N):
            o = make_ols_observation(E1, 1.0, 1.0, 1.0, 1.0, rng)
            assert o.M[0, 1] == o.M[1, 0]
            m00[i], m01[i] = o.M[0, 0], o.M[0, 1]
        assert abs(m00.mean() - 1) < 5 * 2 / math.sqrt(N)
        assert abs(m01.std() / 2 - 1) < 0.05

    def test_zero_input_is_pure_noise(self):
        rng = np.random.default_rng(2)
        N = 100_000
        M = np.zeros((2, 2))
        u = np.zeros(2)
        for _ in range(N):
            o = make_ols_observation(np.zeros(2), 0.0, 0.5, 1.0, 1.0, rng)
            M += o.M
            u += o.u
        assert np.all(np.abs(M / N) < 5 * 1.0 / math.sqrt(N))
        assert np.all(np.abs(u / N) < 5 * 0.5 / math.sqrt(N))

    def test_rejects_out_of_bounds(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError, match="C_B"):
            make_ols_observation(np.array([2.0, 0.0]), 0.0, 0.0, 1.0, 1.0, rng)
        with pytest.raises(ValueError, match="c_r"):
            make_ols_observation(E1, 1.5, 0.0, 1.0, 1.0, rng)


class TestOlsState:
    def test_single_ingest(self):
        s = ols_ingest(OlsState.empty(2), OlsObservation(np.eye(2), np.array([1.0, 0.0])))
        assert np.array_equal(s.A, np.eye(2)) and np.array_equal(s.b, [1, 0]) and s.t == 1

    def test_double_ingest(self):
        obs = OlsObservation(np.array([[2.0, 1.0], [1.0, 3.0]]), np.array([1.0, -1.0]))
        s = OlsState.empty(2)
        ols_ingest(s, obs)
        ols_ingest(s, obs)
        assert np.array_equal(s.A, 2 * obs.M) and np.array_equal(s.b, 2 * obs.u) and s.t == 2

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        obs = [make_ols_observation(x / np.linalg.norm(x), 0.5, 1.0, 1.0, 1.0, rng) for x in rng.standard_normal((10, 3))]
        a, b = OlsState.empty(3), OlsState.empty(3)
        for o in obs:
            ols_ingest(a, o)
        for i in rng.permutation(10):
            ols_ingest(b, obs[i])
        np.testing.assert_allclose(a.A, b.A, rtol=0, atol=1e-12)
        np.testing.assert_allclose(a.b, b.b, rtol=0, atol=1e-12)
        assert np.array_equal(a.A, a.A.T) and np.array_equal(b.A, b.A.T)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            ols_ingest(OlsState.empty(2), OlsObservation(np.eye(3), np.zeros(3)))

    def test_hand_solve(self):
        s = OlsState.empty(2, c_tilde=1.0)
        ols_ingest(s, OlsObservation(np.outer(E1, E1), 3 * E1))
        np.testing.assert_allclose(ols_point_estimate(s), [1.5, 0.0], rtol=1e-15)

    def test_zero_b(self):
        s = OlsState.empty(3, c_tilde=1.0)
        ols_ingest(s, OlsObservation(np.eye(3), np.zeros(3)))
        assert np.array_equal(ols_point_estimate(s), np.zeros(3))

    def test_no_data(self):
        with pytest.raises(EstimatorError):
            ols_point_estimate(OlsState.empty(2))

    def test_normal_equations_oracle(self):
        rng = np.random.default_rng(4)
        X = rng.standard_normal((500, 4))
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        theta = np.array([0.5, -0.3, 0.2, 0.1])
        y = X @ theta
        s = OlsState.empty(4)
        for x, r in zip(X, y):
            ols_ingest(s, make_ols_observation(x, r, 0.0, 1.0, 1.0, rng))
        ref = np.linalg.solve(X.T @ X, X.T @ y)
        np.testing.assert_allclose(ols_point_estimate(s), ref, rtol=1e-9)
        np.testing.assert_allclose(ref, theta, rtol=1e-9)

    def test_fallback_ridge(self):
        # rank-deficient A with no shift is singular: the ridge path must engage
        s = OlsState.empty(2)
        ols_ingest(s, OlsObservation(np.outer(E1, E1), E1.copy()))
        theta = ols_point_estimate(s)
        assert s.fallback_count == 1 and np.isfinite(theta).all()

    def test_indefinite_fails_after_fallback(self):
        s = OlsState.empty(2)
        ols_ingest(s, OlsObservation(-np.eye(2), np.ones(2)))
        with pytest.raises(EstimatorError):
            ols_point_estimate(s)

    def test_fallback_rate_at_default_shift(self):
        # 1e4 noisy rounds at eps = 0.5: the shifted matrix should essentially never need the ridge
        rng = np.random.default_rng(5)
        d, T = 5, 10_000
        sigma = gaussian_sigma(PrivacyBudget(0.5, 0.1), 2.0)
        s = OlsState.empty(d, default_c_tilde(sigma, d, T, 0.05))
        X = rng.standard_normal((T, d))
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        for x in X:
            ols_ingest(s, make_ols_observation(x, 0.0, sigma, 1.0, 1.0, rng))
            ols_point_estimate(s)
        assert s.fallback_count < 0.001 * T


class TestCTilde:
    def test_values(self):
        assert default_c_tilde(0.0, 3, 100, 0.05) == 0.0
        assert default_c_tilde(1.0, 4, 1000, 0.05) == pytest.approx(2 * (8 + 2 * math.log(40000)), rel=1e-14)
        assert default_c_tilde(1.0, 4, 1000, 0.05) == pytest.approx(58.39, abs=0.01)
        assert default_c_tilde(2.0, 4, 1000, 0.05) == 2 * default_c_tilde(1.0, 4, 1000, 0.05)

    def test_multi_arm_log_term(self):
        assert default_c_tilde(1.0, 4, 1000, 0.05, K=3) == pytest.approx(2 * (8 + 2 * math.log(2 * 1000 * 3 / 0.05)))

    @pytest.mark.parametrize("args", [(-1, 2, 10, 0.1), (1, 0, 10, 0.1), (1, 2, 0, 0.1), (1, 2, 10, 1.0)])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            default_c_tilde(*args)


class TestSgdObservation:
    def test_identity_noiseless(self):
        g = make_sgd_observation(np.array([1.0, 0, 0]), 1.0, np.zeros(3), LinkFunction(), None, 1.0, 1.0, None, noiseless=True)
        assert g.tolist() == [-1.0, 0.0, 0.0]

    def test_logistic_noiseless(self):
        g = make_sgd_observation(np.array([1.0, 0, 0]), 1.0, np.zeros(3), LinkFunction("logistic"), None, 1.0, 1.0, None, noiseless=True)
        assert g.tolist() == [-0.5, 0.0, 0.0]

    @settings(max_examples=50)
    @given(st.integers(1, 12), st.floats(0.2, 8), st.integers(0, 2**32))
    def test_private_norm(self, d, eps, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(d)
        x /= np.linalg.norm(x)
        theta = rng.standard_normal(d)
        theta /= 2 * np.linalg.norm(theta)
        z = make_sgd_observation(x, float(rng.uniform(-1, 1)), theta, LinkFunction(), eps, 1.0, 1.3, rng)
        assert abs(np.linalg.norm(z) / ball_radius(eps, d, 2 * 1.3) - 1) < 1e-9

    def test_unbiased_for_gradient(self):
        rng = np.random.default_rng(6)
        x = np.array([0.6, 0.8, 0.0])
        theta = np.array([0.2, -0.1, 0.4])
        g = make_sgd_observation(x, 0.7, theta, LinkFunction(), None, 1.0, 1.0, rng, noiseless=True)
        N = 200_000
        acc = np.zeros(3)
        for _ in range(N):
            acc += make_sgd_observation(x, 0.7, theta, LinkFunction(), 1.0, 1.0, 1.0, rng)
        r = ball_radius(1.0, 3, 2.0)
        assert np.all(np.abs(acc / N - g) < 5 * r / math.sqrt(N))

    def test_prediction_clipped(self):
        # an iterate far outside the unit ball would otherwise push |g| above 2 c_r C_B
        x = np.array([1.0, 0.0])
        g = make_sgd_observation(x, -1.0, np.array([50.0, 0.0]), LinkFunction(), None, 1.0, 1.0, None, noiseless=True)
        assert g.tolist() == [2.0, 0.0]


class TestSgdStep:
    def test_basic(self):
        s = SgdState.empty(2)
        assert np.array_equal(s.theta_hat, [0, 0]) and s.c0 == 2.0 and not s.project_unit_ball
        sgd_step(s, np.array([-1.0, 0.0]), 0.5)
        assert s.theta_hat.tolist() == [0.5, 0.0] and s.step_count == 1

    def test_zero_direction(self):
        s = SgdState.empty(2)
        s.theta_hat[:] = (0.1, 0.2)
        sgd_step(s, np.zeros(2), 1.0)
        assert s.theta_hat.tolist() == [0.1, 0.2] and s.step_count == 1

    @pytest.mark.parametrize("eta", [0.0, -0.1])
    def test_rejects_eta(self, eta):
        with pytest.raises(ValueError):
            sgd_step(SgdState.empty(2), np.zeros(2), eta)

    def test_projection(self):
        s = SgdState.empty(2, project_unit_ball=True)
        sgd_step(s, np.array([-3.0, -4.0]), 1.0)
        np.testing.assert_allclose(s.theta_hat, [0.6, 0.8], rtol=1e-15)

    def test_scalar_recursion_converges_monotonically(self):
        s = SgdState.empty(1, c0=1.0)
        x = np.array([1.0])
        gaps = []
        for t in range(1, 101):
            z = make_sgd_observation(x, 1.0, s.theta_hat, LinkFunction(), None, 1.0, 1.0, None, noiseless=True)
            sgd_step(s, z, 1.0 / t)
            gaps.append(abs(1 - s.theta_hat[0]))
        assert all(b <= a for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] < 1e-12


@pytest.mark.parametrize("kind", ["identity", "logistic"])
def test_gradient_matches_finite_differences(kind):
    rng = np.random.default_rng(7)
    link = LinkFunction(kind)

    def loss(theta, x, r):
        s = x @ theta
        return 0.5 * s * s - r * s if kind == "identity" else np.logaddexp(0, s) - r * s

    for _ in range(10):
        x = rng.standard_normal(4)
        x /= 1.2 * np.linalg.norm(x)
        theta = rng.standard_normal(4)
        theta /= 1.5 * np.linalg.norm(theta)
        r = float(rng.uniform(-1, 1)) if kind == "identity" else 1.0
        g = make_sgd_observation(x, r, theta, link, None, 1.0, 1.0, None, noiseless=True)
        fd = np.array([(loss(theta + h, x, r) - loss(theta - h, x, r)) / 2e-5 for h in 1e-5 * np.eye(4)])
        assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(g)
