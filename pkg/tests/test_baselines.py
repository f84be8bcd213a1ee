import numpy as np
import pytest

from popdyn.baselines import LinearModel, fit_linear, predict_linear
from popdyn.numerics import make_rng


def linear_problem(n=40, t=3, k=2, seed=0, noise=0.0):
    """Targets that are exactly expm1(linear(features)): recoverable."""
    rng = make_rng(seed)
    X = rng.uniform(0, 3, size=(n, t, k))
    w = rng.uniform(0.05, 0.3, size=t * k)
    s = X.reshape(n, -1) @ w + 1.0
    if noise:
        s = s + rng.normal(scale=noise, size=n)
    y = np.expm1(s)
    assert np.all(y > 0)
    return X, y, w


class TestFitLinear:
    def test_recovers_exact_linear_structure(self):
        X, y, w = linear_problem()
        m = fit_linear(X, y, horizon=1)
        np.testing.assert_allclose(m.weights[:-1], w, atol=1e-4)
        assert m.weights[-1] == pytest.approx(1.0, abs=1e-4)
        preds = m.predict_batch(X)
        np.testing.assert_allclose(preds, y, rtol=1e-4)

    def test_constant_target_learns_bias_only(self):
        rng = make_rng(3)
        X = rng.uniform(0, 2, size=(30, 2, 2))
        y = np.full(30, 9.0)
        m = fit_linear(X, y, horizon=2)
        preds = m.predict_batch(X)
        np.testing.assert_allclose(preds, y, rtol=1e-3)

    def test_permutation_invariance_of_fit(self):
        X, y, _ = linear_problem(seed=5, noise=0.1)
        m1 = fit_linear(X, y, horizon=1)
        perm = make_rng(6).permutation(len(y))
        m2 = fit_linear(X[perm], y[perm], horizon=1)
        # the normal equations are order-free up to float summation order
        np.testing.assert_allclose(m1.weights, m2.weights, atol=1e-8)

    def test_identity_transform_plain_least_squares(self):
        rng = make_rng(8)
        X = rng.uniform(0, 2, size=(25, 2, 1))
        w = np.array([2.0, -1.0])
        y = X.reshape(25, -1) @ w + 5.0
        y = np.maximum(y, 0.5)
        m = fit_linear(X, y, horizon=1, target_transform="identity")
        preds = m.predict_batch(X)
        np.testing.assert_allclose(preds, y, atol=1e-3)

    def test_rejects_bad_shapes_and_targets(self):
        with pytest.raises(ValueError, match="aligned"):
            fit_linear(np.zeros((4, 2, 2)), np.zeros(3), horizon=1)
        with pytest.raises(ValueError, match="positive"):
            fit_linear(np.ones((3, 2, 2)), np.array([1.0, 0.0, 2.0]), horizon=1)
        with pytest.raises(ValueError, match="ridge"):
            fit_linear(np.ones((3, 2, 2)), np.ones(3), horizon=1, ridge=0.0)


class TestPredictLinear:
    def test_zero_weights_give_zero_prediction(self):
        m = LinearModel(np.zeros(5), feature_dim=2, num_steps=2, horizon=1)
        assert predict_linear(m, np.ones((2, 2))) == 0.0

    def test_bias_only_model(self):
        w = np.zeros(5)
        w[-1] = 2.0
        m = LinearModel(w, feature_dim=2, num_steps=2, horizon=1)
        assert predict_linear(m, np.zeros((2, 2))) == pytest.approx(np.expm1(2.0))

    def test_clamped_at_zero(self):
        w = np.zeros(5)
        w[-1] = -30.0
        m = LinearModel(w, feature_dim=2, num_steps=2, horizon=1)
        assert predict_linear(m, np.ones((2, 2))) == 0.0

    def test_rejects_wrong_shape(self):
        m = LinearModel(np.zeros(5), feature_dim=2, num_steps=2, horizon=1)
        with pytest.raises(ValueError, match="feature shape"):
            predict_linear(m, np.ones((3, 2)))

    def test_batch_matches_single(self):
        X, y, _ = linear_problem(n=10)
        m = fit_linear(X, y, horizon=1)
        batch = m.predict_batch(X)
        singles = [m.predict(x) for x in X]
        np.testing.assert_array_equal(batch, singles)
