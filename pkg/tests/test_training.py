import math

import numpy as np
import pytest

from conftest import max_rel_err
from popdyn.model import MODE_DLAM, MODE_LTCCP, DlamModel
from popdyn.numerics import finite_diff_grad, make_rng
from popdyn.training import (
    AdadeltaState,
    TrainConfig,
    adadelta_step,
    clip_global_norm,
    mape_loss,
    train,
)


class TestMapeLoss:
    def test_hand_example(self):
        loss, grad = mape_loss(np.array([12.0, 8.0]), np.array([10.0, 10.0]))
        assert loss == pytest.approx(0.2, abs=1e-15)
        np.testing.assert_allclose(grad, [0.05, -0.05], atol=1e-15)

    def test_perfect_prediction_is_zero(self):
        loss, grad = mape_loss(np.array([3.0, 7.0]), np.array([3.0, 7.0]))
        assert loss == 0.0
        np.testing.assert_array_equal(grad, np.zeros(2))

    def test_scale_invariance(self):
        # relative error is unchanged when preds and targets scale together
        p = np.array([4.0, 9.0, 2.0])
        t = np.array([5.0, 8.0, 2.5])
        l1, _ = mape_loss(p, t)
        l2, _ = mape_loss(10 * p, 10 * t)
        assert l1 == pytest.approx(l2, abs=1e-15)

    def test_gradient_matches_finite_differences(self):
        rng = make_rng(4)
        targets = rng.uniform(5, 50, size=8)
        preds = targets + rng.normal(scale=3, size=8)
        _, grad = mape_loss(preds, targets)
        fd = finite_diff_grad(lambda p: mape_loss(p, targets)[0], preds, 1e-6)
        assert max_rel_err(grad, fd) < 1e-6

    def test_rejects_nonpositive_target_with_index(self):
        with pytest.raises(ValueError, match="index 1"):
            mape_loss(np.array([1.0, 1.0]), np.array([2.0, 0.0]))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError, match="shapes"):
            mape_loss(np.zeros(2), np.zeros(3))

    def test_denominator_floor_engages(self):
        loss, _ = mape_loss(np.array([1.0]), np.array([0.5]), denom_floor=1.0)
        assert loss == pytest.approx(0.5)


class TestAdadelta:
    def test_first_step_hand_value(self):
        # from zero accumulators: E[g2]=(1-rho)g^2, delta=-sqrt(eps)/sqrt(E+eps)*g
        p = [np.array([1.0])]
        g = [np.array([2.0])]
        state = AdadeltaState.for_params(p, rho=0.95, eps=1e-6)
        adadelta_step(state, p, g)
        eg2 = 0.05 * 4.0
        expected_delta = -math.sqrt(1e-6) / math.sqrt(eg2 + 1e-6) * 2.0
        assert expected_delta == pytest.approx(-4.4721e-3, rel=1e-3)
        assert p[0][0] == pytest.approx(1.0 + expected_delta, abs=1e-15)
        assert state.acc_grad[0][0] == pytest.approx(eg2, abs=1e-15)
        assert state.acc_update[0][0] == pytest.approx(
            0.05 * expected_delta**2, abs=1e-18
        )

    def test_zero_gradient_leaves_params_alone(self):
        p = [np.array([3.0, -1.0])]
        state = AdadeltaState.for_params(p)
        adadelta_step(state, p, [np.zeros(2)])
        np.testing.assert_array_equal(p[0], [3.0, -1.0])

    def test_step_opposes_gradient_sign(self):
        rng = make_rng(8)
        p = [rng.normal(size=5)]
        before = p[0].copy()
        g = [rng.normal(size=5)]
        state = AdadeltaState.for_params(p)
        adadelta_step(state, p, g)
        moved = p[0] - before
        assert np.all(np.sign(moved) == -np.sign(g[0]))

    def test_steps_descend_a_quadratic(self):
        p = [np.array([5.0])]
        state = AdadeltaState.for_params(p)
        losses = []
        for _ in range(4000):
            losses.append(p[0][0] ** 2)
            adadelta_step(state, p, [2.0 * p[0]])
        assert losses[-1] < 1e-2 * losses[0]

    def test_rejects_length_mismatch(self):
        p = [np.zeros(2)]
        state = AdadeltaState.for_params(p)
        with pytest.raises(ValueError, match="length"):
            adadelta_step(state, p, [np.zeros(2), np.zeros(2)])

    def test_rejects_bad_hyperparams(self):
        with pytest.raises(ValueError, match="rho"):
            AdadeltaState.for_params([np.zeros(1)], rho=1.0)
        with pytest.raises(ValueError, match="eps"):
            AdadeltaState.for_params([np.zeros(1)], eps=0.0)


class TestClipGlobalNorm:
    def test_below_threshold_untouched(self):
        g = [np.array([3.0, 4.0])]
        total = clip_global_norm(g, 10.0)
        assert total == pytest.approx(5.0)
        np.testing.assert_array_equal(g[0], [3.0, 4.0])

    def test_above_threshold_rescaled(self):
        g = [np.array([3.0, 0.0]), np.array([4.0])]
        clip_global_norm(g, 1.0)
        joint = math.sqrt(sum(float(np.sum(a * a)) for a in g))
        assert joint == pytest.approx(1.0, abs=1e-12)
        # direction preserved
        assert g[0][0] / g[1][0] == pytest.approx(0.75, abs=1e-12)


def toy_problem(n=60, seed=0):
    """Sequences whose cumulative sum predicts the target: learnable but
    nontrivial."""
    rng = make_rng(seed)
    X = rng.uniform(0, 6, size=(n, 4, 3))
    y = X.sum(axis=(1, 2)) + 5.0
    return X, y


def toy_model(mode=MODE_DLAM, seed=1):
    return DlamModel.init(
        mode, feature_dim=3, num_steps=4, horizon=1,
        hidden_size=6, num_layers=2, rng=make_rng(seed),
    )


class TestTrain:
    def test_zero_epochs_is_a_noop(self):
        X, y = toy_problem()
        m = toy_model()
        before = [p.copy() for p in m.params()]
        report = train(m, X, y, TrainConfig(epochs=0))
        assert report.train_losses == []
        for a, b in zip(before, m.params()):
            np.testing.assert_array_equal(a, b)

    def test_deterministic_given_seed(self):
        X, y = toy_problem()
        m1, m2 = toy_model(seed=3), toy_model(seed=3)
        train(m1, X, y, TrainConfig(epochs=5, seed=11))
        train(m2, X, y, TrainConfig(epochs=5, seed=11))
        for a, b in zip(m1.params(), m2.params()):
            np.testing.assert_array_equal(a, b)

    def test_loss_decreases_on_learnable_problem(self):
        X, y = toy_problem()
        m = toy_model()
        report = train(m, X, y, TrainConfig(epochs=60, seed=2))
        assert report.train_losses[-1] < 0.5 * report.train_losses[0]

    def test_trains_both_variants_to_usable_accuracy(self):
        X, y = toy_problem(n=80)
        for mode in (MODE_DLAM, MODE_LTCCP):
            m = toy_model(mode)
            train(m, X, y, TrainConfig(epochs=120, seed=5))
            preds = m.predict_batch(X)
            rel = np.abs(preds - y) / y
            assert np.mean(rel <= 0.3) > 0.8, mode

    def test_restores_best_validation_epoch(self):
        X, y = toy_problem()
        m = toy_model(seed=7)
        report = train(m, X, y, TrainConfig(epochs=40, seed=9))
        assert 0 <= report.best_epoch < len(report.val_losses)
        assert report.val_losses[report.best_epoch] == min(report.val_losses)

    def test_early_stopping_respects_patience(self):
        X, y = toy_problem(n=30)
        m = toy_model(seed=8)
        report = train(m, X, y, TrainConfig(epochs=200, patience=3, seed=1))
        ran = len(report.val_losses)
        if ran < 200:  # stopped early: last 3 epochs show no improvement
            best = min(report.val_losses)
            assert all(v > best or v == best for v in report.val_losses[-3:])
            assert report.best_epoch <= ran - 1 - 3

    def test_rejects_nonpositive_targets(self):
        X, _ = toy_problem(n=4)
        with pytest.raises(ValueError, match="positive"):
            train(toy_model(), X, np.array([1.0, 2.0, 0.0, 3.0]), TrainConfig())

    def test_rejects_misaligned_data(self):
        X, y = toy_problem(n=6)
        with pytest.raises(ValueError, match="aligned"):
            train(toy_model(), X, y[:-1], TrainConfig())

    def test_report_csv_shape(self):
        X, y = toy_problem(n=20)
        m = toy_model()
        report = train(m, X, y, TrainConfig(epochs=3, seed=4))
        lines = report.to_csv().strip().split("\n")
        assert lines[0] == "epoch,train_loss,val_loss,seconds"
        assert len(lines) == 1 + len(report.train_losses)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=-1)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(val_fraction=1.0)


class TestEndToEndGradient:
    """Analytic gradients of the full pipeline (stack, attention, readout,
    inverse transform, relative-error loss) against central differences."""

    @pytest.mark.parametrize("mode", [MODE_DLAM, MODE_LTCCP])
    def test_full_model_gradient(self, mode):
        rng = make_rng(13)
        m = DlamModel.init(
            mode, feature_dim=3, num_steps=4, horizon=1,
            hidden_size=4, num_layers=2, rng=make_rng(14),
        )
        X = rng.uniform(0, 8, size=(6, 4, 3))
        y = rng.uniform(6, 40, size=6)

        def loss_value(_):
            cache = m.forward_batch(X)
            return mape_loss(cache.pred_raw, y)[0]

        cache = m.forward_batch(X)
        _, dpred = mape_loss(cache.pred_raw, y)
        grads = m.backward_batch(cache, dpred)
        params = m.params()
        assert len(grads) == len(params)
        for p, g in zip(params, grads):
            fd = finite_diff_grad(loss_value, p, 1e-5)
            assert max_rel_err(g, fd) < 1e-4
