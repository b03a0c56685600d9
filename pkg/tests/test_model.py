import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from driftkit.data import AugmentedDataset
from driftkit.errors import FittingError, UsageError
from driftkit.model import (PROB_CLIP, VARIANCE_FLOOR, ConditionalModel, ProbabilisticClassifier,
                            cross_entropy, fit_conditional, fit_logistic, gaussian_conditional, gradient_check,
                            penalized_gradient, penalized_loss, predict_proba, sample_conditional)


def _binary(score_weight, intercept=0.0):
    return ProbabilisticClassifier(np.array([[intercept, score_weight]]), (0, 1), 0.0)


def test_intercept_only_when_features_constant():
    x = np.full((20, 2), 3.0)
    y = np.tile([0, 1], 10)
    clf = fit_logistic(x, y, l2=1.0)
    np.testing.assert_allclose(predict_proba(clf, [3.0, 3.0]), [0.5, 0.5], atol=1e-9)
    np.testing.assert_allclose(clf.weights[0, 1:], 0.0, atol=1e-9)


def test_newton_matches_grid_search_oracle():
    x = np.array([-2.0, -1.0, 1.0, 2.0])
    y = np.array([0, 0, 1, 1])
    clf = fit_logistic(x[:, None], y, l2=1.0)
    assert clf.converged

    # brute-force oracle over (b, w) on the same penalised objective, written out independently
    bs = np.linspace(-1.0, 1.0, 801)
    ws = np.linspace(0.0, 3.0, 1201)
    b, w = np.meshgrid(bs, ws, indexing="ij")
    z = b[..., None] + w[..., None] * x
    ce = np.mean(np.logaddexp(0, z) - y * z, axis=-1)
    obj = ce + 0.5 * w ** 2
    i, j = np.unravel_index(np.argmin(obj), obj.shape)
    assert clf.weights[0, 0] == pytest.approx(bs[i], abs=5e-3)
    assert clf.weights[0, 1] == pytest.approx(ws[j], abs=5e-3)
    assert clf.loss_history[-1] <= obj.min() + 1e-12
    assert np.isfinite(clf.weights).all()
    assert cross_entropy(clf, x[:, None], y) < math.log(2)


def test_single_class_is_an_error():
    with pytest.raises(FittingError):
        fit_logistic(np.zeros((5, 1)), np.zeros(5))


def test_predict_proba_examples():
    clf = ProbabilisticClassifier(np.zeros((2, 3)), (0, 1, 2), 0.0)
    np.testing.assert_allclose(predict_proba(clf, [1.0, -2.0]), [1 / 3] * 3)
    np.testing.assert_allclose(predict_proba(_binary(1.0), [0.0]), [0.5, 0.5])
    np.testing.assert_allclose(predict_proba(_binary(1.0), [math.log(3)]), [0.25, 0.75])
    with pytest.raises(UsageError):
        predict_proba(_binary(1.0), [1.0, 2.0])


@settings(max_examples=60, deadline=None)
@given(scale=st.floats(0, 1e3), k=st.integers(2, 6), seed=st.integers(0, 10**6))
def test_probabilities_are_clipped_and_normalised(scale, k, seed):
    g = np.random.default_rng(seed)
    clf = ProbabilisticClassifier(scale * g.normal(size=(k - 1, 4)), tuple(range(k)), 0.0)
    p = clf.predict_proba(g.normal(size=(10, 3)))
    assert np.all(p >= PROB_CLIP) and np.all(p <= 1 - PROB_CLIP)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_gradient_matches_finite_differences(k):
    g = np.random.default_rng(k)
    for _ in range(5):
        n, d = int(g.integers(5, 50)), int(g.integers(1, 6))
        x = g.normal(size=(n, d))
        y = np.r_[np.arange(k), g.integers(0, k, n - k)]
        assert gradient_check(x, y, l2=float(g.uniform(0, 2)), rng=g) < 1e-5


def test_gradient_symmetry_at_zero():
    x = np.array([[-1.0], [1.0], [-2.0], [2.0]])
    y = np.array([0, 1, 1, 0])
    xa = np.hstack([np.ones((4, 1)), x])
    g = penalized_gradient(np.zeros(2), xa, y, l2=0.1)
    assert g[0] == pytest.approx(0.0, abs=1e-15)


def test_gradient_dominated_by_penalty():
    g = np.random.default_rng(0)
    x = g.normal(size=(20, 3))
    y = g.integers(0, 2, 20)
    xa = np.hstack([np.ones((20, 1)), x])
    theta = g.normal(size=4)
    l2 = 1e8
    grad = penalized_gradient(theta, xa, y, l2)
    np.testing.assert_allclose(grad[1:], l2 * theta[1:], rtol=1e-7)


def test_newton_loss_is_monotone():
    g = np.random.default_rng(3)
    for k in (2, 3):
        x = g.normal(size=(200, 3))
        y = g.integers(0, k, 200)
        y[:k] = np.arange(k)
        for l2 in (0.0, 1e-4, 1.0):
            hist = np.array(fit_logistic(x * 5, y, l2=l2).loss_history)
            assert np.all(np.diff(hist) <= 0)


def test_separable_data_without_penalty_reports_nonconvergence():
    x = np.r_[-np.arange(1, 6), np.arange(1, 6)][:, None].astype(float)
    y = np.r_[np.zeros(5), np.ones(5)]
    clf = fit_logistic(x, y, l2=0.0, max_iter=15)
    assert not clf.converged
    assert np.all(np.diff(clf.loss_history) <= 0)


def test_penalized_loss_value():
    xa = np.array([[1.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 1])
    assert penalized_loss(np.zeros(2), xa, y, 0.0) == pytest.approx(math.log(2))
    assert penalized_loss(np.array([0.0, 2.0]), xa, y, 1.0) == pytest.approx(
        0.5 * (math.log(2) + math.log1p(math.exp(-2))) + 2.0)


# ---------------------------------------------------------------------------
# conditional model


def _regression_train(x, y):
    x = np.asarray(x, dtype=float).reshape(len(y), -1)
    return AugmentedDataset(x, np.asarray(y, dtype=float), np.ones(len(y)), "regression")


def test_noiseless_regression_hits_variance_floor():
    x = np.linspace(-3, 3, 40)
    model = fit_conditional(_regression_train(x, x), rng=0)
    assert model.sigma2 == VARIANCE_FLOOR
    np.testing.assert_allclose(model.beta, [0.0, 1.0], atol=1e-10)


def test_regression_on_experiment_two_null():
    g = np.random.default_rng(1)
    x = g.normal(size=5000)
    y = x + g.normal(size=5000)
    model = fit_conditional(_regression_train(x, y), rng=2)
    np.testing.assert_allclose(model.beta, [0.0, 1.0], atol=0.05)
    assert model.sigma2 == pytest.approx(1.0, abs=0.08)


def test_regression_zero_variance_falls_back():
    with pytest.warns(RuntimeWarning):
        model = fit_conditional(_regression_train(np.ones(20), np.arange(20.0)), rng=0)
    assert model.warnings and "intercept only" in model.warnings[0]
    np.testing.assert_allclose(model.beta[1:], 0.0)


def test_classification_label_model_near_base_rates():
    g = np.random.default_rng(4)
    n = 6000
    x = g.normal(size=(n, 2))
    y = g.choice(3, size=n, p=[0.2, 0.3, 0.5])
    model = fit_conditional(AugmentedDataset(x, y, np.ones(n), "classification", 3))
    freq = np.bincount(y) / n
    p = predict_proba(model.classifier, g.normal(size=(50, 2)))
    np.testing.assert_allclose(p, np.broadcast_to(freq, p.shape), atol=0.03)


def test_categorical_point_mass_draws():
    clf = ProbabilisticClassifier(np.array([[-60.0, 0.0], [-60.0, 0.0]]), (0, 1, 2), 0.0)
    model = ConditionalModel("categorical", classifier=clf)
    draws = sample_conditional(model, np.zeros((1000, 1)), np.random.default_rng(0))
    assert np.all(draws == 0)


def test_gaussian_draws_at_floor_are_deterministic():
    model = gaussian_conditional([0.5, 2.0, -1.0], 0.0)
    x = np.array([1.0, 3.0])
    assert sample_conditional(model, x, 0) == pytest.approx(0.5 + 2.0 - 3.0, abs=1e-3)


def test_gaussian_draws_match_moments():
    g = np.random.default_rng(8)
    x = g.normal(size=3000)
    y = 0.3 + x + 1.5 * g.normal(size=3000)
    model = fit_conditional(_regression_train(x, y), rng=1)
    draws = sample_conditional(model, np.full((10_000, 1), 0.7), np.random.default_rng(9))
    mean = model.beta[0] + 0.7 * model.beta[1]
    assert draws.mean() == pytest.approx(mean, rel=0.05)
    assert draws.var() == pytest.approx(model.sigma2, rel=0.05)


def test_sampling_is_reproducible():
    model = gaussian_conditional([0.0, 1.0], 1.0)
    x = np.arange(10.0)[:, None]
    a = sample_conditional(model, x, np.random.default_rng(5))
    b = sample_conditional(model, x, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)
