import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import bernoulli_kl, gaussian_kl, quadrature_kl_normal
from driftkit.data import AugmentedDataset, augment_and_split
from driftkit.divergence import (KLEstimates, ShiftStatistics, compute_all, estimate_kl, fit_ratio_models,
                                 plugin_kl_y, plugin_terms)
from driftkit.errors import SupportError, UsageError
from driftkit.model import ProbabilisticClassifier
from driftkit.ratio import FeatureView, RatioModel
from driftkit.synth import Experiment1Params, Experiment2Params, gen_experiment1, gen_experiment2


def _x_model(intercept=0.0, slope=1.0, n1=10, n2=10):
    clf = ProbabilisticClassifier(np.array([[intercept, slope]]), (1, 2), 0.0)
    return RatioModel(FeatureView.X, clf, n1, n2, "regression")


def _target_rows(x):
    x = np.asarray(x, dtype=float)[:, None]
    return AugmentedDataset(x, np.zeros(len(x)), np.full(len(x), 2), "regression")


def _split(params, n, seed):
    gen = gen_experiment1 if isinstance(params, Experiment1Params) else gen_experiment2
    g = np.random.default_rng(seed)
    return augment_and_split(gen(params, 1, g, 2 * n), gen(params, 2, g, 2 * n), 0.5, seed)


def test_estimate_kl_uniform_classifier_is_zero():
    assert estimate_kl(_x_model(0.0, 0.0), _target_rows([0.3, -1.0, 2.0])) == 0.0


def test_estimate_kl_mean_of_log_ratios():
    # logit = x, balanced counts: log-ratios equal the inputs
    value = estimate_kl(_x_model(), _target_rows([math.log(2), math.log(8)]))
    assert value == pytest.approx(2 * math.log(2), rel=1e-12)
    value = estimate_kl(_x_model(), _target_rows([math.log(2), math.log(4)]))
    assert value == pytest.approx(1.5 * math.log(2), rel=1e-12)


def test_estimate_kl_empty():
    with pytest.raises(UsageError):
        estimate_kl(_x_model(), _target_rows([]))


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=30), st.integers(0, 1000))
def test_estimate_kl_order_invariant(values, seed):
    perm = np.random.default_rng(seed).permutation(len(values))
    a = estimate_kl(_x_model(), _target_rows(values))
    b = estimate_kl(_x_model(), _target_rows(np.asarray(values)[perm]))
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_plugin_examples():
    assert plugin_kl_y([0, 1, 0, 1], [1, 0]) == 0.0
    value = plugin_kl_y([0, 1, 1, 1], [0, 1])
    assert value == pytest.approx(0.5 * math.log(4 / 3), rel=1e-12)
    assert value == pytest.approx(0.1438, abs=5e-5)
    with pytest.raises(SupportError, match=r"\[2\]"):
        plugin_kl_y([0, 1], [0, 2])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=40), st.lists(st.integers(0, 4), min_size=1, max_size=40))
def test_plugin_is_nonnegative(y1, y2):
    y2 = [v for v in y2 if v in set(y1)] or [y1[0]]
    assert plugin_kl_y(y1, y2) >= -1e-15


def test_decomposition_is_exact():
    est = KLEstimates.from_marginals(0.3, 0.1 + 0.2, 0.07, "plugin")
    assert est.kl_x_given_y + 0 == est.kl_joint - est.kl_y
    assert est.kl_y_given_x == est.kl_joint - est.kl_x


def test_no_shift_estimates_near_zero():
    for params in (Experiment1Params(), Experiment2Params()):
        est = compute_all(_split(params, 2500, 11))
        for name in ("kl_joint", "kl_x", "kl_y", "kl_x_given_y", "kl_y_given_x"):
            assert abs(getattr(est, name)) < 0.02, (params, name, est)


def test_response_shift_plugin_estimate():
    est = compute_all(_split(Experiment1Params(delta=0.1), 10_000, 5))
    truth = bernoulli_kl(0.6, 0.5)
    assert truth == pytest.approx(0.6 * math.log(1.2) + 0.4 * math.log(0.8))
    assert truth == pytest.approx(0.0201, abs=5e-5)
    assert est.y_estimator == "plugin"
    assert est.kl_y == pytest.approx(truth, abs=0.01)
    assert abs(est.kl_x_given_y) < 0.01


@pytest.mark.parametrize("params, attr, truth_fn", [
    (Experiment2Params(lam=0.24), "kl_x", lambda: quadrature_kl_normal(0.24, 0.0)),
    (Experiment2Params(theta=1.0), "kl_y_given_x", lambda: quadrature_kl_normal(1.0, 0.0)),
    (Experiment1Params(gamma=0.5), "kl_x_given_y",
     lambda: gaussian_kl(np.full(3, 0.5), np.eye(3), np.zeros(3), np.eye(3))),
    (Experiment1Params(delta=0.1), "kl_y", lambda: bernoulli_kl(0.6, 0.5)),
])
def test_consistency_at_large_n(params, attr, truth_fn):
    est = compute_all(_split(params, 20_000, 3))
    assert getattr(est, attr) == pytest.approx(truth_fn(), abs=0.01)


def test_closed_form_oracles_agree():
    assert quadrature_kl_normal(0.24, 0.0) == pytest.approx(0.24 ** 2 / 2, rel=1e-8)
    assert gaussian_kl(np.full(3, 0.5), np.eye(3), np.zeros(3), np.eye(3)) == pytest.approx(0.375)


def test_batch_statistics_match_estimates():
    split = _split(Experiment1Params(delta=0.2, gamma=0.3), 500, 2)
    models = fit_ratio_models(split)
    stats = ShiftStatistics(models, split.test)
    est = stats.estimates()
    z = split.test.origin
    batch = np.stack([z, z])
    assert stats.kl_joint(batch)[1] == est.kl_joint
    assert stats.kl_x_given_y(batch)[0] == est.kl_x_given_y
    direct = estimate_kl(models[FeatureView.JOINT], split.test)
    assert direct == pytest.approx(est.kl_joint, rel=1e-12)
    t = split.test
    assert est.kl_y == pytest.approx(plugin_kl_y(t.labels[t.origin == 1], t.labels[t.origin == 2]), rel=1e-12)
    # relabelled batch path equals the cached path when labels are unchanged
    labels = np.broadcast_to(t.labels, batch.shape)
    np.testing.assert_allclose(stats.kl_joint(batch, labels), stats.kl_joint(batch), rtol=1e-12)
    np.testing.assert_allclose(stats.kl_y(batch, labels), stats.kl_y(batch), rtol=1e-12)


def test_continuous_label_uses_y_classifier():
    split = _split(Experiment2Params(lam=0.5), 1000, 4)
    est = compute_all(split)
    assert est.y_estimator == "classifier"
    with pytest.raises(UsageError):
        ShiftStatistics(fit_ratio_models(split), split.test, "plugin")


def test_plugin_terms_sum_to_estimate():
    y1, y2 = [0, 0, 0, 1, 2, 2], [0, 1, 1, 2]
    terms = plugin_terms(y1, y2)
    assert set(terms) == {0, 1, 2}
    assert sum(terms.values()) == pytest.approx(plugin_kl_y(y1, y2), rel=1e-12)
    assert terms[1] == pytest.approx(0.5 * math.log(0.5 * 6), rel=1e-12)
