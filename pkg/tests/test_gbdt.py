import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from afsbm import learners
from afsbm.learners import FitError, LearnerConfig, fit
from afsbm.learners.gbdt import GBDTModel, bin_thresholds


def _oracle_boost(x, y, n_trees, lr, min_child):
    """Exact-greedy depth-1 boosting on one feature, written independently."""
    order = np.argsort(x, kind="stable")
    xs, pred = x[order], np.full(len(x), y.mean())
    ys = y[order]
    p = pred.copy()
    for _ in range(n_trees):
        r = ys - p
        best = None
        for i in range(min_child, len(xs) - min_child + 1):
            if xs[i - 1] == xs[i]:
                continue
            left, right = r[:i], r[i:]
            sse = ((left - left.mean()) ** 2).sum() + ((right - right.mean()) ** 2).sum()
            if best is None or sse < best[0]:
                best = (sse, i, left.mean(), right.mean())
        _, i, ml, mr = best
        p[:i] += lr * ml
        p[i:] += lr * mr
    return np.mean((ys - p) ** 2)


def test_stump_predicts_training_mean(rng):
    X = rng.normal(size=(30, 3))
    y = rng.normal(size=30)
    m = fit(LearnerConfig(num_leaves=1, n_estimators=1), X, y)
    np.testing.assert_allclose(m.predict(rng.normal(size=(5, 3))), y.mean(), rtol=0, atol=1e-12)
    assert not m.feature_importance().any()
    assert m.n_splits == 0


def test_fits_linear_target_like_oracle(rng):
    x = rng.uniform(0, 1, 200)
    y = 2 * x
    m = fit(LearnerConfig(num_leaves=2, n_estimators=100, min_child_samples=5, max_bins=256), x[:, None], y)
    train_mse = learners.evaluate(m, x[:, None], y)
    oracle = _oracle_boost(x, y, 100, 0.1, 5)
    assert train_mse < 0.01 * y.var()
    # histogram binning may only lose a little against exact greedy splits
    assert train_mse <= 1.5 * oracle + 1e-6


def test_leafwise_fit_beats_one_percent_of_variance(rng):
    x = rng.uniform(0, 1, (200, 1))
    y = 2 * x[:, 0]
    m = fit(LearnerConfig(n_estimators=100, num_leaves=20, min_child_samples=5), x, y)
    assert learners.evaluate(m, x, y) < 0.01 * y.var()


@given(seed=st.integers(0, 1000), leaves=st.integers(2, 30), lr=st.sampled_from([0.01, 0.1, 0.5, 1.0]),
       col=st.sampled_from([0.6, 1.0]))
def test_training_loss_non_increasing(seed, leaves, lr, col):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (60, 5))
    y = np.sin(6 * X[:, 0]) + rng.normal(0, 0.1, 60)
    cfg = LearnerConfig(num_leaves=leaves, learning_rate=lr, n_estimators=15, min_child_samples=3,
                        colsample_bytree=col, seed=seed)
    h = fit(cfg, X, y).train_loss_history
    assert all(b <= a + 1e-12 for a, b in zip(h, h[1:]))


@given(seed=st.integers(0, 1000))
def test_logistic_training_loss_non_increasing(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (80, 4))
    y = (X[:, 0] + 0.3 * rng.normal(size=80) > 0.5).astype(float)
    if y.min() == y.max():
        y[0] = 1 - y[0]
    cfg = LearnerConfig(task="binary_classification", num_leaves=8, n_estimators=15, min_child_samples=5)
    h = fit(cfg, X, y).train_loss_history
    assert all(b <= a + 1e-12 for a, b in zip(h, h[1:]))


def test_classification_probabilities_in_unit_interval(rng):
    X = rng.normal(size=(100, 3))
    y = (X[:, 0] > 0).astype(float)
    m = fit(LearnerConfig(task="binary_classification", n_estimators=30, min_child_samples=5), X, y)
    p = m.predict(rng.normal(size=(50, 3)) * 10)
    assert np.all((p > 0) & (p < 1))


def test_deterministic_and_seed_free_without_sampling(small_regression):
    X, y = small_regression
    a = fit(LearnerConfig(seed=1, n_estimators=20), X, y)
    b = fit(LearnerConfig(seed=1, n_estimators=20), X, y)
    c = fit(LearnerConfig(seed=99, n_estimators=20), X, y)
    assert np.array_equal(a.predict(X), b.predict(X))
    assert np.array_equal(a.predict(X), c.predict(X))


def test_sampling_depends_on_seed(small_regression):
    X, y = small_regression
    a = fit(LearnerConfig(seed=1, n_estimators=20, subsample=0.6), X, y)
    b = fit(LearnerConfig(seed=2, n_estimators=20, subsample=0.6), X, y)
    assert not np.array_equal(a.predict(X), b.predict(X))


def test_importance_prefers_signal(rng):
    x1 = rng.uniform(0, 1, 300)
    noise = rng.uniform(0, 1, 300)
    m = fit(LearnerConfig(n_estimators=30, min_child_samples=5), np.column_stack([x1, noise]), x1)
    imp = learners.feature_importance(m)
    assert imp[0] > imp[1] >= 0
    assert imp.sum() > 0


def test_importance_nonnegative_on_noise(rng):
    m = fit(LearnerConfig(n_estimators=10, min_child_samples=5), rng.normal(size=(100, 4)), rng.normal(size=100))
    assert np.all(m.feature_importance() >= 0)


def test_width_mismatch(small_regression):
    X, y = small_regression
    m = fit(LearnerConfig(n_estimators=3), X, y)
    with pytest.raises(ValueError, match="columns"):
        m.predict(X[:, :3])


def test_serialization_round_trip(small_regression):
    X, y = small_regression
    m = fit(LearnerConfig(n_estimators=10, colsample_bytree=0.6), X, y)
    back = GBDTModel.from_dict(m.to_dict())
    assert np.array_equal(back.predict(X), m.predict(X))


def test_zeroed_column_is_never_split(small_regression):
    X, y = small_regression
    X = X.copy()
    X[:, 0] = 0.0
    m = fit(LearnerConfig(n_estimators=20), X, y)
    assert m.feature_importance()[0] == 0


def test_bin_thresholds_constant_column():
    assert bin_thresholds(np.ones(10), 64).size == 0


def test_fit_input_validation():
    cfg = LearnerConfig()
    with pytest.raises(FitError):
        fit(cfg, np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(FitError):
        fit(cfg, np.array([[np.nan]]), np.array([1.0]))
    with pytest.raises(FitError):
        fit(cfg.replace(task="binary_classification"), np.zeros((3, 1)), np.ones(3))
    with pytest.raises(FitError):
        fit(cfg.replace(task="binary_classification"), np.zeros((3, 1)), np.array([0, 1, 2]))
