import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from afsbm import kernels
from afsbm.learners import LearnerConfig
from afsbm.learners.gbdt import MIN_GAIN, _Binner, fit_gbdt

py = kernels.get_backend("python")
try:
    cy = kernels.get_backend("cython")
except ImportError:  # extension not built
    cy = None

BACKENDS = [pytest.param(py, id="python")]
if cy is not None:
    BACKENDS.append(pytest.param(cy, id="cython"))
needs_cython = pytest.mark.skipif(cy is None, reason="compiled kernels not built")


def _problem(seed, n=80, m=4, n_bins=8):
    rng = np.random.default_rng(seed)
    binned = rng.integers(0, n_bins, size=(n, m)).astype(np.uint8)
    grad = rng.normal(size=n)
    hess = rng.uniform(0.5, 1.5, size=n)
    return binned, grad, hess


def _brute_histogram(binned, rows, features, grad, hess, n_bins):
    out = np.zeros((len(features), n_bins, 3))
    for k, f in enumerate(features):
        for r in rows:
            b = binned[r, f]
            out[k, b] += (grad[r], hess[r], 1)
    return out


def _brute_split(hist, n_bins_used, min_child, lam):
    best = (-1, -1, 0.0)
    for k in range(hist.shape[0]):
        G, H = hist[k, :, 0].sum(), hist[k, :, 1].sum()
        for b in range(n_bins_used[k] - 1):
            gl, hl, cl = hist[k, : b + 1].sum(axis=0)
            gr, hr, cr = G - gl, H - hl, hist[k, :, 2].sum() - cl
            if cl < min_child or cr < min_child:
                continue
            gain = 0.5 * (gl**2 / (hl + lam) + gr**2 / (hr + lam) - G**2 / (H + lam))
            if gain > best[2] + 1e-12 and gain > MIN_GAIN:
                best = (k, b, gain)
    return best


@pytest.mark.parametrize("kern", BACKENDS)
@given(seed=st.integers(0, 10_000))
def test_histogram_matches_brute_force(kern, seed):
    binned, grad, hess = _problem(seed)
    rows = np.sort(np.random.default_rng(seed).choice(80, 37, replace=False)).astype(np.intp)
    feats = np.array([0, 2, 3], dtype=np.intp)
    got = kern.build_histogram(binned, rows, feats, grad, hess, 8)
    np.testing.assert_allclose(got, _brute_histogram(binned, rows, feats, grad, hess, 8), atol=1e-12)


@pytest.mark.parametrize("kern", BACKENDS)
@given(seed=st.integers(0, 10_000), min_child=st.integers(1, 15), lam=st.sampled_from([0.0, 1.0]))
def test_best_split_matches_exhaustive_scan(kern, seed, min_child, lam):
    binned, grad, hess = _problem(seed)
    rows = np.arange(80, dtype=np.intp)
    feats = np.arange(4, dtype=np.intp)
    hist = kern.build_histogram(binned, rows, feats, grad, hess, 8)
    used = np.full(4, 8, dtype=np.intp)
    k, b, gain = kern.find_best_split(hist, used, min_child, lam, MIN_GAIN)
    bk, bb, bgain = _brute_split(hist, used, min_child, lam)
    assert abs(gain - bgain) <= 1e-9 * max(1.0, bgain)
    if bk >= 0:
        assert (k, b) == (bk, bb)
    else:
        assert k == -1


@pytest.mark.parametrize("kern", BACKENDS)
def test_no_split_when_children_too_small(kern):
    binned, grad, hess = _problem(0, n=10)
    hist = kern.build_histogram(binned, np.arange(10, dtype=np.intp), np.arange(4, dtype=np.intp), grad, hess, 8)
    assert kern.find_best_split(hist, np.full(4, 8, dtype=np.intp), 6, 0.0, MIN_GAIN)[0] == -1


@pytest.mark.parametrize("kern", BACKENDS)
def test_predict_ensemble_matches_per_sample_walk(kern, rng):
    X = rng.uniform(0, 1, (60, 3))
    y = np.sin(5 * X[:, 0]) + X[:, 1]
    model = fit_gbdt(LearnerConfig(num_leaves=6, n_estimators=7, min_child_samples=3), X, y)
    expected = np.full(60, model.init_score)
    for i in range(60):
        for t in model.trees:
            node = 0
            while t.feature[node] >= 0:
                node = t.left[node] if X[i, t.feature[node]] <= t.threshold[node] else t.right[node]
            expected[i] += t.value[node]
    np.testing.assert_allclose(model.raw_predict(X, kern=kern), expected, rtol=0, atol=1e-12)


def test_binner_puts_threshold_ties_left():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    b = _Binner(X, 64)
    assert b.thresholds[0].tolist() == [0.5, 1.5, 2.5]
    assert b.transform(np.array([[0.5], [0.50001], [9.0]])).ravel().tolist() == [0, 1, 3]


def test_binner_caps_bin_count(rng):
    b = _Binner(rng.normal(size=(1000, 2)), 64)
    assert b.n_bins <= 64
    assert all(len(t) <= 63 for t in b.thresholds)


@needs_cython
@pytest.mark.parametrize("task", ["regression", "binary_classification"])
@pytest.mark.parametrize("sub", [1.0, 0.7])
def test_backends_produce_identical_models(task, sub):
    rng = np.random.default_rng(5)
    X = rng.uniform(0, 1, (150, 12))
    raw = 2 * X[:, 0] - X[:, 3] + 0.1 * rng.normal(size=150)
    y = raw if task == "regression" else (raw > np.median(raw)).astype(float)
    cfg = LearnerConfig(task=task, num_leaves=20, n_estimators=15, min_child_samples=5,
                        subsample=sub, colsample_bytree=sub, seed=3)
    a = fit_gbdt(cfg, X, y, kern=py)
    b = fit_gbdt(cfg, X, y, kern=cy)
    assert a.to_dict() == b.to_dict()
    assert np.array_equal(a.raw_predict(X, kern=py), b.raw_predict(X, kern=cy))
