"""Histogram gradient-boosted decision trees grown leaf-wise."""
from __future__ import annotations

import numpy as np

from .. import kernels as _default_kernels
from .. import metrics

MIN_GAIN = 1e-12
_HESS_FLOOR = 1e-16


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def bin_thresholds(column, max_bins):
    """Candidate split thresholds; a value ``x`` falls in bin ``searchsorted(thr, x)``."""
    uniq = np.unique(column)
    if uniq.size <= 1:
        return np.empty(0)
    if uniq.size <= max_bins:
        return (uniq[:-1] + uniq[1:]) / 2.0
    qs = np.quantile(column, np.arange(1, max_bins) / max_bins)
    thr = np.unique(qs)
    # the largest value must stay in the last bin
    return thr[thr < uniq[-1]]


class _Binner:
    def __init__(self, X, max_bins):
        self.thresholds = [bin_thresholds(X[:, j], max_bins) for j in range(X.shape[1])]
        self.n_bins_used = np.array([t.size + 1 for t in self.thresholds], dtype=np.intp)
        self.n_bins = int(max(self.n_bins_used.max(initial=1), 2))

    def transform(self, X):
        out = np.empty(X.shape, dtype=np.uint8)
        for j, thr in enumerate(self.thresholds):
            out[:, j] = np.searchsorted(thr, X[:, j], side="left")
        return np.ascontiguousarray(out)


class Tree:
    """Flat array representation; ``feature == -1`` marks a leaf."""

    __slots__ = ("feature", "threshold", "left", "right", "value", "gain")

    def __init__(self, feature, threshold, left, right, value, gain):
        self.feature = np.asarray(feature, dtype=np.intp)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.intp)
        self.right = np.asarray(right, dtype=np.intp)
        self.value = np.asarray(value, dtype=np.float64)
        self.gain = np.asarray(gain, dtype=np.float64)

    @property
    def n_leaves(self):
        return int(np.sum(self.feature < 0))

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in self.__slots__}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in cls.__slots__})


def _grow_tree(binned, binner, rows, features, grad, hess, cfg, kern):
    """Grow one tree; leaf values are unscaled Newton steps."""
    feature, split_bin, left, right, value, gain = kern.grow_tree(
        binned, rows, features, grad, hess, binner.n_bins,
        np.ascontiguousarray(binner.n_bins_used[features]), cfg.num_leaves,
        cfg.min_child_samples, cfg.reg_lambda, MIN_GAIN,
    )
    threshold = np.zeros(feature.size)
    internal = np.flatnonzero(feature >= 0)
    for node in internal:
        threshold[node] = binner.thresholds[feature[node]][split_bin[node]]
    return Tree(feature, threshold, left, right, value, gain)


class GBDTModel:
    kind = "gbdt"

    def __init__(self, config, n_features, init_score, trees, train_loss_history=None):
        self.config = config
        self.n_features = int(n_features)
        self.init_score = float(init_score)
        self.trees = list(trees)
        self.train_loss_history = list(train_loss_history or [])
        self._flatten()

    def _flatten(self):
        feats, thrs, lefts, rights, vals, roots = [], [], [], [], [], []
        offset = 0
        for t in self.trees:
            roots.append(offset)
            feats.append(t.feature)
            thrs.append(t.threshold)
            lefts.append(np.where(t.left >= 0, t.left + offset, -1))
            rights.append(np.where(t.right >= 0, t.right + offset, -1))
            vals.append(t.value)
            offset += t.feature.size
        cat = lambda parts, dt: np.ascontiguousarray(np.concatenate(parts) if parts else np.empty(0), dtype=dt)
        self._flat = (
            cat(feats, np.intp),
            cat(thrs, np.float64),
            cat(lefts, np.intp),
            cat(rights, np.intp),
            cat(vals, np.float64),
            np.asarray(roots, dtype=np.intp),
        )

    def raw_predict(self, X, kern=None):
        kern = kern or _default_kernels
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"model expects {self.n_features} columns, got {X.shape[-1] if X.ndim else 0}")
        out = np.full(X.shape[0], self.init_score)
        kern.predict_ensemble(X, *self._flat, out)
        return out

    def predict(self, X):
        raw = self.raw_predict(X)
        if self.config.task == "binary_classification":
            return _sigmoid(raw)
        return raw

    def feature_importance(self):
        imp = np.zeros(self.n_features)
        for t in self.trees:
            internal = t.feature >= 0
            np.add.at(imp, t.feature[internal], t.gain[internal])
        return imp

    @property
    def n_splits(self):
        return sum(int(np.sum(t.feature >= 0)) for t in self.trees)

    def to_dict(self):
        return {
            "kind": "gbdt",
            "config": self.config.to_dict(),
            "n_features": self.n_features,
            "init_score": self.init_score,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        from .config import LearnerConfig

        return cls(
            LearnerConfig.from_dict(d["config"]),
            d["n_features"],
            d["init_score"],
            [Tree.from_dict(t) for t in d["trees"]],
        )


def _loss_and_derivatives(task, y, raw):
    if task == "regression":
        g = raw - y
        return metrics.mse(y, raw), g, np.ones_like(raw)
    p = _sigmoid(raw)
    h = np.maximum(p * (1.0 - p), _HESS_FLOOR)
    return metrics.cross_entropy(y, p), p - y, h


def fit_gbdt(config, X, y, kern=None):
    kern = kern or _default_kernels
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, m = X.shape
    rng = np.random.default_rng(config.seed)
    binner = _Binner(X, config.max_bins)
    binned = binner.transform(X)

    if config.task == "regression":
        init = float(np.mean(y))
    else:
        p = float(np.mean(y))
        init = float(np.log(p / (1.0 - p)))
    raw = np.full(n, init)
    loss, grad, hess = _loss_and_derivatives(config.task, y, raw)
    history = [loss]
    all_rows = np.arange(n, dtype=np.intp)
    all_feats = np.arange(m, dtype=np.intp)
    n_sub = max(1, int(round(config.subsample * n)))
    m_sub = max(1, int(round(config.colsample_bytree * m)))
    trees = []
    for _ in range(config.n_estimators):
        rows = all_rows if n_sub == n else np.sort(rng.choice(n, n_sub, replace=False)).astype(np.intp)
        feats = all_feats if m_sub == m else np.sort(rng.choice(m, m_sub, replace=False)).astype(np.intp)
        tree = _grow_tree(binned, binner, rows, feats, grad, hess, config, kern)
        tree.value *= config.learning_rate
        trees.append(tree)
        single = GBDTModel(config, m, 0.0, [tree])
        kern.predict_ensemble(X, *single._flat, raw)
        loss, grad, hess = _loss_and_derivatives(config.task, y, raw)
        history.append(loss)
    return GBDTModel(config, m, init, trees, history)
