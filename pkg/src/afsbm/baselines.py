"""Comparison selectors: correlation filter, mutual-information ranking and RFE."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple

import numpy as np

from . import learners
from .dataset import BinaryMask

log = logging.getLogger(__name__)

METHODS = ("cross_correlation", "mutual_information", "rfe")


class Selection(NamedTuple):
    """A selector's mask together with the per-feature scores it ranked by."""

    mask: BinaryMask
    scores: np.ndarray


@dataclass(frozen=True)
class BaselineParams:
    method: str
    gamma: float = 0.1
    k: int = 10
    mi_bins: int = 10

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown baseline method {self.method!r}")
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError("gamma must lie in [0, 1]")
        if not (isinstance(self.k, int) and self.k >= 1):
            raise ValueError("k must be a positive integer")
        if not (isinstance(self.mi_bins, int) and self.mi_bins >= 2):
            raise ValueError("mi_bins must be an integer >= 2")


def _check_xy(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2:
        raise ValueError("X must be a 2-D matrix")
    if X.shape[0] != y.shape[0]:
        raise ValueError(f"length mismatch: {X.shape[0]} rows, {y.shape[0]} targets")
    return X, y


def pearson_scores(X, y):
    """Pearson correlation of every column with ``y``; zero-variance inputs score 0."""
    X, y = _check_xy(X, y)
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sx = np.sqrt(np.sum(xc * xc, axis=0))
    sy = math.sqrt(float(np.sum(yc * yc)))
    num = yc @ xc
    r = np.zeros(X.shape[1])
    ok = (sx > 0) & (sy > 0)
    r[ok] = num[ok] / (sx[ok] * sy)
    return np.clip(r, -1.0, 1.0)


def cross_correlation_select(X, y, gamma):
    """Keep the columns whose absolute correlation with ``y`` exceeds ``gamma``."""
    r = pearson_scores(X, y)
    return Selection(BinaryMask((np.abs(r) > gamma).astype(np.int8)), r)


def mutual_information(x, y, bins_x, bins_y):
    """Plug-in MI estimate (natural log) from a 2-D histogram; empty cells add nothing."""
    counts, _, _ = np.histogram2d(x, y, bins=[bins_x, bins_y])
    n = counts.sum()
    if n == 0:
        return 0.0
    pxy = counts / n
    px = pxy.sum(axis=1, keepdims=True)
    py = pxy.sum(axis=0, keepdims=True)
    nz = pxy > 0
    mi = float(np.sum(pxy[nz] * np.log(pxy[nz] / (px @ py)[nz])))
    return max(mi, 0.0)


def mutual_information_scores(X, y, mi_bins=10, classification=False):
    X, y = _check_xy(X, y)
    if not (isinstance(mi_bins, (int, np.integer)) and mi_bins >= 2):
        raise ValueError("mi_bins must be an integer >= 2")
    if classification:
        classes = np.unique(y)
        # one bin per class label
        edges_y = np.concatenate([classes - 0.5, [classes[-1] + 0.5]])
        return np.array([mutual_information(X[:, j], y, mi_bins, edges_y) for j in range(X.shape[1])])
    return np.array([mutual_information(X[:, j], y, mi_bins, mi_bins) for j in range(X.shape[1])])


def top_k_mask(scores, k):
    """Mask of the ``k`` highest scores; ties go to the lower column index."""
    scores = np.asarray(scores, dtype=np.float64)
    if not (1 <= k <= scores.size):
        raise ValueError(f"k must lie in [1, {scores.size}], got {k}")
    order = np.lexsort((np.arange(scores.size), -scores))
    bits = np.zeros(scores.size, dtype=np.int8)
    bits[order[:k]] = 1
    return BinaryMask(bits)


def mutual_information_select(X, y, k, mi_bins=10, classification=False):
    """Keep the ``k`` columns with the largest estimated mutual information with ``y``."""
    X, y = _check_xy(X, y)
    if k > X.shape[1]:
        raise ValueError(f"k={k} exceeds the {X.shape[1]} available features")
    scores = mutual_information_scores(X, y, mi_bins, classification)
    return Selection(top_k_mask(scores, k), scores)


@dataclass
class EliminationRound:
    active: List[int]
    importance: List[float]
    eliminated: int
    model: object = field(default=None, repr=False)


@dataclass
class RFEPath:
    """One backward-elimination path; ``rounds[i]`` starts with ``M - i`` active columns."""

    n_features: int
    rounds: List[EliminationRound]
    final_active: List[int]
    final_model: object = field(default=None, repr=False)

    @property
    def n_fits(self):
        return len(self.rounds) + (self.final_model is not None)

    def mask_for(self, k):
        """Mask of the ``k`` survivors along this path."""
        M = self.n_features
        lowest = len(self.final_active)
        if not (lowest <= k <= M):
            raise ValueError(f"path covers k in [{lowest}, {M}], got {k}")
        bits = np.zeros(M, dtype=np.int8)
        if k == lowest:
            bits[self.final_active] = 1
        else:
            bits[self.rounds[M - k].active] = 1
        return BinaryMask(bits)

    def model_for(self, k):
        """The model fitted on the ``k`` survivors, if one was trained."""
        M = self.n_features
        if k == len(self.final_active):
            return self.final_model
        return self.rounds[M - k].model

    def scores(self):
        """Rounds survived per feature; final survivors get the path length."""
        s = np.full(self.n_features, float(len(self.rounds)))
        for i, r in enumerate(self.rounds):
            s[r.eliminated] = i
        return s


def _check_learner(learner):
    if learner.kind != "gbdt":
        raise TypeError("RFE needs split-gain importances, which only the GBDT provides")


def rfe_path(learner, X, y, k, keep_models=False, fit_final=False):
    """Eliminate the least important column one round at a time until ``k`` remain.

    Performs exactly ``M - k`` fits (plus one on the survivors when ``fit_final``).
    """
    _check_learner(learner)
    X, y = _check_xy(X, y)
    M = X.shape[1]
    if not (isinstance(k, (int, np.integer)) and k >= 1):
        raise ValueError("k must be a positive integer")
    if k > M:
        raise ValueError(f"k={k} exceeds the {M} available features")
    active = list(range(M))
    rounds = []
    while len(active) > k:
        model = learners.fit(learner, X[:, active], y)
        imp = np.asarray(learners.feature_importance(model), dtype=np.float64)
        # argmin returns the first minimum, i.e. the lowest original index
        drop = active[int(np.argmin(imp))]
        rounds.append(EliminationRound(list(active), imp.tolist(), drop, model if keep_models else None))
        log.debug("rfe: %d active, dropping %d", len(active), drop)
        active.remove(drop)
    final_model = learners.fit(learner, X[:, active], y) if fit_final else None
    return RFEPath(M, rounds, active, final_model)


def rfe_select(learner, X, y, k):
    """Recursive feature elimination down to ``k`` columns."""
    path = rfe_path(learner, X, y, k)
    return Selection(path.mask_for(k), path.scores())


def select(params, X, y, learner=None, classification=False):
    """Dispatch on ``params.method``."""
    if params.method == "cross_correlation":
        return cross_correlation_select(X, y, params.gamma)
    if params.method == "mutual_information":
        return mutual_information_select(X, y, params.k, params.mi_bins, classification)
    if learner is None:
        raise ValueError("RFE needs a learner configuration")
    return rfe_select(learner, X, y, params.k)
