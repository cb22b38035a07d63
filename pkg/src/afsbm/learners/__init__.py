"""Trainable models behind a uniform fit / predict / loss interface."""
import numpy as np

from .. import metrics
from .config import REFERENCE_GRIDS, ConfigError, LearnerConfig, check_reference_grid
from .gbdt import GBDTModel, fit_gbdt
from .mlp import MLPModel, fit_mlp

__all__ = [
    "ConfigError",
    "GBDTModel",
    "LearnerConfig",
    "MLPModel",
    "REFERENCE_GRIDS",
    "check_reference_grid",
    "evaluate",
    "feature_importance",
    "fit",
    "model_from_dict",
    "predict",
]


class FitError(RuntimeError):
    """Training could not start or diverged."""


def fit(config, X, y, eval_set=None):
    """Train the learner described by ``config`` on ``(X, y)``.

    ``eval_set`` is only used by the MLP for early stopping.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise FitError("training data is empty")
    if X.shape[0] != y.shape[0]:
        raise FitError(f"{X.shape[0]} rows but {y.shape[0]} targets")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise FitError("training data contains non-finite values")
    if config.task == "binary_classification":
        if not np.all((y == 0) | (y == 1)):
            raise FitError("classification targets must be 0 or 1")
        if np.unique(y).size < 2:
            raise FitError("classification training set contains a single class")
    if config.kind == "gbdt":
        return fit_gbdt(config, X, y)
    return fit_mlp(config, X, y, eval_set=eval_set)


def predict(model, X):
    """Raw scores for regression, positive-class probabilities for classification."""
    return model.predict(X)


def feature_importance(model):
    """Total split gain per feature (GBDT only)."""
    return model.feature_importance()


def evaluate(model, X, y):
    """Task loss of ``model`` on ``(X, y)``: MSE or cross-entropy."""
    return metrics.loss_for_task(model.config.task)(y, model.predict(X))


def model_from_dict(d):
    if d["kind"] == "gbdt":
        return GBDTModel.from_dict(d)
    if d["kind"] == "mlp":
        return MLPModel.from_dict(d)
    raise ValueError(f"unknown model kind {d['kind']!r}")
