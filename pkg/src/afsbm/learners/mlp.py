"""Multilayer perceptron trained with mini-batch gradient descent."""
from __future__ import annotations

import numpy as np

from .. import metrics


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _activate(name, z):
    if name == "relu":
        return np.maximum(z, 0.0)
    return _sigmoid(z)


def _activate_grad(name, z, a):
    if name == "relu":
        return (z > 0).astype(np.float64)
    return a * (1.0 - a)


def init_params(layer_sizes, rng, activation):
    params = []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        # Glorot-uniform, scaled for logistic units
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        if activation == "logistic":
            bound *= 4.0
        params.append((rng.uniform(-bound, bound, (fan_in, fan_out)), np.zeros(fan_out)))
    return params


def forward(params, X, activation, task):
    """Return (output, cache) where cache holds pre- and post-activations per layer."""
    a = X
    cache = [(None, X)]
    for i, (W, b) in enumerate(params):
        z = a @ W + b
        if i == len(params) - 1:
            a = _sigmoid(z).ravel() if task == "binary_classification" else z.ravel()
        else:
            a = _activate(activation, z)
        cache.append((z, a))
    return a, cache


def objective(params, X, y, activation, task, alpha):
    """Training objective: data loss + alpha/(2n) * sum of squared weights.

    The data loss is 0.5 * MSE for regression and cross-entropy for
    classification, whose output-layer gradient is ``(out - y) / n`` in both cases.
    """
    out, _ = forward(params, X, activation, task)
    n = X.shape[0]
    if task == "regression":
        data = 0.5 * metrics.mse(y, out)
    else:
        data = metrics.cross_entropy(y, out)
    penalty = 0.5 * alpha / n * sum(float(np.sum(W * W)) for W, _ in params)
    return data + penalty


def gradients(params, X, y, activation, task, alpha):
    """Analytic gradients of :func:`objective` via backpropagation."""
    out, cache = forward(params, X, activation, task)
    n = X.shape[0]
    delta = ((out - y) / n).reshape(-1, 1)
    grads = [None] * len(params)
    for i in range(len(params) - 1, -1, -1):
        W, _ = params[i]
        a_prev = cache[i][1]
        grads[i] = (a_prev.T @ delta + alpha / n * W, delta.sum(axis=0))
        if i > 0:
            z_prev, a_prev_post = cache[i]
            delta = (delta @ W.T) * _activate_grad(activation, z_prev, a_prev_post)
    return grads


class MLPModel:
    kind = "mlp"

    def __init__(self, config, n_features, params, loss_history=None):
        self.config = config
        self.n_features = int(n_features)
        self.params = [(np.asarray(W, dtype=np.float64), np.asarray(b, dtype=np.float64)) for W, b in params]
        self.loss_history = list(loss_history or [])

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"model expects {self.n_features} columns, got {X.shape[-1] if X.ndim else 0}")
        out, _ = forward(self.params, X, self.config.activation, self.config.task)
        return out

    def feature_importance(self):
        raise TypeError("feature importance is only defined for gbdt models")

    def to_dict(self):
        return {
            "kind": "mlp",
            "config": self.config.to_dict(),
            "n_features": self.n_features,
            "weights": [W.tolist() for W, _ in self.params],
            "biases": [b.tolist() for _, b in self.params],
        }

    @classmethod
    def from_dict(cls, d):
        from .config import LearnerConfig

        cfg = LearnerConfig.from_dict(d["config"])
        params = [(np.array(W), np.array(b)) for W, b in zip(d["weights"], d["biases"])]
        return cls(cfg, d["n_features"], params)


def fit_mlp(config, X, y, eval_set=None):
    """Mini-batch gradient descent with early stopping.

    Stops when the monitored loss (``eval_set`` if given, else the training
    objective) has not improved for ``config.patience`` epochs, and returns
    the best parameters seen.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, m = X.shape
    rng = np.random.default_rng(config.seed)
    sizes = [m, *config.hidden_layer_sizes, 1]
    params = init_params(sizes, rng, config.activation)
    lr = config.learning_rate_init
    loss_fn = metrics.loss_for_task(config.task)

    def monitored(p):
        if eval_set is None:
            return objective(p, X, y, config.activation, config.task, config.alpha)
        Xv, yv = eval_set
        out, _ = forward(p, np.asarray(Xv, dtype=np.float64), config.activation, config.task)
        return loss_fn(yv, out)

    best = monitored(params)
    best_params = [(W.copy(), b.copy()) for W, b in params]
    history = [best]
    stale = 0
    for _ in range(config.max_epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            grads = gradients(params, X[idx], y[idx], config.activation, config.task, config.alpha)
            params = [(W - lr * gW, b - lr * gb) for (W, b), (gW, gb) in zip(params, grads)]
        current = monitored(params)
        if not np.isfinite(current):
            break
        history.append(current)
        if current < best - 1e-12:
            best, stale = current, 0
            best_params = [(W.copy(), b.copy()) for W, b in params]
        else:
            stale += 1
            if stale >= config.patience:
                break
    return MLPModel(config, m, best_params, history)
