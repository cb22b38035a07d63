"""Loss functions and multi-series loss aggregation."""
import numpy as np

CE_EPS = 1e-12


def _as_vectors(y, y_hat):
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {y_hat.shape}")
    return y, y_hat


def mse(y, y_hat):
    """Mean squared error; for 2-D targets the squared error vector is summed per row."""
    y, y_hat = _as_vectors(y, y_hat)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(y_hat))):
        raise ValueError("mse requires finite values")
    if y.size == 0:
        raise ValueError("mse of empty vectors")
    err = y - y_hat
    if err.ndim == 1:
        return float(np.mean(err * err))
    return float(np.mean(np.sum(err * err, axis=1)))


def cross_entropy(y, p_hat, eps=CE_EPS):
    """Mean negative log-likelihood.

    ``y`` is either a vector of {0, 1} labels paired with a vector of
    positive-class probabilities, or a one-hot/probability matrix paired
    with a matrix of class probabilities whose rows sum to one.
    """
    y = np.asarray(y, dtype=np.float64)
    p = np.asarray(p_hat, dtype=np.float64)
    if y.shape != p.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {p.shape}")
    if y.size == 0:
        raise ValueError("cross_entropy of empty input")
    if not np.all(np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise ValueError("probabilities must lie in [0, 1]")
    if p.ndim == 2:
        if np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("probability rows must sum to 1")
        p = np.clip(p, eps, 1.0 - eps)
        return float(-np.mean(np.sum(y * np.log(p), axis=1)))
    p = np.clip(p, eps, 1.0 - eps)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def loss_for_task(task):
    if task == "regression":
        return mse
    if task == "binary_classification":
        return cross_entropy
    raise ValueError(f"unknown task {task!r}")


def averaged_loss_sequences(per_series_losses):
    """Zero-pad per-series loss sequences and average them.

    Returns ``(l_ave, l_ave2)`` where ``l_ave`` is the elementwise mean over
    series and ``l_ave2[t]`` is the running mean of ``l_ave`` up to ``t``.
    """
    series = [np.asarray(s, dtype=np.float64).ravel() for s in per_series_losses]
    if not series:
        raise ValueError("need at least one loss sequence")
    t_max = max(len(s) for s in series)
    padded = np.zeros((len(series), t_max))
    for i, s in enumerate(series):
        padded[i, : len(s)] = s
    l_ave = padded.mean(axis=0)
    l_ave2 = np.cumsum(l_ave) / np.arange(1, t_max + 1)
    return l_ave, l_ave2


def averaged_loss_sequences_unpadded(per_series_losses):
    """Diagnostic variant: average only the series still running at each step."""
    series = [np.asarray(s, dtype=np.float64).ravel() for s in per_series_losses]
    if not series:
        raise ValueError("need at least one loss sequence")
    t_max = max(len(s) for s in series)
    total = np.zeros(t_max)
    count = np.zeros(t_max)
    for s in series:
        total[: len(s)] += s
        count[: len(s)] += 1
    l_ave = total / np.maximum(count, 1)
    l_ave2 = np.cumsum(l_ave) / np.arange(1, t_max + 1)
    return l_ave, l_ave2
