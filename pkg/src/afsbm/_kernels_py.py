"""Pure NumPy versions of the boosting kernels.

Accumulation order matches the compiled module exactly (sequential sums
over rows, then over bins) so switching backends never changes a model.
"""
import numpy as np


def build_histogram(binned, rows, features, grad, hess, n_bins):
    n_feat = len(features)
    sub = binned[np.ix_(rows, features)].astype(np.intp)
    # row-major flattening keeps per-bin accumulation in row order
    flat = (sub + np.arange(n_feat, dtype=np.intp) * n_bins).ravel()
    size = n_feat * n_bins
    g = np.repeat(grad[rows], n_feat)
    h = np.repeat(hess[rows], n_feat)
    hist = np.empty((n_feat, n_bins, 3), dtype=np.float64)
    hist[:, :, 0] = np.bincount(flat, weights=g, minlength=size).reshape(n_feat, n_bins)
    hist[:, :, 1] = np.bincount(flat, weights=h, minlength=size).reshape(n_feat, n_bins)
    hist[:, :, 2] = np.bincount(flat, minlength=size).reshape(n_feat, n_bins)
    return hist


def find_best_split(hist, n_bins_used, min_child_samples, reg_lambda, min_gain):
    n_feat, n_bins, _ = hist.shape
    if n_feat == 0 or n_bins < 2:
        return -1, -1, 0.0
    cum = np.cumsum(hist, axis=1)
    g_tot = cum[:, -1:, 0]
    h_tot = cum[:, -1:, 1]
    c_tot = cum[:, -1:, 2]
    gl = cum[:, :-1, 0]
    hl = cum[:, :-1, 1]
    cl = cum[:, :-1, 2]
    gr = g_tot - gl
    hr = h_tot - hl
    cr = c_tot - cl
    parent = g_tot * g_tot / (h_tot + reg_lambda)
    valid = (
        (np.arange(n_bins - 1)[None, :] < (np.asarray(n_bins_used)[:, None] - 1))
        & (cl >= min_child_samples)
        & (cr >= min_child_samples)
        & (hl + reg_lambda > 0.0)
        & (hr + reg_lambda > 0.0)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = 0.5 * (gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent)
    gain = np.where(valid, gain, -np.inf)
    flat = int(np.argmax(gain))  # first maximum in (feature, bin) order
    k, b = divmod(flat, n_bins - 1)
    best = gain[k, b]
    if not best > min_gain:
        return -1, -1, 0.0
    return k, b, float(best)


def predict_ensemble(X, feature, threshold, left, right, value, roots, out):
    n = X.shape[0]
    rows = np.arange(n)
    for root in roots:
        node = np.full(n, root, dtype=np.intp)
        while True:
            f = feature[node]
            internal = f >= 0
            if not internal.any():
                break
            idx = rows[internal]
            nd = node[internal]
            go_left = X[idx, f[internal]] <= threshold[nd]
            node[internal] = np.where(go_left, left[nd], right[nd])
        out += value[node]
    return None


def _seq_sum(a):
    return float(np.cumsum(a)[-1]) if a.size else 0.0


def grow_tree(binned, rows, features, grad, hess, n_bins, n_bins_used, num_leaves,
              min_child_samples, reg_lambda, min_gain):
    max_nodes = 2 * num_leaves - 1
    feature = np.full(max_nodes, -1, dtype=np.intp)
    split_bin = np.full(max_nodes, -1, dtype=np.intp)
    left = np.full(max_nodes, -1, dtype=np.intp)
    right = np.full(max_nodes, -1, dtype=np.intp)
    value = np.zeros(max_nodes)
    gain_rec = np.zeros(max_nodes)

    def best(hist):
        return find_best_split(hist, n_bins_used, min_child_samples, reg_lambda, min_gain)

    hist0 = build_histogram(binned, rows, features, grad, hess, n_bins)
    # open leaves in insertion order: node -> (rows, hist, split)
    open_leaves = {0: (np.asarray(rows), hist0, best(hist0))}
    n_nodes, n_leaves = 1, 1
    while n_leaves < num_leaves:
        best_node, best_split = -1, None
        for node, (_, _, s) in open_leaves.items():
            if s[0] < 0:
                continue
            if best_split is None or s[2] > best_split[2]:
                best_node, best_split = node, s
        if best_split is None:
            break
        node_rows, hist, (k, b, gain) = open_leaves.pop(best_node)
        f = int(features[k])
        go_left = binned[node_rows, f] <= b
        l_rows, r_rows = node_rows[go_left], node_rows[~go_left]
        l_id, r_id = n_nodes, n_nodes + 1
        n_nodes += 2
        feature[best_node], split_bin[best_node] = f, b
        left[best_node], right[best_node] = l_id, r_id
        gain_rec[best_node] = gain
        if l_rows.size <= r_rows.size:
            h_l = build_histogram(binned, l_rows, features, grad, hess, n_bins)
            h_r = hist - h_l
        else:
            h_r = build_histogram(binned, r_rows, features, grad, hess, n_bins)
            h_l = hist - h_r
        open_leaves[l_id] = (l_rows, h_l, best(h_l))
        open_leaves[r_id] = (r_rows, h_r, best(h_r))
        n_leaves += 1

    for node, (nr, _, _) in open_leaves.items():
        G = _seq_sum(grad[nr])
        H = _seq_sum(hess[nr])
        if H + reg_lambda > 0.0:
            value[node] = -G / (H + reg_lambda)
    return (feature[:n_nodes], split_bin[:n_nodes], left[:n_nodes], right[:n_nodes],
            value[:n_nodes], gain_rec[:n_nodes])
