# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for histogram gradient boosting.

Every routine here mirrors a function of the same name in
``_kernels_py`` and accumulates in the same order, so both backends
produce bit-identical models.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef cnp.uint8_t BIN_t
ctypedef cnp.intp_t INTP_t


cdef void _fill_histogram(const BIN_t[:, ::1] binned, const INTP_t[::1] rows,
                          Py_ssize_t start, Py_ssize_t stop,
                          const INTP_t[::1] features, const double[::1] grad,
                          const double[::1] hess, double[:, :, ::1] hist) noexcept nogil:
    cdef Py_ssize_t n_feat = features.shape[0]
    cdef Py_ssize_t n_bins = hist.shape[1]
    cdef Py_ssize_t r, k, row, b
    cdef double g, h
    for k in range(n_feat):
        for b in range(n_bins):
            hist[k, b, 0] = 0.0
            hist[k, b, 1] = 0.0
            hist[k, b, 2] = 0.0
    for r in range(start, stop):
        row = rows[r]
        g = grad[row]
        h = hess[row]
        for k in range(n_feat):
            b = binned[row, features[k]]
            hist[k, b, 0] += g
            hist[k, b, 1] += h
            hist[k, b, 2] += 1.0


cdef double _best_split(const double[:, :, ::1] hist, const INTP_t[::1] n_bins_used,
                        double min_child_samples, double reg_lambda, double min_gain,
                        Py_ssize_t* out_k, Py_ssize_t* out_b) noexcept nogil:
    cdef Py_ssize_t n_feat = hist.shape[0]
    cdef Py_ssize_t n_bins = hist.shape[1]
    cdef Py_ssize_t k, b, nb
    cdef double best_gain = min_gain
    cdef double g_tot, h_tot, c_tot, gl, hl, cl, gr, hr, cr, parent, gain
    out_k[0] = -1
    out_b[0] = -1
    for k in range(n_feat):
        nb = n_bins_used[k]
        if nb < 2:
            continue
        g_tot = 0.0
        h_tot = 0.0
        c_tot = 0.0
        for b in range(n_bins):
            g_tot = g_tot + hist[k, b, 0]
            h_tot = h_tot + hist[k, b, 1]
            c_tot = c_tot + hist[k, b, 2]
        parent = g_tot * g_tot / (h_tot + reg_lambda)
        gl = 0.0
        hl = 0.0
        cl = 0.0
        for b in range(nb - 1):
            gl = gl + hist[k, b, 0]
            hl = hl + hist[k, b, 1]
            cl = cl + hist[k, b, 2]
            if hist[k, b, 2] == 0.0:
                # same partition as the previous bin, cannot beat it
                continue
            cr = c_tot - cl
            if cl < min_child_samples or cr < min_child_samples:
                continue
            gr = g_tot - gl
            hr = h_tot - hl
            if hl + reg_lambda <= 0.0 or hr + reg_lambda <= 0.0:
                continue
            gain = 0.5 * (gl * gl / (hl + reg_lambda) + gr * gr / (hr + reg_lambda) - parent)
            if gain > best_gain:
                best_gain = gain
                out_k[0] = k
                out_b[0] = b
    if out_k[0] < 0:
        return 0.0
    return best_gain


def build_histogram(const BIN_t[:, ::1] binned, const INTP_t[::1] rows,
                    const INTP_t[::1] features, const double[::1] grad,
                    const double[::1] hess, Py_ssize_t n_bins):
    """Return per-feature (sum_grad, sum_hess, count) histograms of shape (f, n_bins, 3)."""
    hist_arr = np.empty((features.shape[0], n_bins, 3), dtype=np.float64)
    cdef double[:, :, ::1] hist = hist_arr
    with nogil:
        _fill_histogram(binned, rows, 0, rows.shape[0], features, grad, hess, hist)
    return hist_arr


def find_best_split(const double[:, :, ::1] hist, const INTP_t[::1] n_bins_used,
                    Py_ssize_t min_child_samples, double reg_lambda, double min_gain):
    """Scan cumulative histograms for the best (feature_pos, bin, gain).

    A split at bin ``b`` sends bins ``<= b`` left. Returns ``(-1, -1, 0.0)``
    when no split satisfies the child-size and gain constraints.
    """
    cdef Py_ssize_t k, b
    cdef double gain
    with nogil:
        gain = _best_split(hist, n_bins_used, <double>min_child_samples, reg_lambda,
                           min_gain, &k, &b)
    return k, b, gain


def grow_tree(const BIN_t[:, ::1] binned, const INTP_t[::1] rows,
              const INTP_t[::1] features, const double[::1] grad,
              const double[::1] hess, Py_ssize_t n_bins,
              const INTP_t[::1] n_bins_used, Py_ssize_t num_leaves,
              Py_ssize_t min_child_samples, double reg_lambda, double min_gain):
    """Grow one tree leaf-wise (best-gain leaf first) on ``rows``.

    ``n_bins_used`` is indexed by position in ``features``. Returns node
    arrays ``(feature, split_bin, left, right, value, gain)``; leaves have
    ``feature == -1`` and Newton values ``-G / (H + lambda)``.
    """
    cdef Py_ssize_t n_feat = features.shape[0]
    cdef Py_ssize_t n_rows = rows.shape[0]
    cdef Py_ssize_t max_nodes = 2 * num_leaves - 1
    feature_a = np.full(max_nodes, -1, dtype=np.intp)
    bin_a = np.full(max_nodes, -1, dtype=np.intp)
    left_a = np.full(max_nodes, -1, dtype=np.intp)
    right_a = np.full(max_nodes, -1, dtype=np.intp)
    value_a = np.zeros(max_nodes, dtype=np.float64)
    gain_a = np.zeros(max_nodes, dtype=np.float64)
    cdef INTP_t[::1] feature = feature_a
    cdef INTP_t[::1] split_bin = bin_a
    cdef INTP_t[::1] left = left_a
    cdef INTP_t[::1] right = right_a
    cdef double[::1] value = value_a
    cdef double[::1] gain_rec = gain_a

    # one histogram slot per open leaf, plus one scratch slot
    slots_a = np.empty((num_leaves + 1, n_feat, n_bins, 3), dtype=np.float64)
    cdef double[:, :, :, ::1] slots = slots_a
    free_a = np.arange(num_leaves + 1, dtype=np.intp)
    cdef INTP_t[::1] free_slots = free_a
    cdef Py_ssize_t n_free = num_leaves + 1

    idx_a = np.array(rows, dtype=np.intp, copy=True)
    tmp_a = np.empty(max(n_rows, 1), dtype=np.intp)
    cdef INTP_t[::1] idx = idx_a
    cdef INTP_t[::1] tmp = tmp_a

    # open leaves in insertion order
    leaf_node_a = np.empty(num_leaves, dtype=np.intp)
    leaf_slot_a = np.empty(num_leaves, dtype=np.intp)
    leaf_start_a = np.empty(num_leaves, dtype=np.intp)
    leaf_stop_a = np.empty(num_leaves, dtype=np.intp)
    leaf_k_a = np.empty(num_leaves, dtype=np.intp)
    leaf_b_a = np.empty(num_leaves, dtype=np.intp)
    leaf_gain_a = np.empty(num_leaves, dtype=np.float64)
    cdef INTP_t[::1] leaf_node = leaf_node_a
    cdef INTP_t[::1] leaf_slot = leaf_slot_a
    cdef INTP_t[::1] leaf_start = leaf_start_a
    cdef INTP_t[::1] leaf_stop = leaf_stop_a
    cdef INTP_t[::1] leaf_k = leaf_k_a
    cdef INTP_t[::1] leaf_b = leaf_b_a
    cdef double[::1] leaf_gain = leaf_gain_a

    cdef Py_ssize_t n_open = 1, n_nodes = 1, n_leaves = 1
    cdef Py_ssize_t i, j, best_i, k, b, f, start, stop, mid, r, row
    cdef Py_ssize_t parent_slot, small_slot, l_id, r_id, l_slot, r_slot
    cdef Py_ssize_t kk, bb, q, n_right
    cdef double best_gain, G, H
    cdef double mcs = <double>min_child_samples
    cdef bint small_is_left

    with nogil:
        n_free -= 1
        leaf_slot[0] = free_slots[n_free]
        leaf_node[0] = 0
        leaf_start[0] = 0
        leaf_stop[0] = n_rows
        _fill_histogram(binned, idx, 0, n_rows, features, grad, hess, slots[leaf_slot[0]])
        leaf_gain[0] = _best_split(slots[leaf_slot[0]], n_bins_used, mcs, reg_lambda,
                                   min_gain, &kk, &bb)
        leaf_k[0] = kk
        leaf_b[0] = bb

        while n_leaves < num_leaves:
            best_i = -1
            best_gain = 0.0
            for i in range(n_open):
                if leaf_k[i] < 0:
                    continue
                if best_i < 0 or leaf_gain[i] > best_gain:
                    best_i = i
                    best_gain = leaf_gain[i]
            if best_i < 0:
                break
            k = leaf_k[best_i]
            b = leaf_b[best_i]
            f = features[k]
            start = leaf_start[best_i]
            stop = leaf_stop[best_i]
            parent_slot = leaf_slot[best_i]
            q = leaf_node[best_i]

            # stable partition of idx[start:stop]
            mid = start
            n_right = 0
            for r in range(start, stop):
                row = idx[r]
                if binned[row, f] <= b:
                    idx[mid] = row
                    mid += 1
                else:
                    tmp[n_right] = row
                    n_right += 1
            for r in range(n_right):
                idx[mid + r] = tmp[r]

            l_id = n_nodes
            r_id = n_nodes + 1
            n_nodes += 2
            feature[q] = f
            split_bin[q] = b
            left[q] = l_id
            right[q] = r_id
            gain_rec[q] = best_gain

            # remove parent from the open list, keeping order
            for j in range(best_i, n_open - 1):
                leaf_node[j] = leaf_node[j + 1]
                leaf_slot[j] = leaf_slot[j + 1]
                leaf_start[j] = leaf_start[j + 1]
                leaf_stop[j] = leaf_stop[j + 1]
                leaf_k[j] = leaf_k[j + 1]
                leaf_b[j] = leaf_b[j + 1]
                leaf_gain[j] = leaf_gain[j + 1]
            n_open -= 1

            small_is_left = (mid - start) <= (stop - mid)
            n_free -= 1
            small_slot = free_slots[n_free]
            if small_is_left:
                _fill_histogram(binned, idx, start, mid, features, grad, hess, slots[small_slot])
            else:
                _fill_histogram(binned, idx, mid, stop, features, grad, hess, slots[small_slot])
            # parent slot becomes the larger child's histogram
            for kk in range(n_feat):
                for bb in range(n_bins):
                    slots[parent_slot, kk, bb, 0] = slots[parent_slot, kk, bb, 0] - slots[small_slot, kk, bb, 0]
                    slots[parent_slot, kk, bb, 1] = slots[parent_slot, kk, bb, 1] - slots[small_slot, kk, bb, 1]
                    slots[parent_slot, kk, bb, 2] = slots[parent_slot, kk, bb, 2] - slots[small_slot, kk, bb, 2]
            if small_is_left:
                l_slot = small_slot
                r_slot = parent_slot
            else:
                l_slot = parent_slot
                r_slot = small_slot

            leaf_node[n_open] = l_id
            leaf_slot[n_open] = l_slot
            leaf_start[n_open] = start
            leaf_stop[n_open] = mid
            leaf_gain[n_open] = _best_split(slots[l_slot], n_bins_used, mcs, reg_lambda,
                                            min_gain, &kk, &bb)
            leaf_k[n_open] = kk
            leaf_b[n_open] = bb
            n_open += 1
            leaf_node[n_open] = r_id
            leaf_slot[n_open] = r_slot
            leaf_start[n_open] = mid
            leaf_stop[n_open] = stop
            leaf_gain[n_open] = _best_split(slots[r_slot], n_bins_used, mcs, reg_lambda,
                                            min_gain, &kk, &bb)
            leaf_k[n_open] = kk
            leaf_b[n_open] = bb
            n_open += 1
            n_leaves += 1

        for i in range(n_open):
            G = 0.0
            H = 0.0
            for r in range(leaf_start[i], leaf_stop[i]):
                G = G + grad[idx[r]]
                H = H + hess[idx[r]]
            if H + reg_lambda > 0.0:
                value[leaf_node[i]] = -G / (H + reg_lambda)

    return (feature_a[:n_nodes], bin_a[:n_nodes], left_a[:n_nodes], right_a[:n_nodes],
            value_a[:n_nodes], gain_a[:n_nodes])


def predict_ensemble(const double[:, ::1] X, const INTP_t[::1] feature,
                     const double[::1] threshold, const INTP_t[::1] left,
                     const INTP_t[::1] right, const double[::1] value,
                     const INTP_t[::1] roots, double[::1] out):
    """Add the output of every tree (given by ``roots``) to ``out`` in place."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t n_trees = roots.shape[0]
    cdef Py_ssize_t i, t, node
    cdef double acc
    with nogil:
        for i in range(n):
            acc = out[i]
            for t in range(n_trees):
                node = roots[t]
                while feature[node] >= 0:
                    if X[i, feature[node]] <= threshold[node]:
                        node = left[node]
                    else:
                        node = right[node]
                acc = acc + value[node]
            out[i] = acc
