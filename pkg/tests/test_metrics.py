import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from afsbm import metrics

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_mse_trivial_cases():
    assert metrics.mse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert metrics.mse([0, 0], [1, 1]) == 1.0
    assert metrics.mse([1], [3]) == 4.0


def test_mse_rows_sum_squared_error_vector():
    y = np.array([[0.0, 0.0], [1.0, 1.0]])
    yh = np.array([[1.0, 1.0], [1.0, 3.0]])
    # row errors 2 and 4, mean 3
    assert metrics.mse(y, yh) == 3.0


def test_mse_length_mismatch():
    with pytest.raises(ValueError, match="length mismatch"):
        metrics.mse([1, 2], [1])


@given(arrays(np.float64, st.integers(1, 30), elements=finite), st.data())
def test_mse_nonnegative_symmetric(y, data):
    yh = data.draw(arrays(np.float64, y.shape, elements=finite))
    a = metrics.mse(y, yh)
    assert a >= 0
    assert a == metrics.mse(yh, y)
    assert (a == 0) == bool(np.all(y == yh))


def test_cross_entropy_uniform_binary_is_ln2():
    assert abs(metrics.cross_entropy([0, 1, 1, 0], [0.5] * 4) - math.log(2)) <= 1e-9


def test_cross_entropy_perfect_prediction():
    assert metrics.cross_entropy([1, 0], [1.0, 0.0]) <= 2e-12
    onehot = np.eye(3)
    assert metrics.cross_entropy(onehot, onehot) <= 2e-12


def test_cross_entropy_confident_wrong_is_finite():
    v = metrics.cross_entropy([1], [0.0])
    assert math.isfinite(v)
    assert abs(v + math.log(metrics.CE_EPS)) < 1e-6


def test_cross_entropy_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        metrics.cross_entropy([1], [1.5])
    with pytest.raises(ValueError):
        metrics.cross_entropy(np.eye(2), np.array([[0.6, 0.6], [0.5, 0.5]]))


def test_cross_entropy_minimized_by_empirical_rate():
    y = np.array([1, 1, 1, 0])
    grid = np.linspace(0.01, 0.99, 99)
    losses = [metrics.cross_entropy(y, np.full(4, p)) for p in grid]
    assert abs(grid[int(np.argmin(losses))] - 0.75) < 1e-9


@given(st.lists(st.integers(0, 1), min_size=1, max_size=20), st.floats(0.0, 1.0))
def test_cross_entropy_nonnegative(labels, p):
    assert metrics.cross_entropy(labels, [p] * len(labels)) >= 0


def test_loss_for_task():
    assert metrics.loss_for_task("regression") is metrics.mse
    assert metrics.loss_for_task("binary_classification") is metrics.cross_entropy
    with pytest.raises(ValueError):
        metrics.loss_for_task("ranking")


# worked examples for the zero-padded aggregate
def test_averaged_single_constant_series():
    l_ave, l_ave2 = metrics.averaged_loss_sequences([[2.5, 2.5, 2.5]])
    assert l_ave.tolist() == [2.5, 2.5, 2.5]
    assert l_ave2.tolist() == [2.5, 2.5, 2.5]


def test_averaged_two_series_zero_padding():
    l_ave, l_ave2 = metrics.averaged_loss_sequences([[2.0], [0.0, 4.0]])
    assert l_ave.tolist() == [1.0, 2.0]
    assert l_ave2.tolist() == [1.0, 1.5]


def test_averaged_all_zero():
    l_ave, l_ave2 = metrics.averaged_loss_sequences([[0, 0], [0, 0, 0]])
    assert l_ave.tolist() == [0, 0, 0]
    assert l_ave2.tolist() == [0, 0, 0]


def test_averaged_empty_input():
    with pytest.raises(ValueError):
        metrics.averaged_loss_sequences([])


def test_unpadded_variant_ignores_finished_series():
    l_ave, _ = metrics.averaged_loss_sequences_unpadded([[2.0], [0.0, 4.0]])
    assert l_ave.tolist() == [1.0, 4.0]


@given(st.lists(st.lists(st.floats(0, 100), min_size=1, max_size=8), min_size=1, max_size=6), st.randoms())
def test_averaged_invariant_to_series_order(seqs, rnd):
    a = metrics.averaged_loss_sequences(seqs)
    shuffled = list(seqs)
    rnd.shuffle(shuffled)
    b = metrics.averaged_loss_sequences(shuffled)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-12, atol=1e-12)


@given(st.floats(0, 10), st.integers(1, 10))
def test_l_ave2_of_constant_is_constant(c, t):
    _, l_ave2 = metrics.averaged_loss_sequences([[c] * t])
    np.testing.assert_allclose(l_ave2, c, rtol=1e-12)
