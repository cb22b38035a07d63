import math
from datetime import datetime

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from afsbm.dataset import (
    BinaryMask,
    DataError,
    Dataset,
    SplitSpec,
    apply_mask,
    build_lag_features,
    build_rolling_features,
    build_series_features,
    build_time_encodings,
    delete_columns,
    fit_normalization,
    load_csv,
    normalize,
    save_csv,
    split,
    split_indices,
)


def _write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


# -- Dataset / BinaryMask ---------------------------------------------------------

def test_dataset_validates_shapes():
    with pytest.raises(DataError):
        Dataset(np.zeros((3, 2)), np.zeros(2), ("a", "b"))
    with pytest.raises(DataError):
        Dataset(np.zeros((3, 2)), np.zeros(3), ("a",))
    with pytest.raises(DataError):
        Dataset(np.zeros((3, 2)), np.zeros(3), ("a", "a"))


def test_dataset_is_read_only():
    d = Dataset(np.zeros((3, 2)), np.zeros(3), ("a", "b"))
    with pytest.raises(ValueError):
        d.features[0, 0] = 1.0


def test_mask_rejects_non_binary():
    with pytest.raises(ValueError):
        BinaryMask(np.array([0, 2, 1]))


def test_mask_history_never_readds():
    z = BinaryMask.ones(4)
    z.push([1, 0, 1, 1])
    z.push([1, 0, 0, 1])
    assert len(z.history) == 2
    with pytest.raises(ValueError):
        z.push([1, 1, 0, 1])


# -- CSV -------------------------------------------------------------------------

def test_load_csv_structure(tmp_path):
    path = _write(tmp_path, "a,b,y\n1,2,3\n4,5,6\n7,8,9\n")
    d = load_csv(path, "y")
    assert d.feature_names == ("a", "b")
    assert d.features.shape == (3, 2)
    assert d.targets.tolist() == [3, 6, 9]


def test_load_csv_target_column_order(tmp_path):
    path = _write(tmp_path, "y,a,b\n1,2,3\n")
    d = load_csv(path, "y")
    assert d.features.tolist() == [[2, 3]]


def test_load_csv_missing_target(tmp_path):
    path = _write(tmp_path, "a,b\n1,2\n")
    with pytest.raises(DataError, match="'y'"):
        load_csv(path, "y")


def test_load_csv_parse_error_names_row_and_column(tmp_path):
    path = _write(tmp_path, "a,b,y\n1,2,3\n4,abc,6\n")
    with pytest.raises(DataError, match=r"row 2, column 'b'"):
        load_csv(path, "y")


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(str(tmp_path / "none.csv"), "y")


def test_load_csv_duplicate_header(tmp_path):
    path = _write(tmp_path, "a,a,y\n1,2,3\n")
    with pytest.raises(DataError, match="duplicate"):
        load_csv(path, "y")


def test_csv_round_trip_with_timestamps(tmp_path):
    d = Dataset(
        np.array([[0.1, 1 / 3], [2.5, -7.0]]),
        np.array([1e-17, 3.0]),
        ("p", "q"),
        np.array(["2020-01-01T00:00:00", "2020-01-02T06:00:00"], dtype="datetime64[s]"),
    )
    path = str(tmp_path / "rt.csv")
    save_csv(d, path, target_column="t", timestamp_column="when")
    back = load_csv(path, "t", "when")
    assert back.feature_names == d.feature_names
    assert np.array_equal(back.features, d.features)
    assert np.array_equal(back.targets, d.targets)
    assert np.array_equal(back.timestamps, d.timestamps)


# -- normalization ---------------------------------------------------------------

def test_normalize_examples():
    X = np.array([[1.0, 5.0, 0.0], [2.0, 5.0, 10.0], [3.0, 5.0, 10.0]])
    d = Dataset(X, np.zeros(3), ("a", "b", "c"))
    out, params = normalize(d)
    assert out.features[:, 0].tolist() == [-1.0, 0.0, 1.0]
    assert out.features[:, 1].tolist() == [0.0, 0.0, 0.0]
    assert params.zero_spread.tolist() == [False, True, False]


def test_normalize_two_point_column():
    params = fit_normalization(np.array([[0.0], [10.0]]))
    assert params.transform(np.array([[0.0], [10.0]])).ravel().tolist() == [-1.0, 1.0]


def test_normalize_rejects_nan():
    with pytest.raises(DataError):
        fit_normalization(np.array([[1.0], [np.nan]]))


@given(arrays(np.float64, st.tuples(st.integers(1, 20), st.integers(1, 5)), elements=st.floats(-1e6, 1e6)))
def test_normalize_range_and_reproducible(X):
    params = fit_normalization(X)
    Z = params.transform(X)
    assert np.all(np.abs(Z) <= 1.0 + 1e-12)
    assert np.array_equal(params.transform(X), Z)
    back = params.from_dict(params.to_dict()).transform(X)
    assert np.array_equal(back, Z)


# -- splitting -------------------------------------------------------------------

def test_chronological_split_blocks():
    idx = split_indices(100, SplitSpec(mode="chronological"))
    assert idx["train"].tolist() == list(range(0, 50))
    assert idx["model_val"].tolist() == list(range(50, 70))
    assert idx["mask_val"].tolist() == list(range(70, 90))
    assert idx["test"].tolist() == list(range(90, 100))


def test_chronological_split_orders_by_timestamp():
    ts = np.array([f"2020-01-{d:02d}" for d in range(20, 0, -1)], dtype="datetime64[s]")
    idx = split_indices(20, SplitSpec(mode="chronological"), ts)
    # the last two timestamps are rows 1 and 0
    assert sorted(idx["test"].tolist()) == [0, 1]


def test_random_split_is_seeded():
    a = split_indices(100, SplitSpec(mode="random", seed=3))
    b = split_indices(100, SplitSpec(mode="random", seed=3))
    c = split_indices(100, SplitSpec(mode="random", seed=4))
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert not all(np.array_equal(a[k], c[k]) for k in a)


def test_split_too_small():
    with pytest.raises(DataError):
        split_indices(5, SplitSpec())


def test_splitspec_validation():
    with pytest.raises(ValueError):
        SplitSpec(test_fraction=0.5, mask_val_fraction=0.3, model_val_fraction=0.2)
    with pytest.raises(ValueError):
        SplitSpec(mode="shuffled")


@given(st.integers(10, 500), st.sampled_from(["random", "chronological"]), st.integers(0, 2**31))
def test_split_partition_property(n, mode, seed):
    idx = split_indices(n, SplitSpec(mode=mode, seed=seed))
    allrows = np.concatenate(list(idx.values()))
    assert sorted(allrows.tolist()) == list(range(n))


def test_split_returns_datasets():
    d = Dataset(np.arange(40.0).reshape(20, 2), np.arange(20.0), ("a", "b"))
    parts = split(d, SplitSpec(mode="chronological"))
    assert parts.test.targets.tolist() == [18.0, 19.0]
    assert parts.train.n_samples == 10


# -- masking ---------------------------------------------------------------------

def test_apply_mask_examples():
    X = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert apply_mask(X, [1, 0]).tolist() == [[1, 0], [3, 0]]
    assert np.array_equal(apply_mask(X, BinaryMask.ones(2)), X)
    assert not apply_mask(X, [0, 0]).any()
    with pytest.raises(ValueError):
        apply_mask(X, [1, 0, 1])


def test_apply_mask_leaves_input_untouched():
    X = np.array([[1.0, 2.0]])
    apply_mask(X, [0, 1])
    assert X.tolist() == [[1.0, 2.0]]


@given(arrays(np.float64, (6, 4), elements=st.floats(-1e3, 1e3)), st.lists(st.integers(0, 1), min_size=4, max_size=4))
def test_apply_mask_idempotent(X, bits):
    once = apply_mask(X, bits)
    assert np.array_equal(apply_mask(once, bits), once)


def test_delete_columns_examples():
    A = np.arange(6.0).reshape(2, 3)
    B = np.arange(9.0).reshape(3, 3)
    out = delete_columns(A, B, BinaryMask(np.array([1, 0, 1])))
    assert out.train.tolist() == [[0, 2], [3, 5]]
    assert out.mask_val.shape == (3, 2)
    assert out.mask.bits.tolist() == [1, 1]
    assert out.kept.tolist() == [0, 2]
    same = delete_columns(A, B, BinaryMask.ones(3))
    assert np.array_equal(same.train, A)
    with pytest.raises(ValueError):
        delete_columns(A, B, np.zeros(3, dtype=np.int8))
    with pytest.raises(ValueError):
        delete_columns(A, B, np.ones(2, dtype=np.int8))


@given(st.lists(st.integers(0, 1), min_size=1, max_size=10).filter(any))
def test_delete_columns_width_is_popcount(bits):
    X = np.ones((2, len(bits)))
    assert delete_columns(X, X, bits).train.shape[1] == sum(bits)


# -- time-series features --------------------------------------------------------

def test_lag_features_examples():
    d = build_lag_features([1, 2, 3, 4], [1])
    assert d.features.ravel().tolist() == [1, 2, 3]
    assert d.targets.tolist() == [2, 3, 4]
    d2 = build_lag_features([1, 2, 3, 4], [1, 2])
    assert d2.features.tolist() == [[2, 1], [3, 2]]
    with pytest.raises(ValueError):
        build_lag_features([1, 2, 3, 4], [10])
    with pytest.raises(ValueError):
        build_lag_features([1, 2, 3, 4], [])


def test_rolling_features_examples():
    d = build_rolling_features([2, 4, 6, 8], [2])
    # first complete row is t = 2, window (2, 4)
    assert d.features[0].tolist() == [3.0, 1.0]
    assert d.targets[0] == 6
    const = build_rolling_features([5.0] * 10, [3])
    assert not const.features[:, 1].any()
    one = build_rolling_features([1, 7, 3], [1])
    assert one.features.tolist() == [[1, 0], [7, 0]]
    with pytest.raises(ValueError):
        build_rolling_features([1, 2], [0])
    with pytest.raises(ValueError):
        build_rolling_features([1, 2], [3])


def test_time_encodings_hours():
    stamps = [datetime(2021, 1, 1, h) for h in (0, 6, 12)]
    enc, names = build_time_encodings(stamps)
    assert names[4:] == ["hour_sin", "hour_cos"]
    np.testing.assert_allclose(enc[:, 4:], [[0, 1], [1, 0], [0, -1]], atol=1e-12)
    np.testing.assert_allclose(enc[0, :2], [math.sin(2 * math.pi / 12), math.cos(2 * math.pi / 12)])


def test_time_encodings_reject_garbage():
    with pytest.raises(DataError):
        build_time_encodings(["not a date"])


@given(st.lists(st.floats(-100, 100), min_size=12, max_size=40), st.data())
def test_series_features_have_no_lookahead(values, data):
    y = np.array(values)
    t = data.draw(st.integers(8, len(y) - 1))
    a = build_series_features(y, lags=[1, 2], windows=[3, 5])
    y2 = y.copy()
    y2[t:] += 1000.0  # perturb the present and future
    b = build_series_features(y2, lags=[1, 2], windows=[3, 5])
    # rows are aligned: both drop the same warm-up rows; row r corresponds to t = r + 5
    r = t - 5
    np.testing.assert_allclose(a.features[r], b.features[r])


def test_series_features_combined_names():
    ts = np.array([f"2020-01-{d:02d}T00:00:00" for d in range(1, 21)], dtype="datetime64[s]")
    d = build_series_features(np.arange(20.0), lags=[1], windows=[2], timestamps=ts, time_encodings=True)
    assert d.feature_names[:3] == ("lag_1", "roll_mean_2", "roll_std_2")
    assert d.n_features == 9
    assert d.n_samples == 18
