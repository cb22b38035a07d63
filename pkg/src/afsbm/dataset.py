"""Tabular and time-series data: loading, normalization, splits, masking
and feature engineering.

All containers are immutable; every operation returns new arrays.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field
from datetime import datetime
from typing import NamedTuple, Optional, Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed input data."""


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple
    timestamps: Optional[np.ndarray] = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size else X.reshape(0, len(self.feature_names))
        if X.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        y = np.asarray(self.targets, dtype=np.float64).ravel()
        if X.shape[0] != y.shape[0]:
            raise DataError(f"row count {X.shape[0]} does not match target length {y.shape[0]}")
        names = tuple(str(n) for n in self.feature_names)
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} feature names for {X.shape[1]} columns")
        if len(set(names)) != len(names):
            raise DataError("feature names must be distinct")
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "targets", _frozen(y))
        object.__setattr__(self, "feature_names", names)
        if self.timestamps is not None:
            ts = _frozen(np.asarray(self.timestamps, dtype="datetime64[s]"), dtype="datetime64[s]")
            if ts.shape[0] != X.shape[0]:
                raise DataError("timestamps length does not match row count")
            object.__setattr__(self, "timestamps", ts)

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def take_rows(self, rows):
        rows = np.asarray(rows, dtype=np.intp)
        ts = None if self.timestamps is None else self.timestamps[rows]
        return Dataset(self.features[rows], self.targets[rows], self.feature_names, ts)

    def select_columns(self, cols):
        cols = np.asarray(cols, dtype=np.intp)
        return Dataset(
            self.features[:, cols],
            self.targets,
            tuple(self.feature_names[c] for c in cols),
            self.timestamps,
        )

    def with_features(self, features, feature_names=None):
        names = self.feature_names if feature_names is None else feature_names
        return Dataset(features, self.targets, names, self.timestamps)


@dataclass
class BinaryMask:
    """Feature mask ``z`` with the bit-vectors of completed iterations."""

    bits: np.ndarray
    history: list = field(default_factory=list)

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 1:
            raise ValueError("mask must be a vector")
        if bits.size and not np.all((bits == 0) | (bits == 1)):
            raise ValueError("mask entries must be 0 or 1")
        self.bits = bits.astype(np.int8)

    @classmethod
    def ones(cls, n):
        return cls(np.ones(n, dtype=np.int8))

    def __len__(self):
        return self.bits.shape[0]

    @property
    def popcount(self):
        return int(self.bits.sum())

    def active_indices(self):
        return np.flatnonzero(self.bits)

    def push(self, bits):
        """Archive the current bits and adopt ``bits``; features may only be removed."""
        bits = np.asarray(bits).astype(np.int8)
        if bits.shape != self.bits.shape:
            raise ValueError("history entries must share one index space")
        if np.any(bits > self.bits):
            raise ValueError("a removed feature cannot be re-added")
        self.history.append(self.bits.copy())
        self.bits = bits

    def copy(self):
        return BinaryMask(self.bits.copy(), [h.copy() for h in self.history])


def _mask_bits(z, width):
    bits = z.bits if isinstance(z, BinaryMask) else np.asarray(z)
    if bits.shape != (width,):
        raise ValueError(f"mask length {bits.shape[0] if bits.ndim else 0} != column count {width}")
    return bits


# -- loading ---------------------------------------------------------------

def _parse_timestamp(text, row):
    try:
        return np.datetime64(datetime.fromisoformat(text.strip()), "s")
    except ValueError as exc:
        raise DataError(f"row {row}: unparseable timestamp {text!r}") from exc


def load_csv(path, target_column, timestamp_column=None):
    """Read a headed, comma-separated numeric table into a :class:`Dataset`."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file, header row expected") from None
        seen = set()
        for name in header:
            if name in seen:
                raise DataError(f"duplicate column name {name!r} in header")
            seen.add(name)
        if target_column not in header:
            raise DataError(f"target column {target_column!r} not found in header")
        if timestamp_column is not None and timestamp_column not in header:
            raise DataError(f"timestamp column {timestamp_column!r} not found in header")
        t_idx = header.index(target_column)
        s_idx = header.index(timestamp_column) if timestamp_column is not None else None
        f_idx = [i for i in range(len(header)) if i not in (t_idx, s_idx)]
        rows, targets, stamps = [], [], []
        for r, record in enumerate(reader, start=1):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise DataError(f"row {r}: expected {len(header)} cells, got {len(record)}")
            values = []
            for i in f_idx + [t_idx]:
                cell = record[i].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"row {r}, column {header[i]!r}: cannot parse {cell!r} as a number"
                    ) from None
                values.append(v)
            rows.append(values[:-1])
            targets.append(values[-1])
            if s_idx is not None:
                stamps.append(_parse_timestamp(record[s_idx], r))
    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(f_idx))
    ts = np.array(stamps, dtype="datetime64[s]") if s_idx is not None else None
    return Dataset(X, np.array(targets), tuple(header[i] for i in f_idx), ts)


def save_csv(d, path, target_column="y", timestamp_column=None):
    """Write ``d`` as CSV readable by :func:`load_csv` (floats written with repr)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        head = list(d.feature_names) + [target_column]
        if timestamp_column is not None:
            head = [timestamp_column] + head
        w.writerow(head)
        for i in range(d.n_samples):
            row = [repr(float(v)) for v in d.features[i]] + [repr(float(d.targets[i]))]
            if timestamp_column is not None:
                row = [str(d.timestamps[i])] + row
            w.writerow(row)


# -- normalization -----------------------------------------------------------

@dataclass(frozen=True)
class NormalizationParams:
    means: np.ndarray
    scales: np.ndarray
    zero_spread: np.ndarray

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        squeeze = X.ndim == 1
        X2 = X.reshape(-1, 1) if squeeze else X
        if X2.shape[1] != self.means.shape[0]:
            raise ValueError("column count does not match normalization parameters")
        if np.isnan(X2).any():
            raise DataError("NaN in input")
        out = (X2 - self.means) / self.scales
        out[:, self.zero_spread] = 0.0
        return out.ravel() if squeeze else out

    def inverse_transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        squeeze = X.ndim == 1
        X2 = X.reshape(-1, 1) if squeeze else X
        out = X2 * self.scales + self.means
        return out.ravel() if squeeze else out

    def to_dict(self):
        return {
            "means": self.means.tolist(),
            "scales": self.scales.tolist(),
            "zero_spread": self.zero_spread.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(np.array(d["means"]), np.array(d["scales"]), np.array(d["zero_spread"], dtype=bool))


def fit_normalization(X):
    """Column means and post-centering max-abs scales mapping ``X`` into [-1, 1]."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if np.isnan(X).any():
        raise DataError("NaN in input")
    if X.shape[0] == 0:
        raise DataError("cannot normalize an empty matrix")
    if not np.all(np.isfinite(X)):
        raise DataError("non-finite value in input")
    means = X.mean(axis=0)
    zero_spread = np.ptp(X, axis=0) == 0
    scales = np.abs(X - means).max(axis=0)
    scales[zero_spread] = 1.0
    scales[scales == 0] = 1.0
    return NormalizationParams(means, scales, zero_spread)


def normalize(d):
    """Center and scale every column of ``d`` into [-1, 1]; returns ``(dataset, params)``."""
    params = fit_normalization(d.features)
    return d.with_features(params.transform(d.features)), params


# -- splitting -----------------------------------------------------------------

@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float = 0.10
    mask_val_fraction: float = 0.20
    model_val_fraction: float = 0.20
    mode: str = "chronological"
    seed: int = 0

    def __post_init__(self):
        for name in ("test_fraction", "mask_val_fraction", "model_val_fraction"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.test_fraction + self.mask_val_fraction + self.model_val_fraction >= 1.0:
            raise ValueError("split fractions must sum to less than 1")
        if self.mode not in ("chronological", "random"):
            raise ValueError(f"unknown split mode {self.mode!r}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


class Splits(NamedTuple):
    train: Dataset
    model_val: Dataset
    mask_val: Dataset
    test: Dataset
    indices: dict


def split_indices(n, spec, timestamps=None):
    n_test = int(round(n * spec.test_fraction))
    n_mask = int(round(n * spec.mask_val_fraction))
    n_model = int(round(n * spec.model_val_fraction))
    n_train = n - n_test - n_mask - n_model
    sizes = {"train": n_train, "model_val": n_model, "mask_val": n_mask, "test": n_test}
    empty = [k for k, v in sizes.items() if v <= 0]
    if empty or n < 10:
        raise DataError(f"dataset of {n} rows too small for the requested split (empty: {empty})")
    if spec.mode == "random":
        order = np.random.default_rng(spec.seed).permutation(n)
    elif timestamps is not None:
        order = np.argsort(np.asarray(timestamps), kind="stable")
    else:
        order = np.arange(n)
    out, start = {}, 0
    for key in ("train", "model_val", "mask_val", "test"):
        block = order[start : start + sizes[key]]
        out[key] = np.sort(block) if spec.mode == "random" else block
        start += sizes[key]
    return out


def split(d, spec):
    """Partition ``d`` into train / model_val / mask_val / test."""
    idx = split_indices(d.n_samples, spec, d.timestamps)
    return Splits(
        d.take_rows(idx["train"]),
        d.take_rows(idx["model_val"]),
        d.take_rows(idx["mask_val"]),
        d.take_rows(idx["test"]),
        idx,
    )


# -- masking -------------------------------------------------------------------

def apply_mask(X, z):
    """Hadamard product of ``X`` with the mask broadcast over rows."""
    X = np.asarray(X, dtype=np.float64)
    bits = _mask_bits(z, X.shape[1])
    return np.where(bits.astype(bool)[None, :], X, 0.0)


class ColumnDeletion(NamedTuple):
    train: np.ndarray
    mask_val: np.ndarray
    mask: BinaryMask
    kept: np.ndarray


def delete_columns(X_train, X_mask_val, z_hat):
    """Physically drop the columns where ``z_hat`` is 0.

    Returns the reduced matrices, a fresh all-ones mask of the new width and
    the kept column positions, which callers compose into a map back to the
    original feature indices.
    """
    X_train = np.asarray(X_train)
    X_mask_val = np.asarray(X_mask_val)
    if X_train.shape[1] != X_mask_val.shape[1]:
        raise ValueError("train and mask-validation matrices differ in width")
    bits = _mask_bits(z_hat, X_train.shape[1])
    kept = np.flatnonzero(bits)
    if kept.size == 0:
        raise ValueError("mask removes every feature; terminate instead of deleting")
    return ColumnDeletion(X_train[:, kept], X_mask_val[:, kept], BinaryMask.ones(kept.size), kept)


# -- time-series features ------------------------------------------------------

def _series(series):
    y = np.asarray(series, dtype=np.float64).ravel()
    if not np.all(np.isfinite(y)):
        raise DataError("series contains non-finite values")
    return y


def lag_matrix(y, lags):
    """Column ``y[t - lag]`` per lag; NaN where undefined."""
    out = np.full((y.shape[0], len(lags)), np.nan)
    for j, lag in enumerate(lags):
        out[lag:, j] = y[: y.shape[0] - lag]
    return out


def rolling_matrix(y, windows, offset=1):
    """Rolling mean and population std over ``y[t-offset-w+1 .. t-offset]``; NaN where incomplete."""
    n = y.shape[0]
    out = np.full((n, 2 * len(windows)), np.nan)
    for j, w in enumerate(windows):
        if w > n:
            continue
        view = np.lib.stride_tricks.sliding_window_view(y, w)  # view[s] = y[s : s + w]
        mean = view.mean(axis=1)
        dev = view - mean[:, None]
        std = np.sqrt((dev * dev).mean(axis=1))
        std[np.ptp(view, axis=1) == 0] = 0.0
        # window ending at t - offset starts at t - offset - w + 1
        first_t = w - 1 + offset
        if first_t < n:
            out[first_t:, 2 * j] = mean[: n - first_t]
            out[first_t:, 2 * j + 1] = std[: n - first_t]
    return out


def _check_positive_list(values, what):
    if len(values) == 0:
        raise ValueError(f"empty {what} list")
    for v in values:
        if int(v) != v or v < 1:
            raise ValueError(f"{what} must be positive integers, got {v!r}")
    return [int(v) for v in values]


def _drop_incomplete(F, y, names, timestamps=None):
    keep = ~np.isnan(F).any(axis=1)
    ts = None if timestamps is None else np.asarray(timestamps, dtype="datetime64[s]")[keep]
    return Dataset(F[keep], y[keep], tuple(names), ts)


def build_lag_features(series, lags, timestamps=None):
    """Regress ``y[t]`` on ``y[t - lag]`` for each lag; warm-up rows are dropped."""
    y = _series(series)
    lags = _check_positive_list(lags, "lag")
    if max(lags) >= y.shape[0]:
        raise ValueError(f"lag {max(lags)} not smaller than series length {y.shape[0]}")
    F = lag_matrix(y, lags)
    return _drop_incomplete(F, y, [f"lag_{lag}" for lag in lags], timestamps)


def build_rolling_features(series, windows, timestamps=None):
    """Rolling mean / population std of the ``w`` values strictly before each ``t``."""
    y = _series(series)
    windows = _check_positive_list(windows, "window")
    if max(windows) > y.shape[0]:
        raise ValueError(f"window {max(windows)} exceeds series length {y.shape[0]}")
    F = rolling_matrix(y, windows)
    names = []
    for w in windows:
        names += [f"roll_mean_{w}", f"roll_std_{w}"]
    return _drop_incomplete(F, y, names, timestamps)


TIME_ENCODING_NAMES = ("month_sin", "month_cos", "day_sin", "day_cos", "hour_sin", "hour_cos")


def _to_datetimes(timestamps):
    out = []
    for t in timestamps:
        if isinstance(t, datetime):
            out.append(t)
        elif isinstance(t, str):
            try:
                out.append(datetime.fromisoformat(t.strip()))
            except ValueError as exc:
                raise DataError(f"unparseable timestamp {t!r}") from exc
        else:
            try:
                out.append(np.datetime64(t, "s").astype(datetime))
            except (ValueError, TypeError) as exc:
                raise DataError(f"unparseable timestamp {t!r}") from exc
    return out


def build_time_encodings(timestamps):
    """Sine/cosine encodings of month (period 12), day (31) and hour (24).

    Returns ``(matrix, names)`` with six columns per row.
    """
    rows = []
    for dt in _to_datetimes(timestamps):
        row = []
        for value, period in ((dt.month, 12), (dt.day, 31), (dt.hour, 24)):
            phase = 2.0 * math.pi * value / period
            row += [math.sin(phase), math.cos(phase)]
        rows.append(row)
    return np.array(rows, dtype=np.float64).reshape(len(rows), 6), list(TIME_ENCODING_NAMES)


def build_series_features(
    series,
    lags: Sequence[int] = (1, 2, 3),
    windows: Sequence[int] = (),
    rolling_offsets: Sequence[int] = (1,),
    timestamps=None,
    time_encodings=False,
):
    """Combined lag / rolling / calendar design matrix for one series.

    ``rolling_offsets`` lists which lagged value each rolling window ends on
    (1 means the window closes at ``y[t-1]``). Rows with any undefined
    feature are dropped.
    """
    y = _series(series)
    blocks, names = [], []
    if lags:
        lags = _check_positive_list(lags, "lag")
        if max(lags) >= y.shape[0]:
            raise ValueError(f"lag {max(lags)} not smaller than series length {y.shape[0]}")
        blocks.append(lag_matrix(y, lags))
        names += [f"lag_{lag}" for lag in lags]
    if windows:
        windows = _check_positive_list(windows, "window")
        for off in _check_positive_list(rolling_offsets, "rolling offset"):
            blocks.append(rolling_matrix(y, windows, offset=off))
            for w in windows:
                suffix = f"{w}" if off == 1 else f"{w}_lag{off}"
                names += [f"roll_mean_{suffix}", f"roll_std_{suffix}"]
    if time_encodings:
        if timestamps is None:
            raise ValueError("time encodings need timestamps")
        enc, enc_names = build_time_encodings(timestamps)
        blocks.append(enc)
        names += enc_names
    if not blocks:
        raise ValueError("no features requested")
    return _drop_incomplete(np.hstack(blocks), y, names, timestamps)
