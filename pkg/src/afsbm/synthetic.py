"""Synthetic regression benchmark with a known informative subset."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset


@dataclass(frozen=True)
class SyntheticSpec:
    n_samples: int = 300
    n_features: int = 100
    n_informative: int = 10
    noise_variance: float = 0.1
    seed: int = 0
    feature_low: float = 1e-3
    feature_high: float = 1.0

    def __post_init__(self):
        if self.n_samples < 1 or self.n_features < 1 or self.n_informative < 1:
            raise ValueError("sample, feature and informative counts must be positive")
        if self.n_informative > self.n_features:
            raise ValueError("n_informative cannot exceed n_features")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be non-negative")
        if self.feature_low <= 0:
            raise ValueError("feature_low must be positive so that x*log10(x) is defined")
        if self.feature_high <= self.feature_low:
            raise ValueError("feature_high must exceed feature_low")


def contribution(x):
    """Per-feature term x + sin x + cos x + x log10 x."""
    x = np.asarray(x, dtype=np.float64)
    return x + np.sin(x) + np.cos(x) + x * np.log10(x)


def target(X_informative, noise):
    return contribution(X_informative).sum(axis=1) + noise


def generate(spec):
    """Draw the benchmark; returns ``(dataset, informative_indices)``.

    Informative columns, distractor columns and the noise vector come from
    independent streams, so changing the distractor count leaves the
    informative block and ``y`` untouched.
    """
    inf_ss, noise_col_ss, eps_ss = np.random.SeedSequence(spec.seed).spawn(3)
    lo, hi = spec.feature_low, spec.feature_high
    n, k = spec.n_samples, spec.n_informative
    X_inf = np.random.default_rng(inf_ss).uniform(lo, hi, size=(n, k))
    X_noise = np.random.default_rng(noise_col_ss).uniform(lo, hi, size=(n, spec.n_features - k))
    eps = np.random.default_rng(eps_ss).normal(0.0, np.sqrt(spec.noise_variance), size=n)
    X = np.hstack([X_inf, X_noise])
    y = target(X_inf, eps)
    names = tuple(f"x{j}" for j in range(spec.n_features))
    return Dataset(X, y, names), list(range(k))
