"""Adaptive feature selection with binary masking (AFS-BM).

Each outer iteration trains the learner on the currently active columns
(model phase), then probes the trained model by zeroing one randomly drawn
column at a time on the mask-validation split (mask phase). A removal is
kept when the relative loss increase stays within ``delta_L``; every
rejected removal costs one unit of the slack ``mu``. Rejected columns are
restored, kept removals are deleted before the next outer iteration, and
the run stops after ``beta`` outer iterations that removed nothing.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List

import numpy as np

from . import learners
from .dataset import BinaryMask, apply_mask, delete_columns

log = logging.getLogger(__name__)

INDEX_SELECTION = "uniform_without_replacement"


@dataclass(frozen=True)
class AfsBmParams:
    mu: int = 5
    beta: int = 3
    delta_L: float = 0.01
    seed: int = 0
    max_outer_iterations: int = 50

    def __post_init__(self):
        if not (isinstance(self.mu, int) and self.mu >= 1):
            raise ValueError("mu must be a positive integer")
        if not (isinstance(self.beta, int) and self.beta >= 1):
            raise ValueError("beta must be a positive integer")
        if not (self.delta_L > 0 and math.isfinite(self.delta_L)):
            raise ValueError("delta_L must be a positive real")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise ValueError("seed must be an unsigned integer")
        if not (isinstance(self.max_outer_iterations, int) and self.max_outer_iterations >= 0):
            raise ValueError("max_outer_iterations must be a non-negative integer")


@dataclass
class Draw:
    index: int  # original feature index
    L_th_before: float
    L_mask: float
    accepted: bool
    mu_remaining: int
    guard: bool = False  # removal refused because it was the last active feature


@dataclass
class OuterIteration:
    iteration: int
    n_active_before: int
    L_th_initial: float
    L_th_final: float
    draws: List[Draw] = field(default_factory=list)
    removed: List[int] = field(default_factory=list)

    @property
    def n_accepted(self):
        return sum(d.accepted for d in self.draws)


@dataclass
class SelectionResult:
    feature_names: tuple
    final_mask: BinaryMask
    loss_trajectory: list
    iteration_log: List[OuterIteration]
    converged: bool
    params: AfsBmParams
    n_fits: int = 0

    @property
    def selected_indices(self):
        return [int(i) for i in np.flatnonzero(self.final_mask.bits)]

    @property
    def selected_feature_names(self):
        return [self.feature_names[i] for i in self.selected_indices]

    @property
    def sparsity(self):
        return self.final_mask.popcount / len(self.final_mask)

    @property
    def n_accepted(self):
        return sum(it.n_accepted for it in self.iteration_log)

    def to_dict(self):
        return {
            "feature_names": list(self.feature_names),
            "final_mask": self.final_mask.bits.tolist(),
            "mask_history": [h.tolist() for h in self.final_mask.history],
            "selected_feature_names": self.selected_feature_names,
            "sparsity": self.sparsity,
            "converged": self.converged,
            "n_fits": self.n_fits,
            "params": asdict(self.params),
            "seed": self.params.seed,
            "index_selection": INDEX_SELECTION,
            "loss_trajectory": [[int(k), float(v)] for k, v in self.loss_trajectory],
            "iterations": [
                {
                    "iteration": it.iteration,
                    "n_active_before": it.n_active_before,
                    "L_th_initial": it.L_th_initial,
                    "L_th_final": it.L_th_final,
                    "removed": list(it.removed),
                    "draws": [asdict(d) for d in it.draws],
                }
                for it in self.iteration_log
            ],
        }


def relevance_test(L_mask, L_th, delta_L):
    """True when removing the probed feature is acceptable.

    Uses the relative increase ``(L_mask - L_th) / L_th <= delta_L``; when
    the reference loss is exactly zero the absolute test ``L_mask <= delta_L``
    applies instead.
    """
    if not (math.isfinite(L_mask) and math.isfinite(L_th) and math.isfinite(delta_L)):
        raise ValueError("relevance test needs finite losses and tolerance")
    if delta_L <= 0 or L_th < 0:
        raise ValueError("delta_L must be positive and L_th non-negative")
    if L_th == 0:
        return L_mask <= delta_L
    return (L_mask - L_th) / L_th <= delta_L


def _masked_loss(model, X, y, bits):
    return float(learners.evaluate(model, apply_mask(X, bits), y))


def model_optimization_phase(learner, X_train, y_train, X_mask_val, y_mask_val, z_prev):
    """Fit on the masked training matrix and score on the masked mask-validation matrix.

    Returns ``(model, L_th)``.
    """
    model = learners.fit(learner, apply_mask(X_train, z_prev), y_train)
    L_th = _masked_loss(model, X_mask_val, y_mask_val, z_prev.bits if isinstance(z_prev, BinaryMask) else z_prev)
    return model, L_th


def mask_optimization_phase(model, X_mask_val, y_mask_val, z_prev, L_th, params, rng, index_map=None):
    """Probe single-feature removals against the fixed ``model``.

    Returns ``(z_hat, draws, L_th_final, guard_hit)``. ``index_map`` translates
    local column positions into original feature indices for the log.
    """
    if not math.isfinite(L_th):
        raise ValueError("L_th must be finite")
    bits = z_prev.bits if isinstance(z_prev, BinaryMask) else np.asarray(z_prev)
    z_hat = bits.astype(np.int8).copy()
    if index_map is None:
        index_map = np.arange(z_hat.size)
    mu = params.mu
    draws = []
    guard_hit = False
    pool = rng.permutation(np.flatnonzero(z_hat))
    for i in pool:
        if mu == 0:
            break
        if z_hat.sum() == 1:
            guard_hit = True
            draws.append(Draw(int(index_map[i]), L_th, float("nan"), False, mu, guard=True))
            log.info("refusing to remove the last active feature %d", index_map[i])
            break
        z_hat[i] = 0
        L_mask = _masked_loss(model, X_mask_val, y_mask_val, z_hat)
        before = L_th
        if relevance_test(L_mask, L_th, params.delta_L):
            L_th = L_mask
            accepted = True
        else:
            z_hat[i] = 1
            mu -= 1
            accepted = False
        draws.append(Draw(int(index_map[i]), before, L_mask, accepted, mu))
    return BinaryMask(z_hat), draws, L_th, guard_hit


def run_afs_bm(learner, train, mask_val, params):
    """Run AFS-BM on ``train`` (model fitting) and ``mask_val`` (mask scoring)."""
    if train.feature_names != mask_val.feature_names:
        raise ValueError("train and mask-validation sets must share feature columns")
    M = train.n_features
    if M < 2:
        raise ValueError("AFS-BM needs at least two features")
    rng = np.random.default_rng(params.seed)
    X_tr, X_mv = train.features, mask_val.features
    y_tr, y_mv = train.targets, mask_val.targets
    index_map = np.arange(M)
    z = BinaryMask.ones(M)
    final = BinaryMask.ones(M)
    beta = params.beta
    trajectory, iterations = [], []
    n_fits = 0
    converged = False
    for k in range(params.max_outer_iterations):
        model, L_th = model_optimization_phase(learner, X_tr, y_tr, X_mv, y_mv, z)
        n_fits += 1
        trajectory.append((k, L_th))
        record = OuterIteration(k, int(z.popcount), L_th, L_th)
        z_hat, draws, L_final, guard_hit = mask_optimization_phase(
            model, X_mv, y_mv, z, L_th, params, rng, index_map
        )
        record.draws = draws
        record.L_th_final = L_final
        for d in draws:
            if d.accepted:
                trajectory.append((k, d.L_mask))
        deletion = delete_columns(X_tr, X_mv, z_hat)
        record.removed = [int(index_map[j]) for j in np.flatnonzero(z_hat.bits == 0)]
        X_tr, X_mv = deletion.train, deletion.mask_val
        index_map = index_map[deletion.kept]
        unchanged = deletion.kept.size == z.bits.size
        z = deletion.mask
        new_bits = np.zeros(M, dtype=np.int8)
        new_bits[index_map] = 1
        final.push(new_bits)
        iterations.append(record)
        log.debug("iteration %d: L_th %.6g -> %.6g, %d active", k, L_th, L_final, index_map.size)
        if guard_hit:
            log.info("stopping: only one feature remains")
            break
        if unchanged:
            beta -= 1
        if beta == 0:
            converged = True
            break
    return SelectionResult(
        feature_names=train.feature_names,
        final_mask=final,
        loss_trajectory=trajectory,
        iteration_log=iterations,
        converged=converged,
        params=params,
        n_fits=n_fits,
    )
