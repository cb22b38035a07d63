"""Experiment orchestration: tuning, selection, final evaluation and reports.

A run tunes every learner on the model-validation split, then for each
selector tunes the selector's own parameters the same way, retrains on the
selected columns and touches the test split exactly once per cell.
"""
from __future__ import annotations

import glob
import itertools
import json
import logging
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from . import __version__, baselines, kernels, learners, metrics
from .dataset import (
    BinaryMask,
    DataError,
    Dataset,
    NormalizationParams,
    SplitSpec,
    build_series_features,
    fit_normalization,
    load_csv,
    split,
)
from .learners import ConfigError, LearnerConfig
from .selection import INDEX_SELECTION, AfsBmParams, run_afs_bm
from .synthetic import SyntheticSpec, generate

log = logging.getLogger(__name__)

SELECTORS = ("vanilla", "cross_correlation", "mutual_information", "rfe", "afs_bm")
TIMING_KEYS = frozenset({"wall_time_s"})
JOBS_ENV = "AFSBM_JOBS"

# Value sets the selector grids may draw from when paper_mode is on.
REFERENCE_SELECTOR_GRIDS = {
    "cross_correlation": {"gamma": [0.02, 0.03, 0.04, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.50]},
    "afs_bm": {
        "mu": [5, 6, 7, 8, 9, 10],
        "beta": [3, 4, 5, 6, 7],
        "delta_L": [0.01, 0.015, 0.02, 0.025, 0.03, 0.04, 0.05],
    },
}

DEFAULT_SELECTOR_GRIDS = {
    "vanilla": {},
    "cross_correlation": {"gamma": REFERENCE_SELECTOR_GRIDS["cross_correlation"]["gamma"]},
    "mutual_information": {"k": "all", "mi_bins": [10]},
    "rfe": {"k": "all"},
    # the full 210-cell product is available but slow; this is a cheap default
    "afs_bm": {"mu": [5, 10], "beta": [3], "delta_L": [0.01, 0.02, 0.05]},
}

DEFAULT_LEARNER = {
    "name": "gbdt",
    "kind": "gbdt",
    "params": {"num_leaves": 20, "n_estimators": 100},
    "grid": {"learning_rate": [0.1, 0.5], "min_child_samples": [5, 10]},
}


class ExperimentError(ValueError):
    """The experiment configuration or its data cannot be used."""


class GridSearchError(RuntimeError):
    """Every cell of a grid failed."""


# -- configuration ---------------------------------------------------------------

@dataclass
class ExperimentConfig:
    dataset: dict
    task: str = "regression"
    split: dict = field(default_factory=dict)
    normalize: bool = False
    learners: list = field(default_factory=lambda: [json.loads(json.dumps(DEFAULT_LEARNER))])
    selectors: dict = field(default_factory=lambda: {s: {} for s in SELECTORS})
    seed: int = 0
    paper_mode: bool = False
    output_dir: str = "afsbm_output"
    jobs: Optional[int] = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        kind = self.dataset.get("kind") if isinstance(self.dataset, dict) else None
        if kind not in ("synthetic", "csv", "series"):
            raise ExperimentError("dataset.kind must be one of synthetic, csv, series")
        if kind in ("csv", "series") and "path" not in self.dataset:
            raise ExperimentError(f"dataset of kind {kind!r} needs a path")
        if kind == "csv" and "target" not in self.dataset:
            raise ExperimentError("csv dataset needs a target column")
        if self.task not in ("regression", "binary_classification"):
            raise ExperimentError(f"unknown task {self.task!r}")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise ExperimentError("seed must be a non-negative integer")
        if self.jobs is not None and not (isinstance(self.jobs, int) and self.jobs >= 1):
            raise ExperimentError("jobs must be a positive integer")
        unknown = set(self.selectors) - set(SELECTORS)
        if unknown:
            raise ExperimentError(f"unknown selectors {sorted(unknown)}")
        if not self.selectors:
            raise ExperimentError("no selectors configured")
        if not self.learners:
            raise ExperimentError("no learners configured")
        names = [l.get("name", l.get("kind")) for l in self.learners]
        if len(set(names)) != len(names):
            raise ExperimentError("learner names must be distinct")
        SplitSpec(**self.split_fields(0))
        for entry in self.learners:
            grid = entry.get("grid", {})
            for cell in expand_grid(grid):
                self.learner_config(entry, cell)
            if self.paper_mode:
                learners.check_reference_grid(entry.get("kind", "gbdt"), grid)
        for name in self.selectors:
            grid = self.selector_grid(name)
            for key, values in grid.items():
                if isinstance(values, list) and not values:
                    raise ExperimentError(f"selector {name}: empty grid for {key}")
            if self.paper_mode:
                _check_selector_reference_grid(name, grid)

    def split_fields(self, seed):
        default_mode = "chronological" if self.dataset["kind"] == "series" else "random"
        out = {"mode": default_mode, "seed": seed}
        out.update({k: v for k, v in self.split.items() if k != "seed"})
        return out

    def learner_config(self, entry, cell):
        params = dict(entry.get("params", {}))
        params.update(cell)
        params.update(kind=entry.get("kind", "gbdt"), task=self.task, seed=self.seed)
        try:
            return LearnerConfig(**params)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def selector_grid(self, name):
        grid = dict(DEFAULT_SELECTOR_GRIDS[name])
        grid.update(self.selectors.get(name) or {})
        return grid

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ExperimentError(f"unknown configuration keys: {sorted(unknown)}")
        if "dataset" not in d:
            raise ExperimentError("configuration needs a dataset section")
        return cls(**d)


def _check_selector_reference_grid(name, grid):
    allowed = REFERENCE_SELECTOR_GRIDS.get(name, {})
    for key, values in grid.items():
        if key == "k":
            if values != "all" and any(int(v) < 2 for v in _as_list(values)):
                raise ConfigError(f"{name}.k values must be at least 2")
            continue
        if key not in allowed:
            continue
        for v in _as_list(values):
            if not any(np.isclose(v, a) for a in allowed[key]):
                raise ConfigError(f"{name}.{key}={v!r} is outside the benchmark grid {allowed[key]}")


def load_config(path):
    """Read a JSON experiment configuration; relative data paths resolve against its folder."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ExperimentError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ExperimentError(f"{path}: top level must be an object")
    ds = raw.get("dataset")
    if isinstance(ds, dict) and "path" in ds and not os.path.isabs(ds["path"]):
        ds["path"] = os.path.normpath(os.path.join(os.path.dirname(os.path.abspath(path)), ds["path"]))
    return ExperimentConfig.from_dict(raw)


def default_jobs(config):
    if config.jobs is not None:
        return config.jobs
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise ExperimentError(f"{JOBS_ENV} must be an integer, got {env!r}") from None
        return max(1, jobs)
    return 1


# -- grid search -----------------------------------------------------------------

def _as_list(values):
    return list(values) if isinstance(values, (list, tuple)) else [values]


def expand_grid(grid):
    """Full factorial expansion in declared key order; scalars count as one value."""
    keys = list(grid)
    lists = [_as_list(grid[k]) for k in keys]
    return [dict(zip(keys, combo)) for combo in itertools.product(*lists)]


@dataclass
class GridResult:
    best: dict
    best_loss: float
    best_index: int
    trials: list
    payload: object = None


def grid_search(grid, objective, validate=None):
    """Return the cell minimizing ``objective``; ties go to the earliest cell.

    ``objective(cell)`` returns a loss or ``(loss, payload)``. ``validate`` is
    called on every cell before any objective evaluation so that malformed
    grids fail fast. Failing cells are recorded and skipped.
    """
    cells = grid if isinstance(grid, list) else expand_grid(grid)
    if not cells:
        raise ValueError("empty grid")
    if validate is not None:
        for cell in cells:
            validate(cell)
    trials = []
    best_i, best_loss, best_payload = -1, float("inf"), None
    for i, cell in enumerate(cells):
        try:
            out = objective(cell)
        except Exception as exc:  # noqa: BLE001 - isolate one bad cell
            log.warning("grid cell %s failed: %s", cell, exc)
            trials.append({"params": cell, "loss": None, "error": f"{type(exc).__name__}: {exc}"})
            continue
        loss, payload = out if isinstance(out, tuple) else (out, None)
        loss = float(loss)
        if not np.isfinite(loss):
            trials.append({"params": cell, "loss": None, "error": "non-finite loss"})
            continue
        trials.append({"params": cell, "loss": loss})
        if loss < best_loss:
            best_i, best_loss, best_payload = i, loss, payload
    if best_i < 0:
        raise GridSearchError(f"all {len(cells)} grid cells failed")
    return GridResult(cells[best_i], best_loss, best_i, trials, best_payload)


# -- data preparation ------------------------------------------------------------

@dataclass
class Source:
    name: str
    data: Dataset
    seed: int
    informative: Optional[list] = None


def load_sources(config):
    """Raw (unnormalized) datasets the experiment runs on, one per series."""
    ds = dict(config.dataset)
    kind = ds.pop("kind")
    if kind == "synthetic":
        ds.setdefault("seed", config.seed)
        try:
            spec = SyntheticSpec(**ds)
        except TypeError as exc:
            raise ExperimentError(f"synthetic dataset: {exc}") from None
        data, informative = generate(spec)
        return [Source("synthetic", data, config.seed, informative)]
    if kind == "csv":
        data = load_csv(ds["path"], ds["target"], ds.get("timestamp"))
        return [Source(os.path.basename(ds["path"]), data, config.seed)]
    path = ds["path"]
    if os.path.isdir(path):
        files = sorted(glob.glob(os.path.join(path, "*.csv")))
        if not files:
            raise DataError(f"no CSV files in {path}")
    elif os.path.exists(path):
        files = [path]
    else:
        raise FileNotFoundError(f"no such file or directory: {path}")
    limit = ds.get("max_series")
    if limit is not None and limit < len(files):
        pick = np.random.default_rng(config.seed).choice(len(files), int(limit), replace=False)
        files = [files[i] for i in sorted(pick)]
    out = []
    for i, f in enumerate(files):
        raw = load_csv(f, ds.get("value_column", "y"), ds.get("timestamp_column"))
        data = build_series_features(
            raw.targets,
            lags=ds.get("lags", (1, 2, 3)),
            windows=ds.get("windows", ()),
            rolling_offsets=ds.get("rolling_offsets", (1,)),
            timestamps=raw.timestamps,
            time_encodings=ds.get("time_encodings", False),
        )
        out.append(Source(os.path.basename(f), data, config.seed + i))
    return out


def _normalized(d, fx, fy):
    X = fx.transform(d.features) if fx is not None else d.features
    y = fy.transform(d.targets) if fy is not None else d.targets
    return Dataset(X, y, d.feature_names, d.timestamps)


def prepare_splits(config, source):
    """Split ``source`` and, if requested, normalize with train-fitted parameters."""
    spec = SplitSpec(**config.split_fields(source.seed))
    parts = split(source.data, spec)
    norm = None
    if config.normalize:
        fx = fit_normalization(parts.train.features) if source.data.n_features else None
        fy = fit_normalization(parts.train.targets) if config.task == "regression" else None
        parts = parts._replace(
            train=_normalized(parts.train, fx, fy),
            model_val=_normalized(parts.model_val, fx, fy),
            mask_val=_normalized(parts.mask_val, fx, fy),
            test=_normalized(parts.test, fx, fy),
        )
        norm = {
            "features": fx.to_dict() if fx is not None else None,
            "target": fy.to_dict() if fy is not None else None,
        }
    return parts, norm


# -- per-cell work ---------------------------------------------------------------

class TestAccess:
    """Wraps the test split and counts every read."""

    __test__ = False  # not a pytest class

    def __init__(self, data):
        self._data = data
        self.reads = 0

    def evaluate(self, model, cols):
        self.reads += 1
        X = self._data.features[:, cols]
        y = self._data.targets
        return _losses(model, X, y)


def _losses(model, X, y):
    """Aggregate loss and per-sample losses."""
    pred = learners.predict(model, X)
    loss_fn = metrics.loss_for_task(model.config.task)
    per = [float(loss_fn(y[i : i + 1], pred[i : i + 1])) for i in range(y.shape[0])]
    return float(loss_fn(y, pred)), per


class _MaskScorer:
    """Fits the tuned learner on a column subset and scores it on model_val, memoized."""

    def __init__(self, cfg, train, model_val):
        self.cfg, self.train, self.model_val = cfg, train, model_val
        self._memo = {}

    def __call__(self, bits, model=None):
        bits = np.asarray(bits, dtype=np.int8)
        cols = np.flatnonzero(bits)
        if cols.size == 0:
            raise ValueError("selector kept no features")
        key = bits.tobytes()
        if key not in self._memo:
            if model is None:
                model = learners.fit(self.cfg, self.train.features[:, cols], self.train.targets)
            loss = learners.evaluate(model, self.model_val.features[:, cols], self.model_val.targets)
            self._memo[key] = (float(loss), model)
        return self._memo[key]


def _resolve_k(values, M):
    ks = list(range(2, M + 1)) if values == "all" else [int(v) for v in _as_list(values)]
    if M < 2 and values == "all":
        ks = [1]
    bad = [k for k in ks if not 1 <= k <= M]
    if bad:
        raise ConfigError(f"k values {bad} outside [1, {M}]")
    return ks


def _select_vanilla(grid, cfg, train, mask_val, score):
    bits = np.ones(train.n_features, dtype=np.int8)
    loss, model = score(bits)
    return {"params": {}, "bits": bits, "scores": None, "log": None, "search": [], "model": model}


def _select_cross_correlation(grid, cfg, train, mask_val, score):
    r = baselines.pearson_scores(train.features, train.targets)

    def objective(cell):
        bits = (np.abs(r) > cell["gamma"]).astype(np.int8)
        loss, model = score(bits)
        return loss, (bits, model)

    res = grid_search(grid, objective, validate=lambda c: baselines.BaselineParams("cross_correlation", gamma=c["gamma"]))
    bits, model = res.payload
    return {"params": res.best, "bits": bits, "scores": r.tolist(), "log": None, "search": res.trials, "model": model}


def _select_mutual_information(grid, cfg, train, mask_val, score):
    M = train.n_features
    cells = expand_grid({"k": _resolve_k(grid.get("k", "all"), M), "mi_bins": grid.get("mi_bins", 10)})
    classification = cfg.task == "binary_classification"
    cache = {}

    def objective(cell):
        b = cell["mi_bins"]
        if b not in cache:
            cache[b] = baselines.mutual_information_scores(train.features, train.targets, b, classification)
        bits = baselines.top_k_mask(cache[b], cell["k"]).bits
        loss, model = score(bits)
        return loss, (bits, model, cache[b])

    res = grid_search(cells, objective, validate=lambda c: baselines.BaselineParams("mutual_information", k=c["k"], mi_bins=int(c["mi_bins"])))
    bits, model, s = res.payload
    return {"params": res.best, "bits": bits, "scores": s.tolist(), "log": None, "search": res.trials, "model": model}


def _select_rfe(grid, cfg, train, mask_val, score):
    M = train.n_features
    ks = _resolve_k(grid.get("k", "all"), M)
    path = baselines.rfe_path(cfg, train.features, train.targets, min(ks), keep_models=True, fit_final=True)

    def objective(cell):
        bits = path.mask_for(cell["k"]).bits
        loss, model = score(bits, model=path.model_for(cell["k"]))
        return loss, (bits, model)

    res = grid_search([{"k": k} for k in ks], objective)
    bits, model = res.payload
    rounds = [{"active": r.active, "importance": r.importance, "eliminated": r.eliminated} for r in path.rounds]
    return {
        "params": res.best,
        "bits": bits,
        "scores": path.scores().tolist(),
        "log": {"rounds": rounds, "n_fits": path.n_fits},
        "search": res.trials,
        "model": model,
    }


def _select_afs_bm(grid, cfg, train, mask_val, score):
    extra = {k: grid[k] for k in ("max_outer_iterations",) if k in grid}
    cells = expand_grid({k: grid[k] for k in ("mu", "beta", "delta_L")})

    def make(cell):
        return AfsBmParams(mu=int(cell["mu"]), beta=int(cell["beta"]), delta_L=float(cell["delta_L"]), seed=cfg.seed, **extra)

    def objective(cell):
        result = run_afs_bm(cfg, train, mask_val, make(cell))
        bits = result.final_mask.bits.copy()
        loss, model = score(bits)
        return loss, (bits, model, result)

    res = grid_search(cells, objective, validate=make)
    bits, model, result = res.payload
    return {"params": res.best, "bits": bits, "scores": None, "log": result.to_dict(), "search": res.trials, "model": model}


_SELECT = {
    "vanilla": _select_vanilla,
    "cross_correlation": _select_cross_correlation,
    "mutual_information": _select_mutual_information,
    "rfe": _select_rfe,
    "afs_bm": _select_afs_bm,
}

# which splits each selector reads while choosing features
_SELECTION_SPLITS = {
    "vanilla": [],
    "cross_correlation": ["train"],
    "mutual_information": ["train"],
    "rfe": ["train"],
    "afs_bm": ["train", "mask_val"],
}


def run_cell(selector, grid, learner_name, cfg, parts, informative=None):
    """Tune ``selector`` for the tuned learner ``cfg`` and evaluate once on test."""
    t0 = time.perf_counter()
    record = {"selector": selector, "learner": learner_name, "seed": cfg.seed, "status": "ok"}
    test = TestAccess(parts.test)
    try:
        score = _MaskScorer(cfg, parts.train, parts.model_val)
        # selectors never receive the test split
        mask_val = parts.mask_val if selector == "afs_bm" else None
        out = _SELECT[selector](grid, cfg, parts.train, mask_val, score)
        bits = out["bits"]
        cols = np.flatnonzero(bits)
        val_loss, model = score(bits)
        test_loss, per_sample = test.evaluate(model, cols)
        names = [parts.train.feature_names[i] for i in cols]
        record.update(
            selector_params=out["params"],
            learner_params=cfg.to_dict(),
            selection_splits=_SELECTION_SPLITS[selector],
            model_val_loss=val_loss,
            test_loss=test_loss,
            test_sample_losses=per_sample,
            n_selected=int(cols.size),
            selected_indices=cols.tolist(),
            selected_features=names,
            mask=bits.tolist(),
            scores=out["scores"],
            selection_log=out["log"],
            selector_search=out["search"],
            model=model.to_dict(),
        )
        if informative is not None:
            inf = set(informative)
            record["n_informative_selected"] = sum(int(i) in inf for i in cols)
            record["n_redundant_selected"] = int(cols.size) - record["n_informative_selected"]
    except Exception as exc:  # noqa: BLE001 - one failing cell must not void the run
        log.warning("cell %s/%s failed: %s", selector, learner_name, exc)
        record.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    record["test_reads"] = test.reads
    record["wall_time_s"] = time.perf_counter() - t0
    return record


def tune_learner(config, entry, parts):
    """Grid-search one learner on all features against model_val."""
    def objective(cell):
        cfg = config.learner_config(entry, cell)
        model = learners.fit(cfg, parts.train.features, parts.train.targets)
        return learners.evaluate(model, parts.model_val.features, parts.model_val.targets), cfg

    res = grid_search(entry.get("grid", {}), objective, validate=lambda c: config.learner_config(entry, c))
    return res


def _pmap(fn, items, jobs):
    if jobs <= 1 or len(items) <= 1:
        return [fn(*it) for it in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(fn, *it) for it in items]
        return [f.result() for f in futures]


def run_source(config, source, jobs=1):
    """Full pipeline for one dataset; returns its section of the report."""
    t0 = time.perf_counter()
    parts, norm = prepare_splits(config, source)
    section = {
        "name": source.name,
        "seed": source.seed,
        "n_samples": source.data.n_samples,
        "n_features": source.data.n_features,
        "feature_names": list(source.data.feature_names),
        "informative": source.informative,
        "split_indices": {k: v.tolist() for k, v in parts.indices.items()},
        "normalization": norm,
        "learner_tuning": {},
    }
    tuned = {}
    for entry in config.learners:
        name = entry.get("name", entry.get("kind"))
        try:
            res = tune_learner(config, entry, parts)
            tuned[name] = res.payload
            section["learner_tuning"][name] = {
                "status": "ok",
                "best_params": res.best,
                "model_val_loss": res.best_loss,
                "search": res.trials,
            }
        except Exception as exc:  # noqa: BLE001
            log.warning("tuning %s failed: %s", name, exc)
            section["learner_tuning"][name] = {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}
    jobs_list = []
    for selector in SELECTORS:
        if selector not in config.selectors:
            continue
        grid = config.selector_grid(selector)
        for entry in config.learners:
            name = entry.get("name", entry.get("kind"))
            if name in tuned:
                jobs_list.append((selector, grid, name, tuned[name], parts, source.informative))
    cells = _pmap(run_cell, jobs_list, jobs)
    for entry in config.learners:
        name = entry.get("name", entry.get("kind"))
        if name not in tuned:
            for selector in SELECTORS:
                if selector in config.selectors:
                    cells.append({"selector": selector, "learner": name, "status": "failed",
                                  "error": "learner tuning failed", "test_reads": 0, "wall_time_s": 0.0})
    for c in cells:
        if c["status"] == "ok" and c["test_reads"] != 1:
            raise AssertionError(f"cell {c['selector']}/{c['learner']} read the test split {c['test_reads']} times")
    section["cells"] = cells
    section["wall_time_s"] = time.perf_counter() - t0
    return section


def _metadata():
    return {
        "package_version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "kernel_backend": kernels.BACKEND,
        "cross_entropy_eps": metrics.CE_EPS,
        "afs_bm_index_selection": INDEX_SELECTION,
        "rolling_std": "population",
    }


def _aggregate(sections):
    """Zero-padded average of per-sample test losses across series, per cell."""
    groups = {}
    for sec in sections:
        for c in sec["cells"]:
            if c["status"] == "ok":
                groups.setdefault(f"{c['selector']}/{c['learner']}", []).append(c["test_sample_losses"])
    out = {}
    for key, seqs in groups.items():
        l_ave, l_ave2 = metrics.averaged_loss_sequences(seqs)
        u_ave, u_ave2 = metrics.averaged_loss_sequences_unpadded(seqs)
        out[key] = {
            "n_series": len(seqs),
            "l_ave": l_ave.tolist(),
            "l_ave2": l_ave2.tolist(),
            "unpadded_l_ave": u_ave.tolist(),
            "unpadded_l_ave2": u_ave2.tolist(),
            "final_l_ave2": float(l_ave2[-1]),
        }
    return out


def run_experiment(config, jobs=None):
    """Run every selector x learner cell on every dataset and return the report."""
    t0 = time.perf_counter()
    jobs = default_jobs(config) if jobs is None else jobs
    sources = load_sources(config)
    if len(sources) > 1:
        sections = _pmap(run_source, [(config, s, 1) for s in sources], jobs)
    else:
        sections = [run_source(config, sources[0], jobs)]
    report = {
        "format_version": 1,
        "config": config.to_dict(),
        "metadata": _metadata(),
        "series": sections,
        "test_access": {
            f"{sec['name']}:{c['selector']}/{c['learner']}": c["test_reads"]
            for sec in sections
            for c in sec["cells"]
        },
    }
    if config.dataset["kind"] == "synthetic":
        report["metadata"]["feature_distribution"] = "uniform[{}, {}]".format(
            config.dataset.get("feature_low", SyntheticSpec.feature_low),
            config.dataset.get("feature_high", SyntheticSpec.feature_high),
        )
    if len(sections) > 1:
        report["aggregate"] = _aggregate(sections)
    report["wall_time_s"] = time.perf_counter() - t0
    return report


# -- reports ---------------------------------------------------------------------

def strip_timing(obj):
    """Copy of ``obj`` without timing fields, for determinism comparisons."""
    if isinstance(obj, dict):
        return {k: strip_timing(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


def report_table(report):
    """Plain-text summary: one row per series x selector x learner."""
    header = ("series", "selector", "learner", "val_loss", "test_loss", "n_feat", "inf", "red")
    rows = []
    for sec in report["series"]:
        for c in sec["cells"]:
            if c["status"] != "ok":
                rows.append((sec["name"], c["selector"], c["learner"], "FAILED", c.get("error", ""), "", "", ""))
                continue
            rows.append((
                sec["name"], c["selector"], c["learner"],
                f"{c['model_val_loss']:.6g}", f"{c['test_loss']:.6g}", str(c["n_selected"]),
                str(c.get("n_informative_selected", "-")), str(c.get("n_redundant_selected", "-")),
            ))
    widths = [max(len(str(r[i])) for r in rows + [header]) for i in range(len(header))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*header), fmt.format(*("-" * w for w in widths))]
    lines += [fmt.format(*r) for r in rows]
    for key, agg in sorted(report.get("aggregate", {}).items()):
        lines.append(f"aggregate {key}: final l_ave2 {agg['final_l_ave2']:.6g} over {agg['n_series']} series")
    return "\n".join(lines) + "\n"


def write_report(report, output_dir):
    os.makedirs(output_dir, exist_ok=True)
    path = os.path.join(output_dir, "report.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
    with open(os.path.join(output_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(report_table(report))
    return path


def recompute_test_losses(report):
    """Recompute every cell's test loss from the serialized model, mask and split.

    Returns a list of ``(cell_id, reported, recomputed)``.
    """
    config = ExperimentConfig.from_dict(report["config"])
    sources = {s.name: s for s in load_sources(config)}
    out = []
    for sec in report["series"]:
        src = sources.get(sec["name"])
        if src is None:
            raise DataError(f"series {sec['name']!r} no longer available")
        test_rows = np.asarray(sec["split_indices"]["test"], dtype=np.intp)
        test = src.data.take_rows(test_rows)
        norm = sec.get("normalization")
        if norm:
            fx = NormalizationParams.from_dict(norm["features"]) if norm["features"] else None
            fy = NormalizationParams.from_dict(norm["target"]) if norm["target"] else None
            test = _normalized(test, fx, fy)
        for c in sec["cells"]:
            if c["status"] != "ok":
                continue
            model = learners.model_from_dict(c["model"])
            cols = np.flatnonzero(BinaryMask(np.asarray(c["mask"], dtype=np.int8)).bits)
            loss, _ = _losses(model, test.features[:, cols], test.targets)
            out.append((f"{sec['name']}:{c['selector']}/{c['learner']}", c["test_loss"], loss))
    return out
