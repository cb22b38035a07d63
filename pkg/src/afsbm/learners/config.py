"""Learner hyperparameters and the search grids used for tuning."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

TASKS = ("regression", "binary_classification")

# Value sets the benchmark grids are drawn from.
REFERENCE_GRIDS = {
    "gbdt": {
        "num_leaves": [20, 50, 100],
        "learning_rate": [0.01, 0.1, 0.5],
        "n_estimators": [20, 50, 100],
        "subsample": [0.6, 0.8, 1.0],
        "colsample_bytree": [0.6, 0.8, 1.0],
        "min_child_samples": [5, 10],
    },
    "mlp": {
        "hidden_layer_sizes": [[20], [40], [10], [20, 10]],
        "activation": ["relu", "logistic"],
        "alpha": [0.0001, 0.001, 0.01],
        "learning_rate_init": [0.001, 0.01],
    },
}


class ConfigError(ValueError):
    """A hyperparameter lies outside its admissible range."""


@dataclass(frozen=True)
class LearnerConfig:
    kind: str = "gbdt"
    task: str = "regression"
    # gradient-boosted trees
    num_leaves: int = 31
    learning_rate: float = 0.1
    n_estimators: int = 100
    subsample: float = 1.0
    colsample_bytree: float = 1.0
    min_child_samples: int = 20
    max_bins: int = 64
    reg_lambda: float = 0.0
    # multilayer perceptron
    hidden_layer_sizes: tuple = (20,)
    activation: str = "relu"
    alpha: float = 0.0001
    learning_rate_init: float = 0.001
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_layer_sizes", tuple(int(h) for h in self.hidden_layer_sizes))
        self.validate()

    def validate(self):
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.kind in ("gbdt", "mlp"), f"kind must be 'gbdt' or 'mlp', got {self.kind!r}")
        need(self.task in TASKS, f"task must be one of {TASKS}, got {self.task!r}")
        need(_is_int(self.num_leaves) and self.num_leaves >= 1, "num_leaves must be a positive integer")
        need(self.learning_rate > 0, "learning_rate must be positive")
        need(_is_int(self.n_estimators) and self.n_estimators >= 1, "n_estimators must be a positive integer")
        need(0 < self.subsample <= 1, "subsample must lie in (0, 1]")
        need(0 < self.colsample_bytree <= 1, "colsample_bytree must lie in (0, 1]")
        need(_is_int(self.min_child_samples) and self.min_child_samples >= 1,
             "min_child_samples must be a positive integer")
        need(_is_int(self.max_bins) and 2 <= self.max_bins <= 256, "max_bins must lie in [2, 256]")
        need(self.reg_lambda >= 0, "reg_lambda must be non-negative")
        need(len(self.hidden_layer_sizes) >= 1 and all(h >= 1 for h in self.hidden_layer_sizes),
             "hidden_layer_sizes must be positive integers")
        need(self.activation in ("relu", "logistic"), "activation must be 'relu' or 'logistic'")
        need(self.alpha >= 0, "alpha must be non-negative")
        need(self.learning_rate_init > 0, "learning_rate_init must be positive")
        need(_is_int(self.batch_size) and self.batch_size >= 1, "batch_size must be a positive integer")
        need(_is_int(self.max_epochs) and self.max_epochs >= 1, "max_epochs must be a positive integer")
        need(_is_int(self.patience) and self.patience >= 1, "patience must be a positive integer")
        need(_is_int(self.seed) and self.seed >= 0, "seed must be an unsigned integer")

    def replace(self, **changes):
        d = asdict(self)
        d.update(changes)
        return LearnerConfig(**d)

    def to_dict(self):
        d = asdict(self)
        d["hidden_layer_sizes"] = list(self.hidden_layer_sizes)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown learner parameters: {sorted(unknown)}")
        return cls(**d)


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def check_reference_grid(kind, grid):
    """Raise if any grid value falls outside the benchmark's value set for ``kind``."""
    allowed = REFERENCE_GRIDS[kind]
    for key, values in grid.items():
        if key not in allowed:
            continue
        for v in values:
            v_cmp = list(v) if isinstance(v, (list, tuple)) else v
            if v_cmp not in allowed[key]:
                raise ConfigError(f"{kind}.{key}={v!r} is outside the benchmark grid {allowed[key]}")
