"""Configs and the shared scoring interface of the binary classifiers."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Optional, Sequence

import numpy as np

from ..errors import NonFiniteFeature, SchemaMismatch, SingleClass


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: Optional[int] = None
    max_features: Optional[int] = None  # None -> ceil(sqrt(d))
    bootstrap: bool = True
    extra: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")

    kind = "forest"


@dataclass(frozen=True)
class LinearConfig:
    C: float = 1e-3
    class_weight: str = "balanced"  # or "none"
    max_iter: int = 1000
    tol: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")
        if self.class_weight not in ("balanced", "none"):
            raise ValueError("class_weight must be 'balanced' or 'none'")

    kind = "linear"


@dataclass(frozen=True)
class MlpConfig:
    hidden: tuple = (32, 32, 32)
    learning_rate: float = 1e-4
    epochs: Optional[int] = None  # None -> 100 in scenario 1, 25 otherwise
    batch_size: int = 32
    validation_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.epochs is not None and self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    kind = "mlp"

    def resolved_epochs(self, scenario: str = "S1") -> int:
        if self.epochs is not None:
            return self.epochs
        return 100 if scenario == "S1" else 25


CONFIG_TYPES = {"forest": ForestConfig, "linear": LinearConfig, "mlp": MlpConfig}


def config_dict(config) -> dict:
    d = asdict(config)
    if "hidden" in d:
        d["hidden"] = list(d["hidden"])
    return d


def config_from_dict(kind: str, d: dict):
    d = dict(d)
    if "hidden" in d:
        d["hidden"] = tuple(d["hidden"])
    return CONFIG_TYPES[kind](**d)


def with_seed(config, seed: int):
    return replace(config, seed=int(seed))


def check_training_data(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y).astype(np.int64).ravel()
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be (n, d) with one label per row")
    if not np.isfinite(X).all():
        raise NonFiniteFeature("training features contain NaN or inf")
    if len(np.unique(y)) < 2:
        raise SingleClass("training data holds a single class")
    return X, y


@dataclass
class Standardizer:
    """z-score transform fitted on training data only."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        sd = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(sd > 0, sd, 1.0))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (X - self.mean) / self.scale


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class TrainedModel:
    """Immutable binary scorer. Subclasses implement ``_score`` and ``arrays``."""

    kind = ""

    def __init__(self, schema: Sequence[str], config, diagnostics: Optional[dict] = None):
        self.schema = tuple(schema)
        self.config = config
        self.diagnostics = diagnostics or {}

    @property
    def seed(self) -> int:
        return self.config.seed

    def score(self, X) -> np.ndarray:
        """Scores in [0, 1] for each row of ``X`` (higher means more user-like)."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != len(self.schema):
            raise SchemaMismatch(f"model expects {len(self.schema)} features, got {X.shape[1]}")
        return self._score(X)

    def score_vector(self, vector) -> float:
        if tuple(vector.schema) != self.schema:
            raise SchemaMismatch("feature vector schema differs from the model's")
        return float(self.score(vector.values)[0])

    def _score(self, X):
        raise NotImplementedError

    def arrays(self) -> dict:
        raise NotImplementedError

    @classmethod
    def from_arrays(cls, schema, config, arrays: dict, diagnostics=None):
        raise NotImplementedError
