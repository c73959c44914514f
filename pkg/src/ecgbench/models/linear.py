"""Class-weighted linear SVM (L2-regularised hinge loss, dual coordinate descent)."""

from __future__ import annotations

import logging

import numpy as np

from .._accel import kernels
from .base import LinearConfig, Standardizer, TrainedModel, check_training_data, sigmoid

logger = logging.getLogger(__name__)


def class_weights(y: np.ndarray, mode: str = "balanced") -> np.ndarray:
    """Per-sample weights.

    Balanced weights are inversely proportional to class frequency and
    scaled so the largest class has weight 1: replicating the minority class
    that many times gives the same objective without weights.
    """
    if mode == "none":
        return np.ones(len(y))
    _, inv, counts = np.unique(y, return_inverse=True, return_counts=True)
    return (counts.max() / counts)[inv]


def linear_objective(w, b, X, y, C, sample_weight=None) -> float:
    """0.5 * (|w|^2 + b^2) + C * sum(weight * hinge). ``y`` may be 0/1 or +-1."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    s = np.where(y > 0, 1.0, -1.0)
    sw = np.ones(len(X)) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
    hinge = np.maximum(0.0, 1.0 - s * (X @ np.asarray(w) + b))
    return float(0.5 * (np.dot(w, w) + b * b) + C * np.sum(sw * hinge))


class LinearModel(TrainedModel):
    kind = "linear"

    def __init__(self, schema, config: LinearConfig, coef, intercept, scaler: Standardizer,
                 diagnostics=None):
        super().__init__(schema, config, diagnostics)
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = float(intercept)
        self.scaler = scaler

    @classmethod
    def train(cls, config: LinearConfig, X, y, schema) -> "LinearModel":
        X, y = check_training_data(X, y)
        scaler = Standardizer.fit(X)
        Z = scaler.transform(X)
        Xa = np.ascontiguousarray(np.hstack([Z, np.ones((len(Z), 1))]))
        s = np.where(y > 0, 1.0, -1.0)
        sw = class_weights(y, config.class_weight)
        w, n_iter = kernels.svm_dual_cd(Xa, s, config.C * sw, int(config.max_iter),
                                        float(config.tol), int(config.seed))
        converged = n_iter < config.max_iter
        if not converged:
            logger.info("linear SVM hit max_iter=%d", config.max_iter)
        diag = {"n_iter": int(n_iter), "converged": bool(converged),
                "objective": linear_objective(w[:-1], w[-1], Z, y, config.C, sw)}
        return cls(schema, config, w[:-1], w[-1], scaler, diag)

    def margin(self, X) -> np.ndarray:
        return self.scaler.transform(X) @ self.coef + self.intercept

    def _score(self, X):
        return sigmoid(self.margin(X))

    def arrays(self) -> dict:
        return {"coef": self.coef, "intercept": np.array([self.intercept]),
                "mean": self.scaler.mean, "scale": self.scaler.scale}

    @classmethod
    def from_arrays(cls, schema, config, arrays, diagnostics=None):
        return cls(schema, config, arrays["coef"], arrays["intercept"][0],
                   Standardizer(arrays["mean"], arrays["scale"]), diagnostics)
