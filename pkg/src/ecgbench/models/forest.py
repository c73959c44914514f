"""Random forest / extra-trees with Gini splits, grown by the compiled kernel."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .._accel import kernels
from .base import ForestConfig, TrainedModel, check_training_data


@dataclass
class Forest:
    """Concatenated node arrays of all trees; child indices are tree-local."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_classes) weighted class counts
    roots: np.ndarray
    importances: np.ndarray
    oob_score: float = float("nan")

    @property
    def n_trees(self) -> int:
        return len(self.roots)

    def leaves(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return kernels.apply_trees(X, self.feature, self.threshold, self.left, self.right,
                                   self.roots)

    def votes(self, X) -> np.ndarray:
        """Per-tree votes for class 1 in a binary forest; a tied leaf votes 0.5."""
        v = self.value[self.leaves(X)]
        return np.where(v[..., 1] > v[..., 0], 1.0, np.where(v[..., 1] == v[..., 0], 0.5, 0.0))


def _rank_tables(X):
    n, d = X.shape
    uniq = [np.unique(X[:, j]) for j in range(d)]
    width = max(len(u) for u in uniq)
    table = np.full((d, width), np.inf)
    ranks = np.empty((n, d), dtype=np.int64)
    for j, u in enumerate(uniq):
        table[j, :len(u)] = u
        ranks[:, j] = np.searchsorted(u, X[:, j])
    n_bins = np.array([len(u) for u in uniq], dtype=np.int64)
    return np.ascontiguousarray(ranks), table, n_bins


def tree_seeds(seed: int, n_trees: int) -> np.ndarray:
    """Independent per-tree seeds, so tree t never depends on the schedule."""
    return np.random.SeedSequence(int(seed)).generate_state(2 * n_trees, np.uint64).reshape(
        n_trees, 2)


def fit_forest(X, y, config: ForestConfig, n_classes: int = 2) -> Forest:
    X, y = check_training_data(X, y)
    n, d = X.shape
    ranks, uniq, n_bins = _rank_tables(X)
    max_features = config.max_features or math.ceil(math.sqrt(d))
    max_depth = -1 if config.max_depth is None else int(config.max_depth)
    seeds = tree_seeds(config.seed, config.n_trees)

    parts = []
    imp = np.zeros(d)
    oob_votes = np.zeros((n, n_classes))
    for t in range(config.n_trees):
        if config.bootstrap:
            draw = np.random.default_rng(int(seeds[t, 0])).integers(0, n, size=n)
            w = np.bincount(draw, minlength=n).astype(np.int64)
        else:
            w = np.ones(n, dtype=np.int64)
        rows = np.flatnonzero(w).astype(np.int64)
        tree = kernels.grow_tree(X, ranks, uniq, n_bins, y, w, rows, n_classes,
                                 max_features, bool(config.extra), max_depth, seeds[t, 1])
        parts.append(tree)
        ti = tree[5]
        if ti.sum() > 0:
            imp += ti / ti.sum()
        if config.bootstrap:
            out = np.flatnonzero(w == 0)
            if len(out):
                leaf = kernels.apply_trees(X[out], tree[0], tree[1], tree[2], tree[3],
                                           np.zeros(1, dtype=np.int64))[:, 0]
                oob_votes[out, np.argmax(tree[4][leaf], axis=1)] += 1

    sizes = np.array([len(p[0]) for p in parts])
    roots = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
    total = imp.sum()
    seen = oob_votes.sum(axis=1) > 0
    oob = float(np.mean(np.argmax(oob_votes[seen], axis=1) == y[seen])) if seen.any() else float("nan")
    return Forest(
        feature=np.concatenate([p[0] for p in parts]),
        threshold=np.concatenate([p[1] for p in parts]),
        left=np.concatenate([p[2] for p in parts]),
        right=np.concatenate([p[3] for p in parts]),
        value=np.concatenate([p[4] for p in parts]),
        roots=roots,
        importances=imp / total if total > 0 else imp,
        oob_score=oob,
    )


class ForestModel(TrainedModel):
    kind = "forest"

    def __init__(self, schema, config: ForestConfig, forest: Forest, diagnostics=None):
        super().__init__(schema, config, diagnostics)
        self.forest = forest

    @classmethod
    def train(cls, config: ForestConfig, X, y, schema) -> "ForestModel":
        forest = fit_forest(X, y, config, n_classes=2)
        diag = {"oob_accuracy": forest.oob_score, "n_nodes": int(len(forest.feature))}
        return cls(schema, config, forest, diag)

    @property
    def importances(self) -> np.ndarray:
        return self.forest.importances

    def _score(self, X):
        return self.forest.votes(X).mean(axis=1)

    def arrays(self) -> dict:
        f = self.forest
        return {"feature": f.feature, "threshold": f.threshold, "left": f.left,
                "right": f.right, "value": f.value, "roots": f.roots,
                "importances": f.importances}

    @classmethod
    def from_arrays(cls, schema, config, arrays, diagnostics=None):
        forest = Forest(**{k: arrays[k] for k in ("feature", "threshold", "left", "right",
                                                  "value", "roots", "importances")})
        return cls(schema, config, forest, diagnostics)
