"""The numba kernels and their numpy twins must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from ecgbench import _kernels_numpy as npk
from ecgbench.models.forest import _rank_tables
from ecgbench.segmentation import ez_transform

from test_segmentation import template

nbk = pytest.importorskip("ecgbench._kernels_numba")


def tree_inputs(seed, n=300, d=5, rounded=True):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    if rounded:
        X = np.round(X * 4) / 4  # ties, like interval features on a sample grid
    y = (X[:, 0] + 0.5 * rng.normal(size=n) > 0).astype(np.int64)
    w = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.int64)
    rows = np.flatnonzero(w).astype(np.int64)
    ranks, uniq, n_bins = _rank_tables(X)
    return X, ranks, uniq, n_bins, y, w, rows


@pytest.mark.parametrize("extra", [False, True])
@pytest.mark.parametrize("max_depth", [-1, 3])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_grow_tree_identical(extra, max_depth, seed):
    X, ranks, uniq, n_bins, y, w, rows = tree_inputs(seed, rounded=seed != 2)
    args = (X, ranks, uniq, n_bins, y, w, rows, 2, 3, extra, max_depth, np.uint64(seed * 7 + 1))
    a = nbk.grow_tree(*args)
    b = npk.grow_tree(*args)
    for u, v in zip(a, b):
        assert np.array_equal(np.asarray(u), np.asarray(v))
    roots = np.zeros(1, dtype=np.int64)
    assert np.array_equal(nbk.apply_trees(X, *a[:4], roots), npk.apply_trees(X, *b[:4], roots))


def test_ez_scan_identical():
    rng = np.random.default_rng(3)
    fs = 256
    beats = np.cumsum(rng.uniform(180, 260, 40)).astype(int)
    x = template(int(beats[-1]) + 300, beats) + 0.05 * rng.normal(size=int(beats[-1]) + 300)
    y2 = ez_transform(x, fs)
    a = nbk.ez_scan(x, y2, float(fs), 0.48, 38, len(x) - 38)
    b = npk.ez_scan(x, y2, float(fs), 0.48, 38, len(x) - 38)
    assert np.array_equal(a, b) and len(a) >= 38


def test_svm_identical():
    rng = np.random.default_rng(4)
    X = np.hstack([rng.normal(size=(200, 3)), np.ones((200, 1))])
    y = np.where(X[:, 0] - X[:, 1] > 0, 1.0, -1.0)
    up = np.full(200, 0.5)
    wa, na = nbk.svm_dual_cd(X, y, up, 500, 1e-6, 3)
    wb, nb = npk.svm_dual_cd(X, y, up, 500, 1e-6, 3)
    assert na == nb
    assert np.max(np.abs(wa - wb)) <= 1e-12


@pytest.mark.parametrize("flag, expected", [("0", "numpy"), ("off", "numpy"), ("1", "numba")])
def test_env_flag_selects_backend(flag, expected):
    env = dict(os.environ, ECGBENCH_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "import ecgbench; print(ecgbench.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True).stdout.strip()
    assert out == expected
