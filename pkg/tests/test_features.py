import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from ecgbench.errors import EmptySubject, IncompleteCycle, SchemaMismatch, SingleClass
from ecgbench.features import (FULL_SCHEMA, SELECTED_SCHEMA, BeatWindow, FeatureVector,
                               LabeledDataset, compose_dataset, compute_window_features,
                               even_allocation, rank_features, read_features_csv,
                               select_columns, select_features, window_features,
                               windows_from_runs, write_features_csv)
from ecgbench.segmentation import CardiacCycle, FiducialPoints, intervals_of

from conftest import random_dataset

FS = 256


def cycle(q, r, s, episode=0, p=None, t=None):
    fid = FiducialPoints(r=r, r_amp=1.0, p=p, q=q, s=s, t=t)
    return CardiacCycle(episode, r - 51, r + 102, fid, intervals_of(fid, FS), FS,
                        complete=None not in (p, q, s, t))


def test_worked_example():
    # QR of 10, 12 and 14 samples
    w = BeatWindow(tuple(cycle(100 * k, 100 * k + d, 100 * k + d + 8) for k, d in
                         enumerate((10, 12, 14))))
    f = compute_window_features(w)
    ms = 1000 / FS
    assert f["QR_min"] == pytest.approx(39.0625)
    assert f["QR_max"] == pytest.approx(54.6875)
    assert f["QR_mean"] == pytest.approx(12 * ms)
    assert f["QR_median"] == pytest.approx(12 * ms)
    assert f["QR_std"] == pytest.approx(np.sqrt(8 / 3) * ms)
    assert round(f["QR_std"], 2) == 6.38
    assert f["RS_std"] == 0.0


def test_identical_cycles():
    f = compute_window_features(BeatWindow((cycle(0, 10, 20),) * 3))
    v = f.values.reshape(3, 5)
    assert np.all(v[:, :4] == v[:, :1]) and np.all(v[:, 4] == 0)


def test_incomplete_and_bad_window():
    with pytest.raises(IncompleteCycle):
        compute_window_features(BeatWindow((cycle(0, 10, 20), cycle(None, 10, 20), cycle(0, 10, 20))))
    with pytest.raises(ValueError):
        BeatWindow((cycle(0, 10, 20), cycle(0, 10, 20, episode=1), cycle(0, 10, 20)))
    with pytest.raises(ValueError):
        BeatWindow((cycle(0, 10, 20),) * 2)


def brute_stats(vals):
    v = sorted(vals)
    m = sum(v) / 3
    return [v[0], v[2], m, v[1], (sum((x - m) ** 2 for x in v) / 3) ** 0.5]


@given(hnp.arrays(np.float64, st.tuples(st.integers(0, 12), st.just(3)),
                  elements=st.floats(1, 500)))
def test_window_features_oracle_and_ordering(iv):
    out = window_features(iv)
    assert out.shape == (max(0, len(iv) - 2), 15)
    for i, row in enumerate(out):
        for j in range(3):
            mn, mx, mean, med, sd = row[5 * j:5 * j + 5]
            assert np.allclose(row[5 * j:5 * j + 5], brute_stats(iv[i:i + 3, j]), rtol=1e-12)
            assert mn <= med <= mx and mn <= mean <= mx and sd >= 0
        assert np.isfinite(row).all()


def test_window_count_per_run():
    for n in range(0, 8):
        run = [cycle(100 * k, 100 * k + 10, 100 * k + 20) for k in range(n)]
        d = windows_from_runs([run], FS, "S01", 2)
        assert len(d) == max(0, n - 2)
    runs = [[cycle(100 * k, 100 * k + 10, 100 * k + 20) for k in range(5)],
            [cycle(100 * k, 100 * k + 10, 100 * k + 20) for k in range(6, 10)]]
    d = windows_from_runs(runs, FS, "S01", 2, start_offset=3600.0, segment_base=7)
    assert len(d) == 3 + 2
    assert d.segment.tolist() == [7, 7, 7, 8, 8]
    assert d.t_start[0] == pytest.approx(3600.0 + 10 / FS)


def test_select_projection():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(1000, 15))
    sel = select_columns(X)
    for j, name in enumerate(SELECTED_SCHEMA):
        assert np.array_equal(sel[:, j], X[:, FULL_SCHEMA.index(name)])
    v = select_features(FeatureVector(X[0]))
    assert v.schema == SELECTED_SCHEMA and len(v.values) == 9
    assert v["QS_mean"] == X[0, FULL_SCHEMA.index("QS_mean")]
    with pytest.raises(SchemaMismatch):
        select_features(v)


def test_csv_roundtrip(tmp_path):
    d = random_dataset(np.random.default_rng(1), ["S01", "S02"], 5, days=(1, 2))
    write_features_csv(tmp_path / "f.csv", d)
    back = read_features_csv(tmp_path / "f.csv")
    assert back.schema == d.schema
    assert np.allclose(back.X, d.X, atol=5e-7)
    assert back.subject.tolist() == d.subject.tolist()
    assert np.array_equal(back.segment, d.segment)
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(SchemaMismatch):
        read_features_csv(tmp_path / "bad.csv")


def test_dataset_label_lengths_checked():
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((2, 9)), SELECTED_SCHEMA, ["a"], [1, 1], [0, 0], [0, 0])


def test_compose_exact_target():
    d = random_dataset(np.random.default_rng(2), ["S01", "S02"], 200)
    out = compose_dataset({s: d.where(d.subject == s) for s in d.subjects}, 700, seed=4)
    assert out.counts() == {"S01": 700, "S02": 700}
    for s in out.subjects:
        days = out.day[out.subject == s]
        assert np.bincount(days)[1:].tolist() == [100] * 7


def test_compose_determinism_and_no_duplicates():
    d = random_dataset(np.random.default_rng(3), ["S01", "S02", "S03"],
                       lambda s, day: 20 + 13 * day)
    per = {s: d.where(d.subject == s) for s in d.subjects}
    a = compose_dataset(per, 250, seed=9)
    b = compose_dataset(per, 250, seed=9)
    assert np.array_equal(a.X, b.X)
    rows = {tuple(r) for r in a.X}
    assert len(rows) == len(a)


def test_compose_short_subject_flagged():
    d = random_dataset(np.random.default_rng(4), ["S01"], 10)
    out = compose_dataset({"S01": d}, 100, seed=0)
    assert len(out) == 70 and out.flags["short_subjects"] == ["S01"]
    with pytest.raises(EmptySubject):
        compose_dataset({"S01": LabeledDataset.empty()}, 10, seed=0)


@given(st.lists(st.integers(0, 50), min_size=1, max_size=10), st.integers(0, 400),
       st.integers(0, 1000))
def test_even_allocation(supply, total, seed):
    supply = np.array(supply)
    alloc = even_allocation(supply, total, np.random.default_rng(seed))
    assert alloc.sum() == min(total, supply.sum())
    assert np.all(alloc <= supply) and np.all(alloc >= 0)
    # cells not exhausted differ by at most one
    open_ = alloc[alloc < supply]
    if len(open_):
        assert open_.max() - open_.min() <= 1
        assert alloc.max() <= open_.min() + 1


def test_rank_features():
    rng = np.random.default_rng(5)
    n = 200
    X = rng.normal(size=(n, 9))
    y = np.repeat([0, 1], n // 2)
    X[:, 4] = y * 5.0 + rng.uniform(0, 1, n)
    X[:, 7] = 3.0
    X[:, 8] = X[:, 2]
    # exhaustive threshold check: column 4 alone separates the classes
    assert X[y == 0, 4].max() < X[y == 1, 4].min()
    d = LabeledDataset(X, SELECTED_SCHEMA, np.where(y, "S02", "S01"), [1] * n,
                       np.arange(n), np.zeros(n))
    r = rank_features(d, seed=1, n_trees=100)
    assert r.ranked[0][0] == SELECTED_SCHEMA[4]
    assert sum(v for _, v in r.ranked) == pytest.approx(1.0)
    assert dict(r.ranked)[SELECTED_SCHEMA[7]] == 0.0
    assert r.constant == [SELECTED_SCHEMA[7]]
    assert np.all(r.correlation[7] == 0)
    assert r.correlation[2, 8] == pytest.approx(1.0, abs=1e-9)
    assert np.allclose(r.correlation[:7, :7], np.corrcoef(X[:, :7].T), atol=1e-12)
    with pytest.raises(SingleClass):
        rank_features(d.where(d.subject == "S01"))
