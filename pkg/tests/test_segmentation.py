import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ecgbench.dsp import apply_fir, design_fir_bandpass, downsample
from ecgbench.errors import WindowOutOfBounds
from ecgbench.pipeline import detection_counts
from ecgbench.segmentation import (CardiacCycle, FiducialPoints, IntervalSet, delineate_cycle,
                                   detect_r_peaks, intervals_of, outlier_mask, remove_outliers, segment_episode,
                                   write_cycles_csv)
from ecgbench.synth import generate_recording, generate_subject

from conftest import quiet_config

FS = 256
# amplitude mV, width ms, offset ms for P Q R S T
TEMPLATE = {"p": (0.15, 20, -170), "q": (-0.2, 7, -40), "r": (1.2, 9, 0),
            "s": (-0.35, 8, 40), "t": (0.3, 40, 260)}


def template(n, centres, waves=TEMPLATE, fs=FS):
    t = np.arange(n)
    x = np.zeros(n)
    for c in centres:
        for amp, width, off in waves.values():
            mu = c + off * fs / 1000
            x += amp * np.exp(-0.5 * ((t - mu) / (width * fs / 1000)) ** 2)
    return x


def test_flat_signal_has_no_peaks():
    assert len(detect_r_peaks(np.zeros(FS * 5), FS)) == 0


def test_single_template_beat():
    peaks = detect_r_peaks(template(1024, [512]), FS)
    assert len(peaks) == 1 and abs(peaks[0] - 512) <= 2


def test_sixty_bpm_minute():
    params = generate_subject(11)
    params = type(params)(**{**params.__dict__, "heart_rate": 60.0, "hrv": 0.0})
    rec, truth = generate_recording(params, 2, quiet_config(minutes_per_day=1.0), "S01")
    low = downsample(rec, FS)
    fir = design_fir_bandpass()
    peaks = detect_r_peaks(apply_fir(low.samples, fir), FS, margin=fir.delay)
    r_truth = truth.r / 4
    assert abs(len(peaks) - len(r_truth)) <= 1
    assert 59 <= len(r_truth) <= 61
    tp, fp, fn = detection_counts(peaks, r_truth, FS, 10.0)
    assert fp == 0 and fn <= 1


@given(st.integers(0, 2**31))
def test_refractory_and_increasing(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=FS * 4) * rng.uniform(0.1, 1)
    x += template(len(x), np.sort(rng.integers(0, len(x), 10)))
    peaks = detect_r_peaks(x, FS)
    assert np.all(np.diff(peaks) >= int(round(0.2 * FS)))


def test_template_delineation_within_one_sample():
    x = template(FS * 3, [FS * 1.5])
    r = int(FS * 1.5)
    cyc = delineate_cycle(x, r, FS)
    for name, (_, _, off) in TEMPLATE.items():
        got = getattr(cyc.fiducials, name)
        assert abs(got - (r + off * FS / 1000)) <= 1, name
    assert cyc.complete
    assert cyc.start <= cyc.fiducials.p and cyc.fiducials.t <= cyc.end


def test_flat_p_and_t_are_absent():
    waves = dict(TEMPLATE, p=(0.0, 20, -170), t=(0.0, 40, 260))
    x = template(FS * 3, [FS * 1.5], waves)
    cyc = delineate_cycle(x, int(FS * 1.5), FS)
    assert cyc.fiducials.p is None and cyc.fiducials.t is None
    assert not cyc.complete
    iv = cyc.intervals
    assert iv.qr > 0 and iv.rs > 0 and iv.qs == pytest.approx(iv.qr + iv.rs)
    assert iv.pq is None and iv.st is None


def test_interval_arithmetic():
    iv = intervals_of(FiducialPoints(r=110, r_amp=1.0, q=100, s=120), FS)
    assert iv.qr == pytest.approx(39.0625)
    assert iv.rs == pytest.approx(39.0625)
    assert iv.qs == pytest.approx(78.13, abs=0.005)


def test_window_out_of_bounds():
    x = template(FS * 2, [20])
    with pytest.raises(WindowOutOfBounds):
        delineate_cycle(x, 20, FS)


def fake_cycle(pq=100.0, qr=40.0, rs=40.0, st=200.0, qs=None):
    fid = FiducialPoints(r=0, r_amp=1.0)
    iv = IntervalSet(pq=pq, qr=qr, rs=rs, qs=qr + rs if qs is None and qr and rs else qs, st=st)
    return CardiacCycle(0, 0, 1, fid, iv, complete=st is not None and pq is not None)


def test_identical_cycles_kept():
    runs, removed = remove_outliers([fake_cycle()] * 20)
    assert removed == 0 and len(runs) == 1 and len(runs[0]) == 20


def test_far_qs_removed_and_splits():
    rng = np.random.default_rng(3)
    qr = 40 + rng.uniform(-1, 1, 51)
    qr[25] = 40.0
    qs = qr + 40.0
    # place the odd QS so that it sits 5 population SDs from the mean of all 51
    others = np.delete(qs, 25)
    lo, hi = 0.0, 100.0
    for _ in range(100):
        d = (lo + hi) / 2
        trial = np.insert(others, 25, others.mean() + d)
        z = (trial[25] - trial.mean()) / trial.std()
        lo, hi = (d, hi) if z < 5 else (lo, d)
    qs[25] = others.mean() + d
    assert (qs[25] - qs.mean()) / qs.std() == pytest.approx(5.0, abs=1e-6)
    cycles = [fake_cycle(qr=q, rs=40.0, qs=v) for q, v in zip(qr, qs)]
    runs, removed = remove_outliers(cycles)
    assert removed == 1
    assert [len(r) for r in runs] == [25, 25]


def test_missing_t_always_removed():
    cycles = [fake_cycle() for _ in range(10)]
    cycles[4] = fake_cycle(st=None)
    runs, removed = remove_outliers(cycles)
    assert removed == 1 and [len(r) for r in runs] == [4, 5]


def test_passthrough_below_two():
    assert remove_outliers([]) == ([], 0)
    c = fake_cycle(st=None)
    assert remove_outliers([c]) == ([[c]], 0)


@given(st.lists(st.tuples(st.floats(20, 200), st.floats(10, 60), st.floats(10, 60),
                          st.floats(50, 300), st.booleans()), min_size=2, max_size=60))
def test_kept_cycles_satisfy_rules(rows):
    cycles = [fake_cycle(pq, qr, rs, None if drop else st_) for pq, qr, rs, st_, drop in rows]
    mask, stats = outlier_mask(cycles)
    runs, removed = remove_outliers(cycles)
    assert removed == int(mask.sum())
    assert sum(len(r) for r in runs) == len(cycles) - removed
    for run in runs:
        for c in run:
            for name in ("pq", "qr", "rs", "qs", "st"):
                v = c.intervals.get(name)
                assert v is not None
                assert abs(v - stats.mean[name]) <= 3 * stats.sd[name] + 1e-9


def test_complete_cycles_qs_identity():
    params = generate_subject(4)
    rec, _ = generate_recording(params, 2, quiet_config(snr_db=20.0), "S01")
    fir = design_fir_bandpass()
    x = apply_fir(downsample(rec, FS).samples, fir)
    cycles = segment_episode(x, FS, margin=fir.delay)
    assert len(cycles) > 40
    peaks = np.array([c.fiducials.r for c in cycles])
    assert np.all(np.diff(peaks) > 0)
    for c in cycles:
        f = c.fiducials
        present = [v for v in (f.p, f.q, f.r, f.s, f.t) if v is not None]
        assert present == sorted(present)
        if c.complete:
            assert c.intervals.qs == c.intervals.qr + c.intervals.rs
            assert c.start <= f.p and f.t <= c.end


def test_cycles_csv(tmp_path):
    x = template(FS * 3, [FS * 1.5])
    cyc = delineate_cycle(x, int(FS * 1.5), FS)
    path = tmp_path / "cycles.csv"
    write_cycles_csv(path, [("S01", 3, cyc)])
    head, row = path.read_text().splitlines()
    assert head.startswith("subject,day,episode,r_index,p,q,r,s,t,pq_ms")
    assert row.startswith("S01,3,0,384,")
    assert row.endswith(",1")
