"""Time the numba kernels against their pure-numpy twins.

The backend is fixed at import time, so each one runs in its own
interpreter with ECGBENCH_NUMBA set accordingly.

    python benchmarks/bench_backends.py [--rows 4000] [--trees 20] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from ecgbench import BACKEND
from ecgbench.models import ForestConfig, LinearConfig, train
from ecgbench.segmentation import detect_r_peaks
from ecgbench.synth import FieldWeekConfig, corpus_subjects, generate_recording
from ecgbench.dsp import apply_fir, design_fir_bandpass, downsample

rows, trees, repeat = (int(a) for a in sys.argv[1:4])
rng = np.random.default_rng(0)
# interval statistics live on a 1000/256 ms grid, so mimic that
X = np.round(rng.normal(0.0, 6.0, size=(rows, 9)) + 40.0, 0) * (1000 / 256)
y = (X[:, 0] + rng.normal(0.0, 10.0, rows) > 160.0).astype(int)
schema = [f"f{i}" for i in range(9)]

cfg = FieldWeekConfig(n_subjects=1, minutes_per_day=10.0, gaps_per_day=0)
params = next(iter(corpus_subjects(cfg).values()))
rec, _ = generate_recording(params, 2, cfg, "S01")
ecg = apply_fir(downsample(rec, 256).samples, design_fir_bandpass())

def best(fn):
    fn()  # warm-up (and JIT compile)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)

model = train(ForestConfig(n_trees=trees), X, y, schema)
out = {
    "backend": BACKEND,
    "forest_fit": best(lambda: train(ForestConfig(n_trees=trees), X, y, schema)),
    "forest_score": best(lambda: model.score(X)),
    "linear_fit": best(lambda: train(LinearConfig(), X, y, schema)),
    "r_peaks_10min": best(lambda: detect_r_peaks(ecg, 256)),
}
print(json.dumps(out))
"""


def run(flag, rows, trees, repeat):
    env = dict(os.environ, ECGBENCH_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", WORKER, str(rows), str(trees), str(repeat)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rows", type=int, default=4000)
    ap.add_argument("--trees", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    numba = run("1", args.rows, args.trees, args.repeat)
    numpy = run("0", args.rows, args.trees, args.repeat)
    print(f"{'kernel':<16}{'numba s':>10}{'numpy s':>10}{'speedup':>9}")
    for key in ("forest_fit", "forest_score", "linear_fit", "r_peaks_10min"):
        a, b = numba[key], numpy[key]
        print(f"{key:<16}{a:>10.4f}{b:>10.4f}{b / a:>8.1f}x")
    if numba["backend"] != "numba":
        print("note: numba unavailable, both rows used the numpy kernels")


if __name__ == "__main__":
    main()
