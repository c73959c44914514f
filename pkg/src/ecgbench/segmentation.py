"""R-peak detection, fiducial delineation and interval outlier rejection."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from ._accel import kernels
from .errors import WindowOutOfBounds

REFRACTORY_S = 0.2
THRESHOLD_FRACTION = 0.48

# delineation windows relative to R, milliseconds
P_WINDOW = (-200.0, -80.0)
Q_WINDOW = (-80.0, 0.0)
S_WINDOW = (0.0, 80.0)
T_WINDOW = (80.0, 400.0)
MIN_PROMINENCE_MV = 0.05

OUTLIER_INTERVALS = ("pq", "qr", "rs", "qs", "st")


@dataclass(frozen=True)
class FiducialPoints:
    r: int
    r_amp: float
    p: Optional[int] = None
    q: Optional[int] = None
    s: Optional[int] = None
    t: Optional[int] = None
    p_amp: Optional[float] = None
    q_amp: Optional[float] = None
    s_amp: Optional[float] = None
    t_amp: Optional[float] = None

    def present(self) -> dict[str, int]:
        out = {}
        for name in "pqrst":
            idx = getattr(self, name)
            if idx is not None:
                out[name] = idx
        return out


@dataclass(frozen=True)
class IntervalSet:
    """Peak-to-peak durations in milliseconds; ``None`` when not computable."""

    pq: Optional[float] = None
    qr: Optional[float] = None
    rs: Optional[float] = None
    qs: Optional[float] = None
    st: Optional[float] = None
    rr: Optional[float] = None

    def get(self, name: str) -> Optional[float]:
        return getattr(self, name)


@dataclass(frozen=True)
class CardiacCycle:
    episode: int
    start: int
    end: int
    fiducials: FiducialPoints
    intervals: IntervalSet
    sample_rate: int = 256
    complete: bool = field(default=False)


def _ms_to_samples(ms: float, fs: float) -> int:
    return int(round(ms * fs / 1000.0))


def ez_transform(x: np.ndarray, fs: int) -> np.ndarray:
    """Differentiate with a ``4 * fs / 256`` sample lag and smooth with (1,4,6,4,1)/16."""
    lag = max(int(round(4 * fs / 256)), 1)
    stride = max(int(round(fs / 256)), 1)
    y1 = np.zeros_like(x)
    y1[lag:] = x[lag:] - x[:-lag]
    kernel = np.zeros(4 * stride + 1)
    kernel[::stride] = (1.0, 4.0, 6.0, 4.0, 1.0)
    return np.convolve(y1, kernel / 16.0, mode="same")


def detect_r_peaks(samples, fs: int, margin: int = 0,
                   threshold: float = THRESHOLD_FRACTION) -> np.ndarray:
    """Engelse-Zeelenberg style R-peak detector.

    The differentiated and smoothed signal is compared to an adaptive
    threshold (``threshold`` times the mean of the last three window maxima,
    windows of 1.75 s advanced by 0.75 s). Each upward crossing is resolved
    to the largest sample of ``samples`` within +-25 ms, and peaks closer
    than 200 ms are merged keeping the larger one.

    ``margin`` samples at both ends (filter warm-up) are excluded.
    """
    x = np.ascontiguousarray(samples, dtype=np.float64)
    if len(x) < 2 * margin + 2:
        return np.empty(0, dtype=np.int64)
    y2 = ez_transform(x, fs)
    peaks = kernels.ez_scan(x, y2, float(fs), float(threshold), int(margin), len(x) - int(margin))
    return _enforce_refractory(np.asarray(peaks, dtype=np.int64), x, fs)


def _enforce_refractory(peaks: np.ndarray, x: np.ndarray, fs: int) -> np.ndarray:
    gap = _ms_to_samples(REFRACTORY_S * 1000, fs)
    kept: list[int] = []
    for p in np.sort(peaks):
        if kept and p - kept[-1] < gap:
            if x[p] > x[kept[-1]]:
                kept[-1] = int(p)
        elif not kept or p > kept[-1]:
            kept.append(int(p))
    return np.asarray(kept, dtype=np.int64)


def _window_bounds(fs):
    return {name: (_ms_to_samples(lo, fs), _ms_to_samples(hi, fs))
            for name, (lo, hi) in (("p", P_WINDOW), ("q", Q_WINDOW),
                                   ("s", S_WINDOW), ("t", T_WINDOW))}


def delineate(samples, r_peaks, fs: int) -> dict[str, np.ndarray]:
    """Vectorised fiducial search for every R peak whose cycle fits the signal.

    Returns a dict of equal-length arrays: ``r`` plus ``p, q, s, t`` indices
    (-1 when absent) and ``*_amp`` amplitudes (NaN when absent).
    """
    x = np.asarray(samples, dtype=np.float64)
    r = np.asarray(r_peaks, dtype=np.int64)
    b = _window_bounds(fs)
    lo, hi = b["p"][0], b["t"][1]
    r = r[(r + lo >= 0) & (r + hi < len(x))]
    out = {"r": r, "r_amp": x[r]}
    # (window start offset, stop offset, search for max?)
    spec = {"p": (b["p"][0], b["p"][1], True),
            "q": (b["q"][0], 0, False),
            "s": (1, b["s"][1] + 1, False),
            "t": (b["t"][0] + 1, b["t"][1] + 1, True)}
    for name, (a, z, is_max) in spec.items():
        offs = np.arange(a, z)
        seg = x[r[:, None] + offs[None, :]] if len(r) else np.empty((0, len(offs)))
        pos = seg.argmax(axis=1) if is_max else seg.argmin(axis=1)
        amp = seg[np.arange(len(r)), pos]
        med = np.median(seg, axis=1) if len(r) else np.empty(0)
        prominence = amp - med if is_max else med - amp
        ok = prominence >= MIN_PROMINENCE_MV
        out[name] = np.where(ok, r + a + pos, -1)
        out[name + "_amp"] = np.where(ok, amp, np.nan)
    return out


def _cycle_from_row(table, i, fs, episode, prev_r=None) -> CardiacCycle:
    def opt(name):
        v = int(table[name][i])
        return None if v < 0 else v

    def amp(name):
        v = float(table[name + "_amp"][i])
        return None if np.isnan(v) else v

    r = int(table["r"][i])
    fid = FiducialPoints(r=r, r_amp=float(table["r_amp"][i]),
                         p=opt("p"), q=opt("q"), s=opt("s"), t=opt("t"),
                         p_amp=amp("p"), q_amp=amp("q"), s_amp=amp("s"), t_amp=amp("t"))
    return CardiacCycle(episode=episode,
                        start=r + _ms_to_samples(P_WINDOW[0], fs),
                        end=r + _ms_to_samples(T_WINDOW[1], fs),
                        fiducials=fid, intervals=intervals_of(fid, fs, prev_r),
                        sample_rate=fs,
                        complete=all(getattr(fid, k) is not None for k in "pqst"))


def intervals_of(fid: FiducialPoints, fs: int, prev_r: Optional[int] = None) -> IntervalSet:
    scale = 1000.0 / fs

    def span(a, b):
        if a is None or b is None:
            return None
        return (b - a) * scale

    return IntervalSet(pq=span(fid.p, fid.q), qr=span(fid.q, fid.r), rs=span(fid.r, fid.s),
                       qs=span(fid.q, fid.s), st=span(fid.s, fid.t), rr=span(prev_r, fid.r))


def delineate_cycle(samples, r_index: int, fs: int, episode: int = 0,
                    prev_r: Optional[int] = None) -> CardiacCycle:
    """Locate P, Q, S, T around one R peak and derive its intervals.

    Raises :class:`WindowOutOfBounds` when the cycle window
    ``[r - 200 ms, r + 400 ms]`` does not fit inside ``samples``.
    """
    table = delineate(samples, [r_index], fs)
    if len(table["r"]) == 0:
        raise WindowOutOfBounds(f"cycle around R={r_index} exceeds the episode")
    return _cycle_from_row(table, 0, fs, episode, prev_r)


def segment_episode(samples, fs: int, episode: int = 0, margin: int = 0) -> list[CardiacCycle]:
    """Detect and delineate every cycle in one filtered episode."""
    peaks = detect_r_peaks(samples, fs, margin=margin)
    table = delineate(samples, peaks, fs)
    cycles = []
    for i, r in enumerate(table["r"]):
        k = np.searchsorted(peaks, r)
        prev_r = int(peaks[k - 1]) if k > 0 else None
        cycles.append(_cycle_from_row(table, i, fs, episode, prev_r))
    return cycles


@dataclass
class OutlierStats:
    mean: dict[str, float]
    sd: dict[str, float]


def interval_matrix(cycles: Sequence[CardiacCycle], names=OUTLIER_INTERVALS) -> np.ndarray:
    return np.array([[np.nan if c.intervals.get(n) is None else c.intervals.get(n) for n in names]
                     for c in cycles], dtype=np.float64).reshape(len(cycles), len(names))


def outlier_mask(cycles: Sequence[CardiacCycle], n_sigma: float = 3.0):
    """Flag cycles with a missing interval or one beyond ``n_sigma`` population SDs.

    Returns ``(mask, stats)``; statistics are over the present values of
    each interval type.
    """
    m = interval_matrix(cycles)
    present = ~np.isnan(m)
    with np.errstate(invalid="ignore"):
        counts = present.sum(axis=0)
        sums = np.where(present, m, 0.0).sum(axis=0)
        mean = np.divide(sums, counts, out=np.full(m.shape[1], np.nan), where=counts > 0)
        dev = np.where(present, m - mean, 0.0)
        sd = np.sqrt(np.divide((dev ** 2).sum(axis=0), counts,
                               out=np.full(m.shape[1], np.nan), where=counts > 0))
        far = np.abs(dev) > n_sigma * sd
    mask = (~present).any(axis=1) | (far & present).any(axis=1)
    stats = OutlierStats(dict(zip(OUTLIER_INTERVALS, mean.tolist())),
                         dict(zip(OUTLIER_INTERVALS, sd.tolist())))
    return mask, stats


def remove_outliers(cycles: Sequence[CardiacCycle], n_sigma: float = 3.0):
    """Drop outlier cycles and split the stream at each one.

    Returns ``(runs, removed)`` where ``runs`` is a list of non-empty lists
    of consecutive kept cycles.
    """
    cycles = list(cycles)
    if len(cycles) < 2:
        return ([cycles] if cycles else []), 0
    mask, _ = outlier_mask(cycles, n_sigma)
    runs: list[list[CardiacCycle]] = []
    current: list[CardiacCycle] = []
    for cyc, bad in zip(cycles, mask):
        if bad:
            if current:
                runs.append(current)
            current = []
        else:
            current.append(cyc)
    if current:
        runs.append(current)
    return runs, int(mask.sum())


CYCLE_COLUMNS = ("subject", "day", "episode", "r_index", "p", "q", "r", "s", "t",
                 "pq_ms", "qr_ms", "rs_ms", "qs_ms", "st_ms", "rr_ms", "complete")


def write_cycles_csv(path, rows: Iterable[tuple[str, int, CardiacCycle]]) -> None:
    """Write ``(subject, day, cycle)`` triples as one CSV row per cycle."""

    def fmt(v):
        if v is None:
            return ""
        return f"{v:.4f}" if isinstance(v, float) else str(v)

    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(CYCLE_COLUMNS)
        for subject, day, c in rows:
            f, iv = c.fiducials, c.intervals
            out.writerow([subject, day, c.episode, f.r] + [fmt(getattr(f, k)) for k in "pqrst"]
                         + [fmt(iv.get(k)) for k in ("pq", "qr", "rs", "qs", "st", "rr")]
                         + [int(c.complete)])
