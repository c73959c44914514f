"""Recording-to-windows processing chain: resample, episodes, filter, beats, windows."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .dsp import apply_fir, design_fir_bandpass, downsample
from .errors import SignalTooShort
from .features import FULL_SCHEMA, LabeledDataset, windows_from_runs
from .segmentation import remove_outliers, segment_episode
from .signal import EcgRecording, split_clean_episodes

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProcessConfig:
    target_fs: int = 256
    taps: int = 77
    band_low: float = 3.0
    band_high: float = 45.0
    min_episode_s: float = 10.0
    outlier_sigma: float = 3.0
    stride: int = 1


@dataclass
class ProcessStats:
    samples: int = 0
    invalid_samples: int = 0
    episodes: int = 0
    beats: int = 0
    cycles: int = 0
    outliers: int = 0
    windows: int = 0
    notes: list = field(default_factory=list)

    def add(self, other: "ProcessStats") -> None:
        for k in ("samples", "invalid_samples", "episodes", "beats", "cycles", "outliers",
                  "windows"):
            setattr(self, k, getattr(self, k) + getattr(other, k))
        self.notes.extend(other.notes)

    @property
    def invalid_fraction(self) -> float:
        return self.invalid_samples / self.samples if self.samples else 0.0


def process_recording(rec: EcgRecording, config: ProcessConfig = ProcessConfig(),
                      segment_base: int = 0) -> tuple[LabeledDataset, ProcessStats]:
    """Turn one day's recording into full-schema feature windows.

    Window segment ids start at ``segment_base``; one id per clean run.
    """
    stats = ProcessStats(samples=len(rec), invalid_samples=int((~rec.validity).sum()))
    if rec.sample_rate != config.target_fs:
        rec = downsample(rec, config.target_fs)
    fs = rec.sample_rate
    fir = design_fir_bandpass(config.taps, config.band_low, config.band_high, fs)
    margin = fir.delay

    parts = []
    seg = segment_base
    for k, ep in enumerate(split_clean_episodes(rec, config.min_episode_s)):
        try:
            y = apply_fir(ep.samples, fir)
        except SignalTooShort:
            stats.notes.append(f"episode {k} too short to filter")
            continue
        stats.episodes += 1
        cycles = segment_episode(y, fs, episode=k, margin=margin)
        stats.beats += len(cycles)
        runs, removed = remove_outliers(cycles, config.outlier_sigma)
        stats.cycles += sum(len(r) for r in runs)
        stats.outliers += removed
        win = windows_from_runs(runs, fs, rec.subject_id, rec.day_index, ep.t_start,
                                seg, config.stride)
        seg += len(runs)
        if len(win):
            parts.append(win)
    data = LabeledDataset.concat(parts) if parts else LabeledDataset.empty(FULL_SCHEMA)
    stats.windows = len(data)
    return data, stats


def process_subject(recordings, config: ProcessConfig = ProcessConfig()):
    """Process all recordings of one subject with subject-unique segment ids."""
    parts, total = [], ProcessStats()
    base = 0
    for rec in sorted(recordings, key=lambda r: r.day_index):
        data, stats = process_recording(rec, config, segment_base=base)
        if len(data):
            base = int(data.segment.max()) + 1
            parts.append(data)
        total.add(stats)
    data = LabeledDataset.concat(parts) if parts else LabeledDataset.empty(FULL_SCHEMA)
    return data, total


def log_stats(subject: str, stats: ProcessStats) -> str:
    line = (f"{subject}: episodes={stats.episodes} beats={stats.beats} "
            f"outliers={stats.outliers} windows={stats.windows} "
            f"invalid={100 * stats.invalid_fraction:.2f}%")
    logger.info(line)
    return line


def detection_counts(detected, truth, fs: int, tolerance_ms: float = 10.0) -> tuple[int, int, int]:
    """Greedy one-to-one matching of detected to true R indices: ``(tp, fp, fn)``."""
    d = np.asarray(detected, dtype=np.int64)
    t = np.asarray(truth, dtype=np.int64)
    tol = tolerance_ms * fs / 1000.0
    used = np.zeros(len(t), dtype=bool)
    tp = 0
    for p in d:
        k = np.searchsorted(t, p)
        best = -1
        for j in (k - 1, k):
            if 0 <= j < len(t) and not used[j] and abs(t[j] - p) <= tol:
                if best < 0 or abs(t[j] - p) < abs(t[best] - p):
                    best = j
        if best >= 0:
            used[best] = True
            tp += 1
    return tp, len(d) - tp, len(t) - tp
