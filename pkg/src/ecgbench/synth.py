"""Synthetic multi-subject ECG "field week" with ground-truth fiducials.

Each beat is a sum of five Gaussian bumps (P, Q, R, S, T) whose timing and
shape are subject-specific and perturbed per day by a drift model.
"""

from __future__ import annotations

import csv
import json
import logging
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from ._seeds import derive_seed
from .edf import save_edf
from .signal import EcgRecording, valid_runs

logger = logging.getLogger(__name__)

WAVES = ("p", "q", "r", "s", "t")
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class SubjectParams:
    """Morphology and rhythm of one synthetic subject.

    ``amplitude`` (mV), ``width`` (Gaussian SD, ms) and ``offset`` (ms from
    R) are ordered P, Q, R, S, T. ``day_drift`` holds one multiplicative
    jitter per day and parameter group: shape ``(n_days, 3, 5)`` for
    amplitude, width and offset.
    """

    amplitude: tuple
    width: tuple
    offset: tuple
    heart_rate: float
    hrv: float
    day_drift: tuple
    seed: int

    def __post_init__(self):
        a, o = self.amplitude, self.offset
        if not (a[2] > abs(a[1]) and a[2] > abs(a[3])):
            raise ValueError("R amplitude must exceed |Q| and |S|")
        if not (o[0] < o[1] < 0 == o[2] < o[3] < o[4]):
            raise ValueError("offsets must satisfy P < Q < 0 = R < S < T")

    @property
    def qs_span(self) -> float:
        return self.offset[3] - self.offset[1]

    def on_day(self, day: int):
        """Return ``(amplitude, width, offset)`` arrays with the day's drift applied."""
        drift = np.asarray(self.day_drift)
        k = min(max(day - 1, 0), len(drift) - 1)
        amp = np.asarray(self.amplitude) * drift[k, 0]
        width = np.asarray(self.width) * drift[k, 1]
        offset = np.asarray(self.offset) * drift[k, 2]
        return amp, width, offset

    def to_dict(self) -> dict:
        d = asdict(self)
        d["day_drift"] = np.asarray(self.day_drift).tolist()
        return d

    @classmethod
    def from_dict(cls, d) -> "SubjectParams":
        d = dict(d)
        for k in ("amplitude", "width", "offset"):
            d[k] = tuple(d[k])
        d["day_drift"] = tuple(map(lambda x: tuple(map(tuple, x)), d["day_drift"]))
        return cls(**d)


def generate_subject(seed: int, n_days: int = 7, drift: float = 0.08) -> SubjectParams:
    """Draw subject parameters from physiologic ranges (QRS 70-110 ms, 55-90 bpm)."""
    rng = np.random.default_rng(seed)
    qs = rng.uniform(70.0, 110.0)
    q_share = rng.uniform(0.4, 0.6)
    offset = (-rng.uniform(150.0, 190.0), -qs * q_share, 0.0, qs * (1 - q_share),
              rng.uniform(230.0, 320.0))
    amplitude = (rng.uniform(0.08, 0.25), -rng.uniform(0.1, 0.3), rng.uniform(0.8, 1.8),
                 -rng.uniform(0.2, 0.6), rng.uniform(0.15, 0.5))
    width = (rng.uniform(15.0, 25.0), rng.uniform(5.0, 10.0), rng.uniform(7.0, 12.0),
             rng.uniform(6.0, 12.0), rng.uniform(30.0, 50.0))
    jitter = np.clip(rng.standard_normal((n_days, 3, 5)), -3, 3)
    scale = np.array([2.0, 1.0, 1.0])[None, :, None] * drift
    day_drift = 1.0 + jitter * scale
    day_drift[:, 2, 2] = 1.0
    return SubjectParams(
        amplitude=tuple(float(v) for v in amplitude),
        width=tuple(float(v) for v in width),
        offset=tuple(float(v) for v in offset),
        heart_rate=float(rng.uniform(55.0, 90.0)),
        hrv=float(rng.uniform(20.0, 60.0)),
        day_drift=tuple(map(lambda x: tuple(map(tuple, x)), day_drift.tolist())),
        seed=int(seed),
    )


@dataclass
class FieldWeekConfig:
    n_subjects: int = 20
    n_days: int = 7
    minutes_per_day: float = 10.0
    partial_day_fraction: float = 0.5  # first and last day
    gaps_per_day: int = 2
    gap_seconds: float = 30.0
    snr_db: Optional[float] = 20.0  # None disables broadband noise
    powerline_mv: float = 0.05
    powerline_hz: float = 50.0
    wander_mv: float = 0.1
    wander_hz: float = 0.3
    beat_jitter_ms: float = 3.0
    drift: float = 0.08
    sample_rate: int = 1024
    seed: int = 0

    def __post_init__(self):
        if self.minutes_per_day <= 0 or self.gap_seconds < 0:
            raise ValueError("durations must be positive")
        if self.snr_db is not None and not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite or None")
        if self.n_days < 1 or self.n_subjects < 1:
            raise ValueError("need at least one subject and one day")

    def day_seconds(self, day: int) -> float:
        full = self.minutes_per_day * 60.0
        if self.n_days > 2 and day in (1, self.n_days):
            return round(full * self.partial_day_fraction)
        return full

    def clean(self) -> "FieldWeekConfig":
        """Same config with every noise source and gap switched off."""
        return FieldWeekConfig(**{**asdict(self), "snr_db": None, "powerline_mv": 0.0,
                                  "wander_mv": 0.0, "gaps_per_day": 0})


@dataclass
class GroundTruth:
    """Per-beat true fiducial sample indices and the per-sample validity mask."""

    r: np.ndarray
    p: np.ndarray
    q: np.ndarray
    s: np.ndarray
    t: np.ndarray
    validity: np.ndarray
    gaps: list = field(default_factory=list)

    def valid_beats(self) -> np.ndarray:
        """R indices of beats that fall in valid signal."""
        return self.r[self.validity[self.r]]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["beat", "p", "q", "r", "s", "t", "valid"])
            valid = self.validity[self.r]
            for i in range(len(self.r)):
                out.writerow([i, self.p[i], self.q[i], self.r[i], self.s[i], self.t[i],
                              int(valid[i])])


def _beat_times(rng, params: SubjectParams, n: int, fs: int) -> np.ndarray:
    mean_rr = 60000.0 / params.heart_rate
    count = int(n / fs * params.heart_rate / 60.0 * 1.3) + 4
    rr = mean_rr + params.hrv * np.clip(rng.standard_normal(count), -3.0, 3.0)
    t0 = rng.uniform(300.0, 300.0 + mean_rr)
    times = t0 + np.concatenate([[0.0], np.cumsum(rr)])
    return np.round(times * fs / 1000.0).astype(np.int64)


def _place_gaps(rng, n: int, count: int, length: int) -> list[tuple[int, int]]:
    if count <= 0 or length <= 0 or count * length >= n:
        return []
    starts = np.sort(rng.integers(0, n - count * length + 1, size=count))
    return [(int(s + i * length), int(s + (i + 1) * length)) for i, s in enumerate(starts)]


def generate_recording(params: SubjectParams, day: int, config: FieldWeekConfig,
                       subject_id: str = "S00") -> tuple[EcgRecording, GroundTruth]:
    """Render one day of ECG for a subject with ground truth."""
    fs = config.sample_rate
    n = int(round(config.day_seconds(day) * fs))
    seq = np.random.SeedSequence([config.seed, zlib.crc32(subject_id.encode()), day])
    rhythm_ss, noise_ss, gap_ss = seq.spawn(3)
    rhythm = np.random.default_rng(rhythm_ss)

    r_idx = _beat_times(rhythm, params, n, fs)
    r_idx = r_idx[r_idx < n]
    amp, width, offset = params.on_day(day)
    nb = len(r_idx)
    jitter = config.beat_jitter_ms * np.clip(rhythm.standard_normal((nb, 5)), -3, 3)
    jitter[:, 2] = 0.0

    clean = np.zeros(n)
    centers = {}
    for k, wave in enumerate(WAVES):
        c = r_idx + (offset[k] + jitter[:, k]) * fs / 1000.0
        centers[wave] = c
        sd = width[k] * fs / 1000.0
        half = int(np.ceil(5 * sd))
        grid = np.floor(c)[:, None].astype(np.int64) + np.arange(-half, half + 2)[None, :]
        vals = amp[k] * np.exp(-0.5 * ((grid - c[:, None]) / sd) ** 2)
        inside = (grid >= 0) & (grid < n)
        clean += np.bincount(grid[inside], weights=vals[inside], minlength=n)

    x = clean.copy()
    noise_rng = np.random.default_rng(noise_ss)
    t = np.arange(n) / fs
    if config.snr_db is not None:
        power = np.var(clean)
        x += noise_rng.standard_normal(n) * np.sqrt(power / 10 ** (config.snr_db / 10.0))
    if config.powerline_mv:
        x += config.powerline_mv * np.sin(2 * np.pi * config.powerline_hz * t
                                          + noise_rng.uniform(0, 2 * np.pi))
    if config.wander_mv:
        x += config.wander_mv * np.sin(2 * np.pi * config.wander_hz * t
                                       + noise_rng.uniform(0, 2 * np.pi))

    validity = np.ones(n, dtype=bool)
    gaps = _place_gaps(np.random.default_rng(gap_ss), n, config.gaps_per_day,
                       int(round(config.gap_seconds * fs)))
    for a, b in gaps:
        validity[a:b] = False
    x[~validity] = 0.0

    def idx(wave):
        return np.clip(np.round(centers[wave]).astype(np.int64), 0, n - 1)

    truth = GroundTruth(r=r_idx, p=idx("p"), q=idx("q"), s=idx("s"), t=idx("t"),
                        validity=validity, gaps=gaps)
    start = 13 * 3600.0 if day == 1 else 8 * 3600.0
    rec = EcgRecording(samples=x, sample_rate=fs, subject_id=subject_id, day_index=day,
                       start_offset=start, validity=validity)
    return rec, truth


def subject_ids(n: int) -> list[str]:
    width = max(2, len(str(n)))
    return [f"S{i + 1:0{width}d}" for i in range(n)]


def corpus_subjects(config: FieldWeekConfig) -> dict[str, SubjectParams]:
    return {sid: generate_subject(derive_seed(config.seed, "subject", i), config.n_days,
                                  config.drift)
            for i, sid in enumerate(subject_ids(config.n_subjects))}


def iter_field_week(config: FieldWeekConfig, subjects: Optional[dict] = None
                    ) -> Iterator[tuple[str, SubjectParams, EcgRecording, GroundTruth]]:
    """Yield ``(subject_id, params, recording, truth)`` for every subject-day, in memory."""
    subjects = subjects or corpus_subjects(config)
    for sid, params in subjects.items():
        for day in range(1, config.n_days + 1):
            rec, truth = generate_recording(params, day, config, sid)
            yield sid, params, rec, truth


def generate_field_week(config: FieldWeekConfig, out_dir, subjects: Optional[dict] = None) -> dict:
    """Write the corpus as EDF files plus ground-truth CSVs and a JSON manifest.

    Returns the manifest dict (also written to ``out_dir/manifest.json``).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    subjects = subjects or corpus_subjects(config)
    entries = []
    for sid, params, rec, truth in iter_field_week(config, subjects):
        rel = Path(sid) / f"day{rec.day_index}.edf"
        truth_rel = Path(sid) / f"day{rec.day_index}_truth.csv"
        save_edf(rec, out / rel)
        truth.to_csv(out / truth_rel)
        entries.append({
            "path": rel.as_posix(),
            "ground_truth": truth_rel.as_posix(),
            "subject": sid,
            "day": rec.day_index,
            "sample_rate": rec.sample_rate,
            "n_samples": len(rec),
            "n_beats": int(len(truth.r)),
            "gaps": [list(g) for g in truth.gaps],
            "invalid_fraction": round(float(1 - rec.validity.mean()), 9),
        })
        logger.debug("wrote %s", rel)
    manifest = {
        "format": "ecgbench-corpus",
        "version": 1,
        "seed": config.seed,
        "config": asdict(config),
        "subjects": {sid: p.to_dict() for sid, p in subjects.items()},
        "recordings": entries,
    }
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    return manifest


def gap_runs(validity: np.ndarray) -> list[tuple[int, int]]:
    return valid_runs(~np.asarray(validity, dtype=bool))
