"""Signal containers and clean-episode extraction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

PIPELINE_RATES = (1024, 256)


@dataclass
class EcgRecording:
    """A uniformly sampled single-lead ECG in millivolts.

    ``validity`` is True where the device reported a valid heart-rate
    measure and was not charging.
    """

    samples: np.ndarray
    sample_rate: int
    subject_id: str = "unknown"
    day_index: int = 0
    start_offset: float = 0.0
    validity: np.ndarray | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        self.sample_rate = int(self.sample_rate)
        if self.day_index < 0:
            raise ValueError("day_index must be >= 0")
        if self.validity is None:
            self.validity = np.ones(len(self.samples), dtype=bool)
        else:
            self.validity = np.asarray(self.validity, dtype=bool)
            if self.validity.shape != self.samples.shape:
                raise ValueError("validity mask must have the same length as samples")
        if self.sample_rate not in PIPELINE_RATES:
            logger.warning("recording %s/day%d has non-standard sample rate %d Hz",
                           self.subject_id, self.day_index, self.sample_rate)

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def standard_rate(self) -> bool:
        return self.sample_rate in PIPELINE_RATES


@dataclass
class Episode:
    """A contiguous run of valid samples cut from one recording."""

    subject_id: str
    day_index: int
    start: int
    length: int
    sample_rate: int
    samples: np.ndarray = field(repr=False)
    start_offset: float = 0.0  # seconds from day start of the parent recording

    @property
    def stop(self) -> int:
        return self.start + self.length

    @property
    def t_start(self) -> float:
        return self.start_offset + self.start / self.sample_rate


def valid_runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Return ``(start, stop)`` of every maximal run of True values."""
    mask = np.asarray(mask, dtype=bool)
    if mask.size == 0:
        return []
    edges = np.diff(np.concatenate(([0], mask.view(np.int8), [0])))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    return list(zip(starts.tolist(), stops.tolist()))


def split_clean_episodes(recording: EcgRecording, min_len: float = 10.0) -> list[Episode]:
    """Cut a recording into maximal valid runs of at least ``min_len`` seconds.

    Runs never join across invalid gaps. Shorter runs are dropped and the
    remaining episodes keep their order of appearance.
    """
    if min_len < 0:
        raise ValueError("min_len must be >= 0")
    min_samples = int(np.ceil(min_len * recording.sample_rate))
    episodes = []
    for start, stop in valid_runs(recording.validity):
        if stop - start < max(min_samples, 1):
            continue
        episodes.append(Episode(
            subject_id=recording.subject_id,
            day_index=recording.day_index,
            start=start,
            length=stop - start,
            sample_rate=recording.sample_rate,
            samples=recording.samples[start:stop],
            start_offset=recording.start_offset,
        ))
    return episodes
