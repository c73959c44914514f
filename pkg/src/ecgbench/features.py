"""Three-beat window statistics, feature ranking and per-subject dataset composition."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import EmptySubject, IncompleteCycle, SchemaMismatch, SingleClass
from .segmentation import CardiacCycle

logger = logging.getLogger(__name__)

INTERVALS = ("QR", "RS", "QS")
STATS = ("min", "max", "mean", "median", "std")
FULL_SCHEMA = tuple(f"{i}_{s}" for i in INTERVALS for s in STATS)
SELECTED_SCHEMA = tuple(f"{i}_{s}" for i in INTERVALS for s in ("min", "max", "mean"))
WINDOW = 3


@dataclass(frozen=True)
class BeatWindow:
    cycles: tuple

    def __post_init__(self):
        if len(self.cycles) != WINDOW:
            raise ValueError(f"a window holds exactly {WINDOW} cycles")
        if len({c.episode for c in self.cycles}) != 1:
            raise ValueError("window cycles must come from one episode")


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    schema: tuple = FULL_SCHEMA
    subject_id: str = ""
    day_index: int = 0
    t_start: float = 0.0

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.schema.index(name)])


def _interval_rows(cycles: Sequence[CardiacCycle]) -> np.ndarray:
    out = np.empty((len(cycles), 3))
    for i, c in enumerate(cycles):
        iv = c.intervals
        vals = (iv.qr, iv.rs, iv.qs)
        if any(v is None for v in vals):
            raise IncompleteCycle(f"cycle at R={c.fiducials.r} lacks QR/RS/QS")
        out[i] = vals
    return out


def window_features(intervals: np.ndarray, stride: int = 1) -> np.ndarray:
    """Full-schema statistics for every 3-row window of an ``(L, 3)`` QR/RS/QS array.

    Windows start every ``stride`` rows; the result has shape ``(n_windows, 15)``.
    """
    iv = np.asarray(intervals, dtype=np.float64)
    n = len(iv) - WINDOW + 1
    if n <= 0:
        return np.empty((0, len(FULL_SCHEMA)))
    starts = np.arange(0, n, stride)
    w = iv[starts[:, None] + np.arange(WINDOW)[None, :]]  # (n, 3 beats, 3 intervals)
    w = np.sort(w, axis=1)
    mean = w.mean(axis=1)
    stats = np.stack([w[:, 0], w[:, -1], mean, w[:, 1],
                      np.sqrt(((w - mean[:, None, :]) ** 2).mean(axis=1))], axis=2)
    # mean can drift 1 ulp outside [min, max]
    stats[:, :, 2] = np.clip(stats[:, :, 2], stats[:, :, 0], stats[:, :, 1])
    return stats.reshape(len(starts), -1)


def compute_window_features(window: BeatWindow, subject_id: str = "", day_index: int = 0,
                            t_start: float = 0.0) -> FeatureVector:
    values = window_features(_interval_rows(window.cycles))[0]
    return FeatureVector(values, FULL_SCHEMA, subject_id, day_index, t_start)


def select_features(vector: FeatureVector) -> FeatureVector:
    """Project a full-schema vector onto the 9 selected columns."""
    if tuple(vector.schema) != FULL_SCHEMA:
        raise SchemaMismatch("select_features expects the full 15-value schema")
    idx = [FULL_SCHEMA.index(n) for n in SELECTED_SCHEMA]
    return FeatureVector(vector.values[idx], SELECTED_SCHEMA, vector.subject_id,
                         vector.day_index, vector.t_start)


def select_columns(X: np.ndarray, schema: Sequence[str] = FULL_SCHEMA) -> np.ndarray:
    if tuple(schema) != FULL_SCHEMA:
        raise SchemaMismatch("expected the full 15-value schema")
    return X[:, [FULL_SCHEMA.index(n) for n in SELECTED_SCHEMA]]


def run_windows(run: Sequence[CardiacCycle], stride: int = 1) -> np.ndarray:
    """Full-schema windows of one clean run of consecutive cycles."""
    return window_features(_interval_rows(run), stride)


@dataclass
class LabeledDataset:
    """Feature matrix with per-row subject, day, start time and segment labels.

    ``segment`` identifies the clean run a window came from, so consumers can
    tell consecutive windows apart from ones separated by a gap or outlier.
    """

    X: np.ndarray
    schema: tuple
    subject: np.ndarray
    day: np.ndarray
    t_start: np.ndarray
    segment: np.ndarray
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64).reshape(-1, len(self.schema))
        n = len(self.X)
        self.subject = np.asarray(self.subject, dtype=object)
        self.day = np.asarray(self.day, dtype=np.int64)
        self.t_start = np.asarray(self.t_start, dtype=np.float64)
        self.segment = np.asarray(self.segment, dtype=np.int64)
        if not (len(self.subject) == len(self.day) == len(self.t_start) == len(self.segment) == n):
            raise ValueError("label arrays must match the number of rows")

    def __len__(self):
        return len(self.X)

    @property
    def subjects(self) -> list[str]:
        return sorted(set(self.subject.tolist()))

    def counts(self) -> dict[str, int]:
        names, n = np.unique(self.subject.astype(str), return_counts=True)
        return dict(zip(names.tolist(), n.tolist()))

    def take(self, idx) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.X[idx], self.schema, self.subject[idx], self.day[idx],
                              self.t_start[idx], self.segment[idx], dict(self.flags))

    def where(self, mask) -> "LabeledDataset":
        return self.take(np.flatnonzero(mask))

    def select(self) -> "LabeledDataset":
        """Dataset restricted to the selected 9-feature schema."""
        return LabeledDataset(select_columns(self.X, self.schema), SELECTED_SCHEMA,
                              self.subject, self.day, self.t_start, self.segment,
                              dict(self.flags))

    @classmethod
    def concat(cls, parts: Sequence["LabeledDataset"]) -> "LabeledDataset":
        parts = [p for p in parts if p is not None]
        if not parts:
            raise ValueError("nothing to concatenate")
        schema = parts[0].schema
        if any(tuple(p.schema) != tuple(schema) for p in parts):
            raise SchemaMismatch("datasets disagree on schema")
        flags = {}
        for p in parts:
            flags.update(p.flags)
        return cls(np.concatenate([p.X for p in parts]), schema,
                   np.concatenate([p.subject for p in parts]),
                   np.concatenate([p.day for p in parts]),
                   np.concatenate([p.t_start for p in parts]),
                   np.concatenate([p.segment for p in parts]), flags)

    @classmethod
    def empty(cls, schema=FULL_SCHEMA) -> "LabeledDataset":
        return cls(np.empty((0, len(schema))), tuple(schema), [], [], [], [])


CSV_LABELS = ("subject_id", "day_index", "t_start_s", "segment")


def write_features_csv(path, data: LabeledDataset) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(list(data.schema) + list(CSV_LABELS))
        for i in range(len(data)):
            out.writerow([f"{v:.6f}" for v in data.X[i]]
                         + [data.subject[i], int(data.day[i]), f"{data.t_start[i]:.6f}",
                            int(data.segment[i])])


def read_features_csv(path) -> LabeledDataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaMismatch(f"{path}: empty feature file")
    header = rows[0]
    k = len(header) - len(CSV_LABELS)
    if tuple(header[k:]) != CSV_LABELS or tuple(header[:k]) not in (FULL_SCHEMA, SELECTED_SCHEMA):
        raise SchemaMismatch(f"{path}: unexpected header")
    body = rows[1:]
    X = np.array([[float(v) for v in r[:k]] for r in body]).reshape(len(body), k)
    return LabeledDataset(X, tuple(header[:k]), [r[k] for r in body],
                          [int(r[k + 1]) for r in body], [float(r[k + 2]) for r in body],
                          [int(r[k + 3]) for r in body])


def compose_dataset(per_subject: Mapping[str, LabeledDataset], target_per_subject: int,
                    seed: int) -> LabeledDataset:
    """Subsample each subject to ``target_per_subject`` windows, spread evenly over days.

    Days are filled like water levels: each day gets an equal share, days
    that run short give their remainder to the others. Leftover single
    windows go to days picked at random. Subjects short of the target keep
    everything and are flagged in ``flags["short_subjects"]``. Rows keep
    chronological order within a subject.
    """
    rng = np.random.default_rng(seed)
    parts, short = [], []
    for sid in sorted(per_subject):
        d = per_subject[sid]
        if len(d) == 0:
            raise EmptySubject(f"subject {sid} has no windows")
        if len(d) <= target_per_subject:
            if len(d) < target_per_subject:
                short.append(sid)
            parts.append(d)
            continue
        days = np.unique(d.day)
        supply = np.array([(d.day == k).sum() for k in days])
        alloc = even_allocation(supply, target_per_subject, rng)
        keep = []
        for k, n_take in zip(days, alloc):
            idx = np.flatnonzero(d.day == k)
            keep.append(np.sort(rng.choice(idx, size=n_take, replace=False)))
        parts.append(d.take(np.sort(np.concatenate(keep))))
    if short:
        logger.info("%d subject(s) below target %d: %s", len(short), target_per_subject,
                    ", ".join(short))
    out = LabeledDataset.concat(parts)
    out.flags["short_subjects"] = short
    return out


def even_allocation(supply: np.ndarray, total: int, rng: np.random.Generator) -> np.ndarray:
    """Split ``total`` across cells as evenly as ``supply`` allows.

    Cells get equal shares up to their supply; shortfall is redistributed.
    The final remainder (fewer than the number of open cells) is given one
    each to cells drawn by ``rng``. Returns per-cell counts summing to
    ``min(total, supply.sum())``.
    """
    supply = np.asarray(supply, dtype=np.int64)
    alloc = np.zeros_like(supply)
    left = min(int(total), int(supply.sum()))
    while left > 0:
        open_ = np.flatnonzero(alloc < supply)
        share = left // len(open_)
        if share == 0:
            pick = rng.permutation(open_)[:left]
            alloc[pick] += 1
            break
        add = np.minimum(supply[open_] - alloc[open_], share)
        alloc[open_] += add
        left -= int(add.sum())
    return alloc


@dataclass
class FeatureRanking:
    ranked: list  # (name, importance), descending
    correlation: np.ndarray
    constant: list  # names of zero-variance columns


def rank_features(data: LabeledDataset, seed: int = 0, n_trees: int = 100) -> FeatureRanking:
    """Rank columns by extra-trees impurity importance on subject labels.

    Also returns the Pearson correlation matrix; pairs involving a constant
    column are reported as 0 and the column is listed in ``constant``.
    """
    from .models.forest import ForestConfig, fit_forest

    labels, y = np.unique(data.subject.astype(str), return_inverse=True)
    if len(labels) < 2:
        raise SingleClass("ranking needs at least two subjects")
    forest = fit_forest(data.X, y, ForestConfig(n_trees=n_trees, extra=True, bootstrap=False,
                                                seed=seed), n_classes=len(labels))
    imp = forest.importances
    order = sorted(range(len(data.schema)), key=lambda j: (-imp[j], j))
    ranked = [(data.schema[j], float(imp[j])) for j in order]

    sd = data.X.std(axis=0)
    constant = [data.schema[j] for j in np.flatnonzero(sd == 0)]
    Z = np.where(sd > 0, (data.X - data.X.mean(axis=0)) / np.where(sd > 0, sd, 1.0), 0.0)
    corr = Z.T @ Z / max(len(data), 1)
    live = sd > 0
    np.fill_diagonal(corr, np.where(live, 1.0, 0.0))
    return FeatureRanking(ranked, corr, constant)


def windows_from_runs(runs: Sequence[Sequence[CardiacCycle]], fs: int, subject_id: str,
                      day_index: int, start_offset: float = 0.0, segment_base: int = 0,
                      stride: int = 1, episode_starts: Optional[Mapping[int, int]] = None
                      ) -> LabeledDataset:
    """Windows of every clean run, labelled with subject, day and start time in seconds.

    ``episode_starts`` maps an episode id to its first sample in the day's
    signal, so window times are absolute within the day.
    """
    episode_starts = episode_starts or {}
    blocks, t0s, segs = [], [], []
    for j, run in enumerate(runs):
        if len(run) < WINDOW:
            continue
        f = run_windows(run, stride)
        starts = np.arange(0, len(run) - WINDOW + 1, stride)
        base = episode_starts.get(run[0].episode, 0)
        t0s.append(start_offset + (base + np.array([run[i].fiducials.r for i in starts])) / fs)
        blocks.append(f)
        segs.append(np.full(len(f), segment_base + j))
    if not blocks:
        return LabeledDataset.empty()
    n = sum(len(b) for b in blocks)
    return LabeledDataset(np.concatenate(blocks), FULL_SCHEMA, [subject_id] * n,
                          [day_index] * n, np.concatenate(t0s), np.concatenate(segs))
