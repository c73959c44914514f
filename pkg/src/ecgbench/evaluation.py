"""Pair-wise authentication protocol: splits, ROC/EER, decision fusion and reports."""

from __future__ import annotations

import csv
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import models
from ._seeds import derive_seed
from .errors import EmptyScores, InsufficientData, MissingDay, ProtocolViolation
from .features import LabeledDataset, even_allocation

logger = logging.getLogger(__name__)

MIN_CELL = 10
FUSION_LEVELS = (1, 2, 3, 4, 5)
VARIANTS = ("S1", "S2a", "S2b", "S2c")


@dataclass(frozen=True)
class ScenarioSpec:
    """Sample counts and day partition of one evaluation scenario.

    ``train_days`` is ``None`` for S1, where days are ignored.
    """

    variant: str
    n_user_train: int
    n_rest_train: int
    n_user_test: int
    n_attacker_test: int
    train_days: Optional[tuple] = None
    test_min_day: Optional[int] = None

    @property
    def day_based(self) -> bool:
        return self.train_days is not None


def scenario_spec(variant: str) -> ScenarioSpec:
    variant = normalize_variant(variant)
    if variant == "S1":
        return ScenarioSpec("S1", 4000, 4000, 1000, 1000)
    if variant == "S2a":
        return ScenarioSpec("S2a", 2000, 2000, 500, 500, (2,), 3)
    if variant == "S2b":
        return ScenarioSpec("S2b", 4000, 4000, 1000, 1000, (2, 3), 4)
    return ScenarioSpec("S2c", 4000, 4000, 1000, 1000, (2, 3, 4), 5)


def normalize_variant(v) -> str:
    s = str(v).strip()
    key = s.upper().lstrip("S")
    table = {"1": "S1", "2A": "S2a", "2B": "S2b", "2C": "S2c"}
    if key not in table:
        raise ValueError(f"unknown scenario {v!r}; expected one of 1, 2a, 2b, 2c")
    return table[key]


@dataclass
class Split:
    """Row indices into the source dataset for one (user, attacker) pair."""

    user: str
    attacker: str
    train_user: np.ndarray
    train_rest: np.ndarray
    genuine: np.ndarray
    impostor: np.ndarray
    flags: list = field(default_factory=list)

    @property
    def train(self) -> np.ndarray:
        return np.concatenate([self.train_user, self.train_rest])

    @property
    def labels(self) -> np.ndarray:
        return np.r_[np.ones(len(self.train_user), dtype=np.int64),
                     np.zeros(len(self.train_rest), dtype=np.int64)]

    @property
    def sizes(self) -> tuple[int, int]:
        return len(self.train_user) + len(self.train_rest), len(self.genuine) + len(self.impostor)


def _chrono(data: LabeledDataset, idx: np.ndarray) -> np.ndarray:
    return idx[np.lexsort((data.t_start[idx], data.day[idx]))]


def _sample(rng, idx: np.ndarray, n: int) -> np.ndarray:
    return np.sort(rng.choice(idx, size=n, replace=False))


def _even_by_cells(rng, data: LabeledDataset, idx: np.ndarray, n: int, by_subject: bool):
    """Draw ``n`` of ``idx`` spread evenly over (subject, day) cells (or days)."""
    if by_subject:
        keys = np.array([f"{s}\x00{d:04d}" for s, d in zip(data.subject[idx], data.day[idx])])
    else:
        keys = data.day[idx]
    cells, inv = np.unique(keys, return_inverse=True)
    supply = np.bincount(inv, minlength=len(cells))
    alloc = even_allocation(supply, n, rng)
    parts = [_sample(rng, idx[inv == c], alloc[c]) for c in range(len(cells)) if alloc[c]]
    return np.sort(np.concatenate(parts)) if parts else np.empty(0, dtype=np.int64)


def build_split(spec: ScenarioSpec, data: LabeledDataset, user: str, attacker: str,
                seed: int) -> Split:
    """Training and test rows for one ordered (user, attacker) pair.

    When a cell lacks supply, every count is scaled by the same factor so
    class balance is kept, and the split is flagged ``shrunk``.
    """
    if user == attacker:
        raise ValueError("user and attacker must differ")
    rng = np.random.default_rng(seed)
    subj = data.subject
    is_user = subj == user
    is_att = subj == attacker
    rest = np.flatnonzero(~is_user & ~is_att)

    if spec.day_based:
        user_train_pool = np.flatnonzero(is_user & np.isin(data.day, spec.train_days))
        user_test_pool = np.flatnonzero(is_user & (data.day >= spec.test_min_day))
        have = set(data.day[user_train_pool].tolist())
        missing = [d for d in spec.train_days if d not in have]
        if missing:
            raise MissingDay(f"{user} has no windows on training day(s) {missing}")
        if len(user_test_pool) == 0:
            raise MissingDay(f"{user} has no windows on day >= {spec.test_min_day}")
        user_pools = (user_train_pool, user_test_pool)
    else:
        pool = np.flatnonzero(is_user)
        user_pools = (pool, pool)
    att_pool = np.flatnonzero(is_att)

    want = np.array([spec.n_user_train, spec.n_rest_train, spec.n_user_test,
                     spec.n_attacker_test], dtype=np.float64)
    if spec.day_based:
        supply = np.array([len(user_pools[0]), len(rest), len(user_pools[1]), len(att_pool)])
    else:
        # train and test user windows come from one pool
        supply = np.array([len(user_pools[0]) * want[0] / (want[0] + want[2]), len(rest),
                           len(user_pools[0]) * want[2] / (want[0] + want[2]), len(att_pool)])
    factor = min(1.0, float(np.min(supply / want)))
    flags = []
    counts = want.astype(np.int64)
    if factor < 1.0:
        counts = np.floor(want * factor + 1e-9).astype(np.int64)
        flags.append("shrunk")
    if counts.min() < MIN_CELL:
        raise InsufficientData(f"pair ({user}, {attacker}): a cell would hold {counts.min()} "
                               f"windows (< {MIN_CELL})")
    n_ut, n_rt, n_ue, n_ae = (int(c) for c in counts)

    if spec.day_based:
        train_user = _even_by_cells(rng, data, user_pools[0], n_ut, False)
        genuine = _chrono(data, _even_by_cells(rng, data, user_pools[1], n_ue, False))
        impostor = _chrono(data, _even_by_cells(rng, data, att_pool, n_ae, False))
    else:
        drawn = rng.choice(user_pools[0], size=n_ut + n_ue, replace=False)
        train_user = np.sort(drawn[:n_ut])
        genuine = _chrono(data, drawn[n_ut:])
        impostor = _chrono(data, _sample(rng, att_pool, n_ae))
    train_rest = _even_by_cells(rng, data, rest, n_rt, True)
    split = Split(user, attacker, train_user, train_rest, genuine, impostor, flags)
    check_split(split, spec, data)
    return split


def check_split(split: Split, spec: ScenarioSpec, data: LabeledDataset) -> None:
    """Leakage guard; raises :class:`ProtocolViolation` on any breach."""
    train = split.train
    subj = data.subject
    if np.any(subj[train] == split.attacker):
        raise ProtocolViolation(f"attacker {split.attacker} present in training data")
    if np.any(subj[split.train_user] != split.user) or np.any(subj[split.genuine] != split.user):
        raise ProtocolViolation("user rows carry another subject's label")
    if np.any(subj[split.train_rest] == split.user):
        raise ProtocolViolation("user windows leaked into the rest-of-world class")
    if np.any(subj[split.impostor] != split.attacker):
        raise ProtocolViolation("impostor rows are not the attacker's")
    test = np.concatenate([split.genuine, split.impostor])
    if np.intersect1d(train, test).size or len(np.unique(train)) != len(train) \
            or len(np.unique(test)) != len(test):
        raise ProtocolViolation("a window is reused across or within train/test")
    if spec.day_based:
        if not np.isin(data.day[split.train_user], spec.train_days).all():
            raise ProtocolViolation("user training window outside the training days")
        if np.any(data.day[split.genuine] < spec.test_min_day):
            raise ProtocolViolation("user test window from a training day")


# ---------------------------------------------------------------- metrics

@dataclass
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # +inf first, then distinct scores descending
    auc: float
    eer: float


def compute_roc(genuine, impostor) -> RocCurve:
    """Exact ROC over every distinct score (accept when ``score >= threshold``)."""
    g = np.asarray(genuine, dtype=np.float64).ravel()
    i = np.asarray(impostor, dtype=np.float64).ravel()
    if len(g) == 0 or len(i) == 0:
        raise EmptyScores("both genuine and impostor scores are required")
    scores = np.concatenate([g, i])
    is_g = np.r_[np.ones(len(g)), np.zeros(len(i))]
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    tp = np.cumsum(is_g[order])
    fp = np.cumsum(1.0 - is_g[order])
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tpr = np.r_[0.0, tp[last] / len(g)]
    fpr = np.r_[0.0, fp[last] / len(i)]
    thr = np.r_[np.inf, s[last]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) * 0.5))
    return RocCurve(fpr, tpr, thr, auc, equal_error_rate(fpr, tpr))


def equal_error_rate(fpr, tpr) -> float:
    """FPR where FPR = FNR, linearly interpolated between bracketing sweep points."""
    d = fpr - (1.0 - tpr)
    k = int(np.argmax(d >= 0))  # d ends at +1, so a crossing exists
    if d[k] == 0 or k == 0:
        return float(fpr[k])
    lam = -d[k - 1] / (d[k] - d[k - 1])
    return float(fpr[k - 1] + lam * (fpr[k] - fpr[k - 1]))


def fuse_decisions(scores, segments=None, order_key=None, k: int = 1) -> np.ndarray:
    """Mean of disjoint groups of ``k`` consecutive scores within each segment.

    Scores are ordered by ``(segment, order_key)``; incomplete trailing
    groups are dropped. ``k == 1`` returns the scores unchanged.
    """
    s = np.asarray(scores, dtype=np.float64)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return s.copy()
    seg = np.zeros(len(s), dtype=np.int64) if segments is None else np.asarray(segments)
    key = np.arange(len(s)) if order_key is None else np.asarray(order_key)
    idx = np.lexsort((key, seg))
    s, seg = s[idx], seg[idx]
    out = []
    bounds = np.r_[0, np.flatnonzero(seg[1:] != seg[:-1]) + 1, len(s)]
    for a, b in zip(bounds[:-1], bounds[1:]):
        m = (b - a) // k
        if m:
            out.append(s[a:a + m * k].reshape(m, k).mean(axis=1))
    return np.concatenate(out) if out else np.empty(0)


# ---------------------------------------------------------------- pairs

@dataclass
class PairEvaluation:
    user: str
    attacker: str
    genuine: np.ndarray
    impostor: np.ndarray
    genuine_segment: np.ndarray
    impostor_segment: np.ndarray
    genuine_time: np.ndarray
    impostor_time: np.ndarray
    n_train: int
    flags: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def fused(self, k: int) -> tuple[np.ndarray, np.ndarray]:
        return (fuse_decisions(self.genuine, self.genuine_segment, self.genuine_time, k),
                fuse_decisions(self.impostor, self.impostor_segment, self.impostor_time, k))

    @property
    def segment_keys(self):
        return self.genuine_segment, self.impostor_segment


def evaluate_pair(spec: ScenarioSpec, data: LabeledDataset, config, user: str, attacker: str,
                  seed: int) -> PairEvaluation:
    """Train a user-vs-rest model without the attacker and score both test sets."""
    split = build_split(spec, data, user, attacker, seed)
    cfg = models.base.with_seed(config, derive_seed(seed, "model"))
    model = models.train(cfg, data.X[split.train], split.labels, data.schema,
                         scenario=spec.variant)
    g, i = split.genuine, split.impostor
    return PairEvaluation(
        user=user, attacker=attacker,
        genuine=model.score(data.X[g]), impostor=model.score(data.X[i]),
        genuine_segment=data.segment[g], impostor_segment=data.segment[i],
        genuine_time=data.t_start[g] + 86400.0 * data.day[g],
        impostor_time=data.t_start[i] + 86400.0 * data.day[i],
        n_train=len(split.train), flags=list(split.flags), diagnostics=dict(model.diagnostics))


@dataclass
class FusionResult:
    k: int
    roc: RocCurve
    pair_eer: np.ndarray


@dataclass
class EvalReport:
    scenario: str
    classifier: str
    pairs: list
    fusion: dict  # k -> FusionResult
    failures: list = field(default_factory=list)  # (user, attacker, message)
    excluded: list = field(default_factory=list)
    runtime_s: float = 0.0

    @property
    def roc(self) -> RocCurve:
        return self.fusion[min(self.fusion)].roc

    def difficult_fraction(self, k: int = 1) -> float:
        e = self.fusion[k].pair_eer
        e = e[np.isfinite(e)]
        if len(e) == 0:
            return float("nan")
        return float(np.mean(e > e.mean() + 2 * e.std()))


def aggregate_report(pairs: Sequence[PairEvaluation], levels=FUSION_LEVELS, scenario="S1",
                     classifier="forest") -> EvalReport:
    """Pool scores of all pairs (sorted by user, attacker) into one ROC per fusion level."""
    pairs = sorted(pairs, key=lambda p: (p.user, p.attacker))
    fusion = {}
    for k in levels:
        gs, im, eers = [], [], []
        for p in pairs:
            g, i = p.fused(k)
            gs.append(g)
            im.append(i)
            eers.append(compute_roc(g, i).eer if len(g) and len(i) else np.nan)
        g_all = np.concatenate(gs) if gs else np.empty(0)
        i_all = np.concatenate(im) if im else np.empty(0)
        if len(g_all) == 0 or len(i_all) == 0:
            continue
        fusion[k] = FusionResult(k, compute_roc(g_all, i_all), np.asarray(eers))
    return EvalReport(scenario, classifier, pairs, fusion)


def eligible_subjects(spec: ScenarioSpec, data: LabeledDataset) -> tuple[list, list]:
    """Subjects usable as users; S2 drops those missing a training or test day."""
    subjects = data.subjects
    if not spec.day_based:
        return subjects, []
    keep, dropped = [], []
    for s in subjects:
        days = set(data.day[data.subject == s].tolist())
        if all(d in days for d in spec.train_days) and any(d >= spec.test_min_day for d in days):
            keep.append(s)
        else:
            dropped.append(s)
    for s in dropped:
        logger.warning("%s: excluding %s (missing day %s data)", spec.variant, s,
                       "/".join(map(str, spec.train_days)))
    return keep, dropped


def run_scenario(data: LabeledDataset, variant: str, config, seed: int,
                 levels=FUSION_LEVELS, jobs: int = 1, spec: Optional[ScenarioSpec] = None
                 ) -> EvalReport:
    """Evaluate every ordered pair of eligible subjects and aggregate.

    Per-pair seeds depend only on ``(seed, variant, user, attacker)``, and
    results are merged in sorted order, so ``jobs`` does not affect output.
    """
    spec = spec or scenario_spec(variant)
    started = time.perf_counter()
    subjects, excluded = eligible_subjects(spec, data)
    pairs = [(p, q) for p in subjects for q in subjects if p != q]

    def job(pq):
        p, q = pq
        try:
            return evaluate_pair(spec, data, config, p, q, derive_seed(seed, spec.variant, p, q))
        except (InsufficientData, MissingDay) as exc:
            logger.warning("%s pair (%s, %s) skipped: %s", spec.variant, p, q, exc)
            return (p, q, str(exc))

    if jobs > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(job, pairs))
    else:
        results = [job(pq) for pq in pairs]
    done = [r for r in results if isinstance(r, PairEvaluation)]
    failures = sorted(r for r in results if isinstance(r, tuple))
    report = aggregate_report(done, levels, spec.variant, config.kind)
    report.failures = failures
    report.excluded = excluded
    report.runtime_s = time.perf_counter() - started
    return report


# ---------------------------------------------------------------- output

def _f(x, digits=6) -> str:
    return "nan" if x is None or not np.isfinite(x) else f"{x:.{digits}f}"


def write_pairs_csv(path, reports: Sequence[EvalReport]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["scenario", "classifier", "user", "attacker", "k", "n_genuine",
                      "n_impostor", "auc", "eer", "flags"])
        for rep in reports:
            for k, fr in sorted(rep.fusion.items()):
                for p, eer in zip(rep.pairs, fr.pair_eer):
                    g, i = p.fused(k)
                    auc = compute_roc(g, i).auc if len(g) and len(i) else float("nan")
                    out.writerow([rep.scenario, rep.classifier, p.user, p.attacker, k, len(g),
                                  len(i), _f(auc), _f(eer), ";".join(p.flags)])


def write_roc_csv(path, roc: RocCurve) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["threshold", "fpr", "tpr"])
        for t, f, p in zip(roc.thresholds, roc.fpr, roc.tpr):
            out.writerow(["inf" if np.isinf(t) else f"{t:.9g}", f"{f:.9f}", f"{p:.9f}"])


def summary_text(reports: Sequence[EvalReport], seed: int) -> str:
    lines = [f"ecgbench evaluation summary (seed {seed})", ""]
    lines.append(f"{'scenario':<9}{'classifier':<11}{'pairs':>6}{'AUC':>9}{'EER %':>9}"
                 f"{'pair EER %':>12}{'difficult':>11}")
    for rep in reports:
        if 1 in rep.fusion:
            fr = rep.fusion[1]
            e = fr.pair_eer[np.isfinite(fr.pair_eer)]
            mean_e = 100 * e.mean() if len(e) else float("nan")
            lines.append(f"{rep.scenario:<9}{rep.classifier:<11}{len(rep.pairs):>6}"
                         f"{_f(fr.roc.auc, 3):>9}{_f(100 * fr.roc.eer, 2):>9}"
                         f"{_f(mean_e, 2):>12}{_f(rep.difficult_fraction(1), 3):>11}")
        else:
            lines.append(f"{rep.scenario:<9}{rep.classifier:<11}{len(rep.pairs):>6}  no scores")
    lines += ["", "combined decisions (pooled EER %, k windows = 3k heartbeats)"]
    levels = sorted({k for rep in reports for k in rep.fusion})
    lines.append(f"{'scenario':<9}{'classifier':<11}" + "".join(f"{'k=' + str(k):>9}"
                                                              for k in levels))
    for rep in reports:
        row = "".join(f"{_f(100 * rep.fusion[k].roc.eer, 2) if k in rep.fusion else '-':>9}"
                      for k in levels)
        lines.append(f"{rep.scenario:<9}{rep.classifier:<11}" + row)
    for rep in reports:
        if rep.excluded:
            lines.append(f"excluded in {rep.scenario}: {', '.join(rep.excluded)}")
        for u, a, msg in rep.failures:
            lines.append(f"insufficient data {rep.scenario}/{rep.classifier} ({u}, {a}): {msg}")
    return "\n".join(lines) + "\n"


def write_report(out_dir, reports: Sequence[EvalReport], seed: int) -> list[Path]:
    """Write pairs.csv, one ROC CSV per (scenario, classifier, k) and summary.txt."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [out / "pairs.csv"]
    write_pairs_csv(written[0], reports)
    for rep in reports:
        for k, fr in sorted(rep.fusion.items()):
            path = out / f"roc_{rep.scenario}_{rep.classifier}_k{k}.csv"
            write_roc_csv(path, fr.roc)
            written.append(path)
    summary = out / "summary.txt"
    summary.write_text(summary_text(reports, seed))
    written.append(summary)
    return written
