"""Slow, obviously-correct reference implementations used by the tests."""

import numpy as np


def auc_pairwise(genuine, impostor):
    """P(genuine > impostor) + 0.5 P(tie) by comparing every pair."""
    g = np.asarray(genuine, dtype=float)[:, None]
    i = np.asarray(impostor, dtype=float)[None, :]
    return float(((g > i).sum() + 0.5 * (g == i).sum()) / (g.size * i.size))


def roc_points(genuine, impostor):
    """(FPR, TPR) for accept-if-score>=t, for t = +inf and every distinct score, descending."""
    g = np.asarray(genuine, dtype=float)
    i = np.asarray(impostor, dtype=float)
    t = np.unique(np.concatenate([g, i]))[::-1]
    fpr = (i[None, :] >= t[:, None]).mean(axis=1)
    tpr = (g[None, :] >= t[:, None]).mean(axis=1)
    return [(0.0, 0.0)] + list(zip(fpr.tolist(), tpr.tolist()))


def eer_scan(genuine, impostor):
    """Where the ROC polyline meets FPR = 1 - TPR, solved segment by segment."""
    pts = roc_points(genuine, impostor)
    for (f0, t0), (f1, t1) in zip(pts, pts[1:]):
        d0 = f0 - (1 - t0)
        d1 = f1 - (1 - t1)
        if d0 == 0:
            return f0
        if d0 < 0 <= d1:
            # f(s) = f0 + s (f1 - f0), fnr(s) = 1 - t0 - s (t1 - t0); solve f = fnr
            s = -d0 / ((f1 - f0) + (t1 - t0))
            return f0 + s * (f1 - f0)
    return pts[-1][0]


def leaking_rows(data, split, spec):
    """Independent re-check of the protocol rules; returns a list of complaints."""
    problems = []
    train_rows = set(split.train_user.tolist()) | set(split.train_rest.tolist())
    test_rows = set(split.genuine.tolist()) | set(split.impostor.tolist())
    if train_rows & test_rows:
        problems.append("overlap")
    for r in train_rows:
        if data.subject[r] == split.attacker:
            problems.append("attacker in train")
            break
    for r in split.train_rest:
        if data.subject[r] == split.user:
            problems.append("user in rest")
            break
    if any(data.subject[r] != split.user for r in split.genuine):
        problems.append("foreign genuine")
    if any(data.subject[r] != split.attacker for r in split.impostor):
        problems.append("foreign impostor")
    if spec.train_days is not None:
        if any(data.day[r] not in spec.train_days for r in split.train_user):
            problems.append("train day")
        if any(data.day[r] < spec.test_min_day for r in split.genuine):
            problems.append("test day")
    return problems
