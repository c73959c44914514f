"""Pure-numpy twins of the kernels in ``_kernels_numba``.

Same signatures, same random streams and tie-breaking, so trees and R-peak
lists come out identical whichever backend is active.
"""

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class _SplitMix:
    def __init__(self, seed):
        self.state = int(seed) & _MASK

    def next(self):
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def uniform(self):
        return float(self.next() >> 11) * (1.0 / 9007199254740992.0)

    def randint(self, n):
        k = int(self.uniform() * n)
        return k if k < n else n - 1


def ez_scan(x, y2, fs, frac, start, stop):
    n = len(y2)
    step = int(0.75 * fs)
    win = int(1.75 * fs)
    half = max(int(round(0.025 * fs)), 1)
    refractory = int(round(0.2 * fs))
    lo = max(start, 1)
    hi = min(stop, n)
    if hi - lo < 2:
        return np.empty(0, dtype=np.int64)

    ring = np.full(3, frac * max(0.0, float(y2[lo:min(lo + 2 * win, hi)].max())))
    slot = 0
    peaks, amps = [], []
    b0 = lo
    while b0 < hi:
        b1 = min(b0 + step, hi)
        w1 = min(b0 + win, hi)
        m = max(0.0, float(y2[b0:w1].max()))
        prev = max(ring[0], ring[1], ring[2])
        cand = frac * m
        ring[slot] = cand if cand <= 1.5 * prev else 1.1 * prev
        slot = (slot + 1) % 3
        th = (ring[0] + ring[1] + ring[2]) / 3.0
        if th > 0.0:
            seg = y2[b0:b1]
            before = y2[b0 - 1:b1 - 1]
            for i in (np.flatnonzero((seg > th) & (before <= th)) + b0):
                a = max(i - half, lo)
                b = min(i + half + 1, hi)
                best = a + int(np.argmax(x[a:b]))
                if peaks and best - peaks[-1] < refractory:
                    if x[best] > amps[-1]:
                        peaks[-1] = best
                        amps[-1] = x[best]
                else:
                    peaks.append(best)
                    amps.append(x[best])
        b0 = b1
    return np.asarray(peaks, dtype=np.int64)


def _score(cl, counts, wsum):
    wl = cl.sum(axis=-1)
    ssl = (cl * cl).sum(axis=-1)
    cr = counts - cl
    ssr = (cr * cr).sum(axis=-1)
    wr = wsum - wl
    return ssl / wl + ssr / wr, wl, ssl, ssr, wr


def grow_tree(X, ranks, uniq, n_bins, y, w, rows, n_classes, max_features, extra, max_depth,
              seed):
    d = X.shape[1]
    rng = _SplitMix(seed)
    feature, threshold, left, right, value = [], [], [], [], []
    importance = np.zeros(d)

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(None)
        return len(feature) - 1

    new_node()
    stack = [(0, np.asarray(rows, dtype=np.int64), 0)]
    while stack:
        node, rws, depth = stack.pop()
        yr = y[rws]
        wr_ = w[rws]
        counts = np.bincount(yr, weights=wr_, minlength=n_classes).astype(np.int64)
        value[node] = counts.astype(np.float64)
        wsum = int(counts.sum())
        ss = int((counts * counts).sum())
        if len(rws) < 2 or np.count_nonzero(counts) < 2 or 0 <= max_depth <= depth:
            continue

        perm = list(range(d))
        best_score, best_f, best_thr = -1.0, -1, 0.0
        visited = 0
        j = 0
        while j < d and visited < max_features:
            r = j + rng.randint(d - j)
            perm[j], perm[r] = perm[r], perm[j]
            f = perm[j]
            j += 1
            rk = ranks[rws, f]
            rmin, rmax = int(rk.min()), int(rk.max())
            if rmin == rmax:
                continue
            visited += 1
            if extra:
                lo_v, hi_v = uniq[f, rmin], uniq[f, rmax]
                thr = lo_v + rng.uniform() * (hi_v - lo_v)
                if thr >= hi_v:
                    thr = lo_v
                mask = X[rws, f] <= thr
                cl = np.bincount(yr[mask], weights=wr_[mask],
                                 minlength=n_classes).astype(np.int64)
                score = _score(cl, counts, wsum)[0]
                if score > best_score:
                    best_score, best_f, best_thr = score, f, thr
                continue
            present, inv = np.unique(rk, return_inverse=True)
            table = np.zeros((len(present), n_classes), dtype=np.int64)
            np.add.at(table, (inv, yr), wr_)
            cum = np.cumsum(table, axis=0)[:-1]
            scores = _score(cum, counts, wsum)[0]
            b = int(np.argmax(scores))
            if scores[b] > best_score:
                best_score, best_f = float(scores[b]), f
                a, bb = uniq[f, present[b]], uniq[f, present[b + 1]]
                thr = 0.5 * (a + bb)
                best_thr = a if thr >= bb else thr

        if best_f < 0:
            continue
        mask = X[rws, best_f] <= best_thr
        cl = np.bincount(yr[mask], weights=wr_[mask], minlength=n_classes).astype(np.int64)
        _, wl, ssl, ssr, wr = _score(cl, counts, wsum)
        importance[best_f] += (wsum - ss / wsum) - (wl - ssl / wl) - (wr - ssr / wr)
        feature[node] = best_f
        threshold[node] = best_thr
        lnode = new_node()
        rnode = new_node()
        left[node], right[node] = lnode, rnode
        stack.append((rnode, rws[~mask], depth + 1))
        stack.append((lnode, rws[mask], depth + 1))

    return (np.asarray(feature, dtype=np.int32), np.asarray(threshold, dtype=np.float64),
            np.asarray(left, dtype=np.int32), np.asarray(right, dtype=np.int32),
            np.vstack(value), importance)


def apply_trees(X, feature, threshold, left, right, roots):
    n = X.shape[0]
    out = np.empty((n, len(roots)), dtype=np.int64)
    rows = np.arange(n)
    for t, root in enumerate(roots):
        node = np.full(n, root, dtype=np.int64)
        while True:
            f = feature[node]
            inner = f >= 0
            if not inner.any():
                break
            ni = node[inner]
            go_left = X[rows[inner], f[inner]] <= threshold[ni]
            node[inner] = root + np.where(go_left, left[ni], right[ni])
        out[:, t] = node
    return out


def svm_dual_cd(Xa, y, upper, max_iter, tol, seed):
    n, d = Xa.shape
    alpha = np.zeros(n)
    w = np.zeros(d)
    qd = np.einsum("ij,ij->i", Xa, Xa)
    order = np.arange(n)
    rng = _SplitMix(seed)
    it = 0
    while it < max_iter:
        for j in range(n - 1, 0, -1):
            r = rng.randint(j + 1)
            order[j], order[r] = order[r], order[j]
        pg_max, pg_min = -np.inf, np.inf
        for i in order:
            row = Xa[i]
            g = y[i] * float(w @ row) - 1.0
            a = alpha[i]
            if a == 0.0:
                pg = min(g, 0.0)
            elif a == upper[i]:
                pg = max(g, 0.0)
            else:
                pg = g
            pg_max = max(pg_max, pg)
            pg_min = min(pg_min, pg)
            if pg != 0.0 and qd[i] > 0.0:
                new = min(max(a - g / qd[i], 0.0), upper[i])
                alpha[i] = new
                w += ((new - a) * y[i]) * row
        it += 1
        if pg_max - pg_min < tol:
            break
    return w, it
