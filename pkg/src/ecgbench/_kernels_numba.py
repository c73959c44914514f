"""numba-compiled inner loops.

Every kernel here has a twin in ``_kernels_numpy`` with the same signature
and bit-identical results; ``_accel`` picks one at import time.
"""

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, nogil=True)
def _next(state):
    # splitmix64; state is a length-1 uint64 array
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _uniform(state):
    return np.float64(_next(state) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True, nogil=True)
def _randint(state, n):
    k = np.int64(_uniform(state) * n)
    return k if k < n else n - 1


# ---------------------------------------------------------------- R peaks

@njit(cache=True, nogil=True)
def ez_scan(x, y2, fs, frac, start, stop):
    """Adaptive-threshold crossing scan followed by refractory merging.

    Returns R-peak sample indices into ``x``.
    """
    n = len(y2)
    step = int(0.75 * fs)
    win = int(1.75 * fs)
    half = max(int(round(0.025 * fs)), 1)
    refractory = int(round(0.2 * fs))
    lo = max(start, 1)
    hi = min(stop, n)
    if hi - lo < 2:
        return np.empty(0, dtype=np.int64)

    ring = np.empty(3)
    init = 0.0
    for i in range(lo, min(lo + 2 * win, hi)):
        if y2[i] > init:
            init = y2[i]
    ring[:] = frac * init
    slot = 0

    peaks = np.empty(hi - lo, dtype=np.int64)
    amps = np.empty(hi - lo)
    count = 0
    b0 = lo
    while b0 < hi:
        b1 = min(b0 + step, hi)
        w1 = min(b0 + win, hi)
        m = 0.0
        for i in range(b0, w1):
            if y2[i] > m:
                m = y2[i]
        prev = max(ring[0], ring[1], ring[2])
        cand = frac * m
        ring[slot] = cand if cand <= 1.5 * prev else 1.1 * prev
        slot = (slot + 1) % 3
        th = (ring[0] + ring[1] + ring[2]) / 3.0
        if th > 0.0:
            for i in range(b0, b1):
                if y2[i] > th and y2[i - 1] <= th:
                    a = max(i - half, lo)
                    b = min(i + half + 1, hi)
                    best = a
                    for j in range(a, b):
                        if x[j] > x[best]:
                            best = j
                    if count > 0 and best - peaks[count - 1] < refractory:
                        if x[best] > amps[count - 1]:
                            peaks[count - 1] = best
                            amps[count - 1] = x[best]
                    else:
                        peaks[count] = best
                        amps[count] = x[best]
                        count += 1
        b0 = b1
    return peaks[:count].copy()


# ---------------------------------------------------------------- trees

@njit(cache=True, nogil=True)
def grow_tree(X, ranks, uniq, n_bins, y, w, rows, n_classes, max_features, extra, max_depth,
              seed):
    """Grow one Gini tree, fully developed unless ``max_depth >= 0``.

    ``rows`` lists the training rows (with bootstrap multiplicity in ``w``).
    Returns ``(feature, threshold, left, right, value, importance)`` trimmed
    to the number of nodes; leaves have ``feature == -1``.
    """
    n_rows = len(rows)
    d = X.shape[1]
    cap = 2 * n_rows + 1
    feature = np.full(cap, -1, dtype=np.int32)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int32)
    right = np.full(cap, -1, dtype=np.int32)
    value = np.zeros((cap, n_classes))
    importance = np.zeros(d)

    idx = rows.copy()
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed
    perm = np.empty(d, dtype=np.int64)
    counts = np.zeros(n_classes, dtype=np.int64)
    cl = np.zeros(n_classes, dtype=np.int64)
    max_bins = uniq.shape[1]
    hist = np.zeros(max_bins * n_classes, dtype=np.int64)
    keys = np.empty(n_rows, dtype=np.int64)

    st_node = np.empty(cap, dtype=np.int64)
    st_s = np.empty(cap, dtype=np.int64)
    st_e = np.empty(cap, dtype=np.int64)
    st_d = np.zeros(cap, dtype=np.int64)
    st_node[0] = 0
    st_s[0] = 0
    st_e[0] = n_rows
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        s = st_s[top]
        e = st_e[top]
        depth = st_d[top]

        counts[:] = 0
        for k in range(s, e):
            i = idx[k]
            counts[y[i]] += w[i]
        wsum = 0
        ss = 0
        nz = 0
        for c in range(n_classes):
            value[node, c] = counts[c]
            wsum += counts[c]
            ss += counts[c] * counts[c]
            if counts[c] > 0:
                nz += 1
        if e - s < 2 or nz < 2 or (max_depth >= 0 and depth >= max_depth):
            continue

        for j in range(d):
            perm[j] = j
        best_score = -1.0
        best_f = -1
        best_thr = 0.0
        visited = 0
        j = 0
        while j < d and visited < max_features:
            r = j + _randint(state, d - j)
            tmp = perm[j]
            perm[j] = perm[r]
            perm[r] = tmp
            f = perm[j]
            j += 1

            rmin = ranks[idx[s], f]
            rmax = rmin
            for k in range(s + 1, e):
                rk = ranks[idx[k], f]
                if rk < rmin:
                    rmin = rk
                if rk > rmax:
                    rmax = rk
            if rmin == rmax:
                continue
            visited += 1

            if extra:
                lo_v = uniq[f, rmin]
                hi_v = uniq[f, rmax]
                thr = lo_v + _uniform(state) * (hi_v - lo_v)
                if thr >= hi_v:
                    thr = lo_v
                cl[:] = 0
                for k in range(s, e):
                    i = idx[k]
                    if X[i, f] <= thr:
                        cl[y[i]] += w[i]
                wl = 0
                ssl = 0
                ssr = 0
                for c in range(n_classes):
                    wl += cl[c]
                    ssl += cl[c] * cl[c]
                    cr = counts[c] - cl[c]
                    ssr += cr * cr
                wr = wsum - wl
                score = ssl / wl + ssr / wr
                if score > best_score:
                    best_score = score
                    best_f = f
                    best_thr = thr
                continue

            span = rmax - rmin + 1
            if span <= 4 * (e - s):
                for q in range(span * n_classes):
                    hist[q] = 0
                for k in range(s, e):
                    i = idx[k]
                    hist[(ranks[i, f] - rmin) * n_classes + y[i]] += w[i]
                cl[:] = 0
                prev = -1
                for b in range(span):
                    nonempty = False
                    for c in range(n_classes):
                        if hist[b * n_classes + c] > 0:
                            nonempty = True
                            break
                    if not nonempty:
                        continue
                    if prev >= 0:
                        wl = 0
                        ssl = 0
                        ssr = 0
                        for c in range(n_classes):
                            wl += cl[c]
                            ssl += cl[c] * cl[c]
                            cr = counts[c] - cl[c]
                            ssr += cr * cr
                        wr = wsum - wl
                        score = ssl / wl + ssr / wr
                        if score > best_score:
                            best_score = score
                            best_f = f
                            a = uniq[f, rmin + prev]
                            bb = uniq[f, rmin + b]
                            thr = 0.5 * (a + bb)
                            best_thr = a if thr >= bb else thr
                    for c in range(n_classes):
                        cl[c] += hist[b * n_classes + c]
                    prev = b
            else:
                m = e - s
                for k in range(m):
                    i = idx[s + k]
                    keys[k] = ranks[i, f] * n_classes + y[i]
                order = np.argsort(keys[:m])
                cl[:] = 0
                k = 0
                prev_rank = -1
                while k < m:
                    i = idx[s + order[k]]
                    rk = ranks[i, f]
                    if prev_rank >= 0:
                        wl = 0
                        ssl = 0
                        ssr = 0
                        for c in range(n_classes):
                            wl += cl[c]
                            ssl += cl[c] * cl[c]
                            cr = counts[c] - cl[c]
                            ssr += cr * cr
                        wr = wsum - wl
                        score = ssl / wl + ssr / wr
                        if score > best_score:
                            best_score = score
                            best_f = f
                            a = uniq[f, prev_rank]
                            bb = uniq[f, rk]
                            thr = 0.5 * (a + bb)
                            best_thr = a if thr >= bb else thr
                    while k < m:
                        i2 = idx[s + order[k]]
                        if ranks[i2, f] != rk:
                            break
                        cl[y[i2]] += w[i2]
                        k += 1
                    prev_rank = rk

        if best_f < 0:
            continue

        # partition rows in place
        a = s
        b = e - 1
        while a <= b:
            if X[idx[a], best_f] <= best_thr:
                a += 1
            else:
                tmp = idx[a]
                idx[a] = idx[b]
                idx[b] = tmp
                b -= 1
        mid = a

        cl[:] = 0
        for k in range(s, mid):
            i = idx[k]
            cl[y[i]] += w[i]
        wl = 0
        ssl = 0
        ssr = 0
        for c in range(n_classes):
            wl += cl[c]
            ssl += cl[c] * cl[c]
            cr = counts[c] - cl[c]
            ssr += cr * cr
        wr = wsum - wl
        importance[best_f] += (wsum - ss / wsum) - (wl - ssl / wl) - (wr - ssr / wr)

        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        st_node[top] = n_nodes + 1
        st_s[top] = mid
        st_e[top] = e
        st_d[top] = depth + 1
        top += 1
        st_node[top] = n_nodes
        st_s[top] = s
        st_e[top] = mid
        st_d[top] = depth + 1
        top += 1
        n_nodes += 2

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), importance)


@njit(cache=True, nogil=True)
def apply_trees(X, feature, threshold, left, right, roots):
    """Leaf node index (global) of every row in every tree: shape (n, n_trees)."""
    n = X.shape[0]
    out = np.empty((n, len(roots)), dtype=np.int64)
    for t in range(len(roots)):
        root = roots[t]
        for i in range(n):
            node = root
            while feature[node] >= 0:
                if X[i, feature[node]] <= threshold[node]:
                    node = root + left[node]
                else:
                    node = root + right[node]
            out[i, t] = node
    return out


# ---------------------------------------------------------------- linear SVM

@njit(cache=True, nogil=True)
def svm_dual_cd(Xa, y, upper, max_iter, tol, seed):
    """Dual coordinate descent for the L1-loss linear SVM.

    ``Xa`` carries a trailing constant column for the bias, ``y`` is +-1 and
    ``upper`` holds the per-sample box bound ``C * weight``.
    Returns ``(w, n_iter)``.
    """
    n, d = Xa.shape
    alpha = np.zeros(n)
    w = np.zeros(d)
    qd = np.empty(n)
    for i in range(n):
        acc = 0.0
        for k in range(d):
            acc += Xa[i, k] * Xa[i, k]
        qd[i] = acc
    order = np.arange(n)
    state = np.empty(1, dtype=np.uint64)
    state[0] = seed
    it = 0
    while it < max_iter:
        for j in range(n - 1, 0, -1):
            r = _randint(state, j + 1)
            tmp = order[j]
            order[j] = order[r]
            order[r] = tmp
        pg_max = -np.inf
        pg_min = np.inf
        for jj in range(n):
            i = order[jj]
            g = 0.0
            for k in range(d):
                g += w[k] * Xa[i, k]
            g = y[i] * g - 1.0
            if alpha[i] == 0.0:
                pg = min(g, 0.0)
            elif alpha[i] == upper[i]:
                pg = max(g, 0.0)
            else:
                pg = g
            if pg > pg_max:
                pg_max = pg
            if pg < pg_min:
                pg_min = pg
            if pg != 0.0 and qd[i] > 0.0:
                old = alpha[i]
                new = min(max(old - g / qd[i], 0.0), upper[i])
                alpha[i] = new
                delta = (new - old) * y[i]
                for k in range(d):
                    w[k] += delta * Xa[i, k]
        it += 1
        if pg_max - pg_min < tol:
            break
    return w, it
