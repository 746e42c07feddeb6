"""Compiled CART growth: exhaustive Gini split search over presorted features.

Every feature keeps its own list of sample positions sorted by value. A
node is the same contiguous range in every list, and a split stably
partitions each list, so no sorting happens below the root.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _gini_sum(counts, n):
    # n * gini = n - sum(c^2) / n
    s = 0.0
    for c in counts:
        s += c * c
    return n - s / n


@njit(cache=True)
def grow_tree(X, order, sorted_x, sorted_y, counts_per_row, n_classes, max_depth, min_leaf, max_features, seed):
    """Grow one tree depth-first.

    Args:
        X: (N, F) float64 features.
        order: (F, N) int64, ``order[f]`` = argsort of ``X[:, f]``.
        sorted_x: (F, N) float64, ``X[order[f], f]``.
        sorted_y: (F, N) int64, labels in ``order[f]`` order.
        counts_per_row: (N,) int64 multiplicity of each row (bootstrap counts).
        max_features: number of features drawn per node (>= F means all).
        seed: seed for the per-node feature draws.

    Returns ``(feature, threshold, left, right, value, n_samples, impurity)``;
    leaves have ``feature == -1`` and rows with ``x <= threshold`` go left.
    """
    np.random.seed(seed)
    n_rows, n_features = X.shape
    n_total = 0
    for r in range(n_rows):
        n_total += counts_per_row[r]

    # sorted sample lists with duplicates expanded
    S = np.empty((n_features, n_total), dtype=np.int64)
    V = np.empty((n_features, n_total))
    L = np.empty((n_features, n_total), dtype=np.int64)
    for f in range(n_features):
        p = 0
        for i in range(n_rows):
            r = order[f, i]
            for _ in range(counts_per_row[r]):
                S[f, p] = r
                V[f, p] = sorted_x[f, i]
                L[f, p] = sorted_y[f, i]
                p += 1
    buf = np.empty(n_total, dtype=np.int64)
    vbuf = np.empty(n_total)
    lbuf = np.empty(n_total, dtype=np.int64)
    goes_left = np.zeros(n_rows, dtype=np.bool_)

    cap_depth = 2 ** min(max_depth + 1, 40) - 1
    cap = max(1, min(cap_depth, 2 * (n_total // max(min_leaf, 1)) + 1))
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros((cap, n_classes))
    n_samples = np.zeros(cap)
    impurity = np.zeros(cap)

    stack = np.empty((cap, 4), dtype=np.int64)  # node, start, end, depth
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n_total
    stack[0, 3] = 0
    top = 1
    n_nodes = 1

    counts = np.zeros(n_classes)
    lc = np.zeros(n_classes)
    rc = np.zeros(n_classes)
    feats = np.arange(n_features)

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        n = end - start

        counts[:] = 0.0
        for i in range(start, end):
            counts[L[0, i]] += 1.0
        for c in range(n_classes):
            value[node, c] = counts[c] / n
        n_samples[node] = n
        node_imp = _gini_sum(counts, n)
        impurity[node] = node_imp / n

        if depth >= max_depth or n < 2 * min_leaf or node_imp <= 1e-12 * n:
            continue

        if max_features >= n_features:
            cand = np.arange(n_features)
        else:
            for j in range(n_features):
                feats[j] = j
            for j in range(max_features):
                r = j + np.random.randint(n_features - j)
                tmp = feats[j]
                feats[j] = feats[r]
                feats[r] = tmp
            cand = np.sort(feats[:max_features])

        best_score = node_imp - 1e-12 * n
        best_f = -1
        best_pos = -1
        best_thr = 0.0
        total_sq = 0.0
        for c in range(n_classes):
            total_sq += counts[c] * counts[c]
        for f in cand:
            lc[:] = 0.0
            for c in range(n_classes):
                rc[c] = counts[c]
            lsq = 0.0
            rsq = total_sq
            for i in range(n - 1):
                lab = L[f, start + i]
                lsq += 2.0 * lc[lab] + 1.0
                rsq -= 2.0 * rc[lab] - 1.0
                lc[lab] += 1.0
                rc[lab] -= 1.0
                nl = i + 1
                nr = n - nl
                if nl < min_leaf:
                    continue
                if nr < min_leaf:
                    break
                v0 = V[f, start + i]
                v1 = V[f, start + i + 1]
                if not v0 < v1:
                    continue
                score = (nl - lsq / nl) + (nr - rsq / nr)
                if score < best_score:
                    best_score = score
                    best_f = f
                    best_pos = nl
                    thr = 0.5 * (v0 + v1)
                    if thr >= v1:
                        thr = v0
                    best_thr = thr

        if best_f < 0:
            continue

        mid = start + best_pos
        for i in range(start, mid):
            goes_left[S[best_f, i]] = True
        for i in range(mid, end):
            goes_left[S[best_f, i]] = False
        for f in range(n_features):
            if f == best_f:
                continue
            a = start
            b = 0
            for i in range(start, end):
                row = S[f, i]
                if goes_left[row]:
                    S[f, a] = row
                    V[f, a] = V[f, i]
                    L[f, a] = L[f, i]
                    a += 1
                else:
                    buf[b] = row
                    vbuf[b] = V[f, i]
                    lbuf[b] = L[f, i]
                    b += 1
            for i in range(b):
                S[f, a + i] = buf[i]
                V[f, a + i] = vbuf[i]
                L[f, a + i] = lbuf[i]

        feature[node] = best_f
        threshold[node] = best_thr
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack[top, 0] = n_nodes + 1
        stack[top, 1] = mid
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = n_nodes
        stack[top, 1] = start
        stack[top, 2] = mid
        stack[top, 3] = depth + 1
        top += 1
        n_nodes += 2

    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), n_samples[:n_nodes].copy(),
            impurity[:n_nodes].copy())
