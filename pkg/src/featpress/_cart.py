"""Compiled CART kernels used by :mod:`featpress.forest`.

Trees are flat arrays: ``feature[i] == -1`` marks a leaf, otherwise rows with
``x[feature[i]] <= threshold[i]`` go to ``left[i]`` and the rest to
``right[i]``. ``counts[i]`` holds the class counts of the bootstrap rows that
reached node ``i``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

LEAF = -1


@njit(cache=True)
def _best_split(x, y, idx, start, end, f, n_classes, total, lc, sorted_vals, sorted_lab):
    """Best Gini split of ``idx[start:end]`` on feature ``f``.

    Returns (score, threshold, n_left, left_sq) where score is
    sum(left_counts**2)/n_left + sum(right_counts**2)/n_right; score is -1
    when the feature is constant on the node.
    """
    m = end - start
    for i in range(m):
        sorted_vals[i] = x[idx[start + i], f]
    order = np.argsort(sorted_vals[:m], kind="mergesort")
    for i in range(m):
        sorted_lab[i] = y[idx[start + order[i]]]
    vals = sorted_vals[:m][order]
    if vals[0] == vals[m - 1]:
        return -1.0, 0.0, 0, 0.0
    for c in range(n_classes):
        lc[c] = 0
    tot_sq = 0.0
    for c in range(n_classes):
        tot_sq += total[c] * total[c]
    left_sq = 0.0
    right_sq = tot_sq
    best = -1.0
    best_thr = 0.0
    best_nl = 0
    best_lsq = 0.0
    for i in range(m - 1):
        c = sorted_lab[i]
        left_sq += 2.0 * lc[c] + 1.0
        rc = total[c] - lc[c]
        right_sq -= 2.0 * rc - 1.0
        lc[c] += 1
        if vals[i] < vals[i + 1]:
            nl = i + 1
            score = left_sq / nl + right_sq / (m - nl)
            if score > best:
                best = score
                thr = (vals[i] + vals[i + 1]) / 2.0
                if thr >= vals[i + 1]:
                    thr = vals[i]
                best_thr = thr
                best_nl = nl
                best_lsq = left_sq
    return best, best_thr, best_nl, best_lsq


@njit(cache=True, nogil=True)
def grow_tree(x, y, sample, n_classes, mtry, min_samples_split, max_depth, rng_seed):
    """Grow one tree on the rows listed in ``sample`` (duplicates allowed).

    ``mtry`` candidate features are drawn per node without replacement; if
    none of them can split the node, further features are drawn one at a
    time until one can or all are exhausted. Among candidates the highest
    score wins, ties going to the lower feature index, then lower threshold.
    ``max_depth < 0`` means unlimited.
    """
    np.random.seed(rng_seed)
    n = sample.size
    n_feat = x.shape[1]
    cap = 2 * n + 1
    feature = np.full(cap, LEAF, np.int64)
    threshold = np.zeros(cap, np.float64)
    left = np.full(cap, LEAF, np.int64)
    right = np.full(cap, LEAF, np.int64)
    counts = np.zeros((cap, n_classes), np.int64)
    importance = np.zeros(n_feat, np.float64)

    idx = sample.copy()
    scratch = np.empty(n, np.int64)
    sorted_vals = np.empty(n, np.float64)
    sorted_lab = np.empty(n, np.int64)
    lc = np.zeros(n_classes, np.int64)
    perm = np.arange(n_feat)
    cand = np.empty(n_feat, np.int64)

    st_node = np.empty(cap, np.int64)
    st_start = np.empty(cap, np.int64)
    st_end = np.empty(cap, np.int64)
    st_depth = np.empty(cap, np.int64)
    top = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n
    st_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        m = end - start
        for i in range(start, end):
            counts[node, y[idx[i]]] += 1
        total = counts[node]
        pure = False
        for c in range(n_classes):
            if total[c] == m:
                pure = True
        if pure or m < min_samples_split or (max_depth >= 0 and depth >= max_depth):
            continue

        best = -1.0
        best_f = -1
        best_thr = 0.0
        drawn = 0
        while drawn < n_feat:
            # draw the next batch: mtry features first, then one at a time
            batch = mtry if drawn == 0 else 1
            if drawn + batch > n_feat:
                batch = n_feat - drawn
            for i in range(drawn, drawn + batch):
                j = np.random.randint(i, n_feat)
                tmp = perm[i]
                perm[i] = perm[j]
                perm[j] = tmp
            for i in range(batch):
                cand[i] = perm[drawn + i]
            drawn += batch
            cs = np.sort(cand[:batch])
            for i in range(batch):
                f = cs[i]
                score, thr, _, _ = _best_split(
                    x, y, idx, start, end, f, n_classes, total, lc, sorted_vals, sorted_lab
                )
                if score > best:
                    best = score
                    best_f = f
                    best_thr = thr
            if best_f >= 0:
                break
        if best_f < 0:
            continue

        # stable partition of idx[start:end] on the chosen split
        nl = 0
        nr = 0
        for i in range(start, end):
            r = idx[i]
            if x[r, best_f] <= best_thr:
                idx[start + nl] = r
                nl += 1
            else:
                scratch[nr] = r
                nr += 1
        for i in range(nr):
            idx[start + nl + i] = scratch[i]

        tot_sq = 0.0
        for c in range(n_classes):
            tot_sq += total[c] * total[c]
        importance[best_f] += best - tot_sq / m

        feature[node] = best_f
        threshold[node] = best_thr
        lnode = n_nodes
        rnode = n_nodes + 1
        n_nodes += 2
        left[node] = lnode
        right[node] = rnode
        # right pushed first so the left subtree is grown first
        st_node[top] = rnode
        st_start[top] = start + nl
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lnode
        st_start[top] = start
        st_end[top] = start + nl
        st_depth[top] = depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        counts[:n_nodes].copy(),
        importance,
    )


@njit(cache=True, nogil=True)
def apply_tree(feature, threshold, left, right, x):
    """Leaf index reached by every row of ``x``."""
    out = np.empty(x.shape[0], np.int64)
    for r in range(x.shape[0]):
        node = 0
        while feature[node] != LEAF:
            if x[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node
    return out
