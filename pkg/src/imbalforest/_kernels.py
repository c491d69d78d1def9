"""Compiled inner loops for tree growing and forest prediction.

Trees are grown on a weighted row set (bootstrap multiplicities) using
per-feature presorted index lists that are stably partitioned at each split,
so no node ever re-sorts. Node randomness comes from SplitMix64 streams keyed
by the node path: the root key is the tree's grow-stream key and a child's
key is ``mix64(parent_key + GOLDEN * (1 + side))`` with side 0 = left, 1 = right.
"""

from __future__ import annotations

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
TIE_TOL = 1e-12
LEAF = -1


@njit(cache=True, nogil=True)
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def child_key(key, side):
    return mix64(key + GOLDEN * np.uint64(1 + side))


@njit(cache=True, nogil=True)
def draw_subset(key, p, m):
    """``m`` distinct features out of ``p`` (partial Fisher-Yates), sorted."""
    perm = np.arange(p)
    state = key
    for i in range(m):
        state = state + GOLDEN
        z = mix64(state)
        u = (z >> np.uint64(11)) * (1.0 / 9007199254740992.0)
        j = i + int(u * (p - i))
        if j >= p:
            j = p - 1
        tmp = perm[i]
        perm[i] = perm[j]
        perm[j] = tmp
    return np.sort(perm[:m])


@njit(cache=True, nogil=True)
def gini_counts(c0, c1):
    n = c0 + c1
    p0 = c0 / n
    p1 = c1 / n
    return 1.0 - p0 * p0 - p1 * p1


@njit(cache=True, nogil=True)
def scan_node(Xt, y, w, orders, start, end, subset, c0, c1):
    """Best (feature, threshold, weighted child impurity) for one node.

    ``Xt`` is the feature-major (transposed) matrix. Returns feature -1 when
    no candidate strictly lowers the node impurity.
    Candidates are visited in (feature, threshold) ascending order and only a
    strictly better one (beyond TIE_TOL) replaces the incumbent.
    """
    total = c0 + c1
    parent = gini_counts(c0, c1)
    best_f = -1
    best_t = 0.0
    best_s = np.inf
    for f in subset:
        l0 = 0.0
        l1 = 0.0
        xf = Xt[f]
        of = orders[f]
        v = xf[of[start]]
        for i in range(start, end - 1):
            r = of[i]
            wr = w[r]
            yr = y[r]
            l1 += wr * yr
            l0 += wr * (1 - yr)
            vn = xf[of[i + 1]]
            if vn > v:
                nl = l0 + l1
                r0 = c0 - l0
                r1 = c1 - l1
                nr = r0 + r1
                s = (nl - (l0 * l0 + l1 * l1) / nl + nr - (r0 * r0 + r1 * r1) / nr) / total
                if s < best_s - TIE_TOL:
                    best_s = s
                    best_f = f
                    t = 0.5 * (v + vn)
                    if t >= vn:
                        t = v
                    best_t = t
            v = vn
    if best_f >= 0 and not best_s < parent - TIE_TOL:
        best_f = -1
    return best_f, best_t, best_s


@njit(cache=True, nogil=True)
def _is_terminal(c0, c1, depth, max_depth, min_samples_split):
    if c0 == 0 or c1 == 0:
        return True
    if max_depth >= 0 and depth >= max_depth:
        return True
    return c0 + c1 < min_samples_split


@njit(cache=True, nogil=True)
def grow(Xt, y, w, sorted_all, max_depth, min_samples_split, m, root_key):
    """Grow one tree. ``w`` holds row multiplicities; rows with w == 0 are absent.

    ``Xt`` is the feature-major matrix and ``sorted_all[f]`` lists all row
    indices ordered by feature ``f`` (stable).
    ``max_depth < 0`` means unlimited. Returns flat node arrays.

    Index lists live in two buffers: a node at depth d reads its segment from
    buffer d % 2 and writes its children's segments into the other one. A
    node's range is only ever reused by its own descendants, so no copy-back
    is needed.
    """
    p, n = Xt.shape
    n_present = 0
    for i in range(n):
        if w[i] > 0:
            n_present += 1
    # one spare slot per list absorbs the branch-free writes below
    orders = np.empty((2, p, n_present + 1), dtype=np.int32)
    present = np.empty(n, dtype=np.int64)
    for i in range(n):
        present[i] = 1 if w[i] > 0 else 0
    for f in range(p):
        k = 0
        for i in range(n):
            r = sorted_all[f, i]
            orders[0, f, k] = r
            k += present[r]

    cap = 2 * n_present + 1
    feature = np.empty(cap, dtype=np.int64)
    threshold = np.empty(cap, dtype=np.float64)
    left = np.empty(cap, dtype=np.int64)
    right = np.empty(cap, dtype=np.int64)
    n0 = np.empty(cap, dtype=np.int64)
    n1 = np.empty(cap, dtype=np.int64)
    feature[0] = LEAF
    threshold[0] = 0.0
    left[0] = LEAF
    right[0] = LEAF
    goes_left = np.zeros(n, dtype=np.int64)
    rbuf = np.empty(n_present + 1, dtype=np.int32)

    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    st_key = np.empty(cap, dtype=np.uint64)

    c0 = 0
    c1 = 0
    for i in range(n_present):
        r = orders[0, 0, i]
        if y[r] == 1:
            c1 += w[r]
        else:
            c0 += w[r]
    n0[0] = c0
    n1[0] = c1
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = n_present
    st_depth[0] = 0
    st_key[0] = root_key
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        key = st_key[top]
        c0 = n0[node]
        c1 = n1[node]
        if _is_terminal(c0, c1, depth, max_depth, min_samples_split):
            continue
        src = orders[depth % 2]
        dst = orders[(depth + 1) % 2]
        subset = draw_subset(key, p, m)
        bf, bt, _ = scan_node(Xt, y, w, src, start, end, subset, float(c0), float(c1))
        if bf < 0:
            continue

        n_left = 0
        l0 = 0
        l1 = 0
        for i in range(start, end):
            r = src[bf, i]
            gl = Xt[bf, r] <= bt
            goes_left[r] = 1 if gl else 0
            if gl:
                n_left += 1
                if y[r] == 1:
                    l1 += w[r]
                else:
                    l0 += w[r]
        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = bf
        threshold[node] = bt
        left[node] = lid
        right[node] = rid
        for child in (lid, rid):
            feature[child] = LEAF
            threshold[child] = 0.0
            left[child] = LEAF
            right[child] = LEAF
        n0[lid] = l0
        n1[lid] = l1
        n0[rid] = c0 - l0
        n1[rid] = c1 - l1
        left_done = _is_terminal(l0, l1, depth + 1, max_depth, min_samples_split)
        right_done = _is_terminal(c0 - l0, c1 - l1, depth + 1, max_depth, min_samples_split)
        if left_done and right_done:
            continue

        for f in range(p):
            sf = src[f]
            df = dst[f]
            a = start
            b = 0
            for i in range(start, end):
                r = sf[i]
                g = goes_left[r]
                df[a] = r
                rbuf[b] = r
                a += g
                b += 1 - g
            for i in range(b):
                df[a + i] = rbuf[i]

        # right pushed first so the left subtree is expanded first
        if not right_done:
            st_node[top] = rid
            st_start[top] = start + n_left
            st_end[top] = end
            st_depth[top] = depth + 1
            st_key[top] = child_key(key, 1)
            top += 1
        if not left_done:
            st_node[top] = lid
            st_start[top] = start
            st_end[top] = start + n_left
            st_depth[top] = depth + 1
            st_key[top] = child_key(key, 0)
            top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        n0[:n_nodes].copy(),
        n1[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def forest_votes(X, offsets, feature, threshold, left, right, vote):
    """Per-row count of trees whose routed leaf votes fraud.

    Trees are concatenated; tree t owns nodes ``offsets[t]:offsets[t+1]`` and
    child pointers are local to the tree.
    """
    n = X.shape[0]
    n_trees = offsets.shape[0] - 1
    out = np.zeros(n, dtype=np.int64)
    for i in range(n):
        total = 0
        for t in range(n_trees):
            base = offsets[t]
            node = 0
            while feature[base + node] >= 0:
                if X[i, feature[base + node]] <= threshold[base + node]:
                    node = left[base + node]
                else:
                    node = right[base + node]
            total += vote[base + node]
        out[i] = total
    return out
