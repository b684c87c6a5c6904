"""Compiled inner loops (numba): exact squared EDT and the pair-weight sweep.

Everything here operates on plain contiguous arrays; the typed wrappers live
in grids.py / loss.py. Kernels are nogil so disjoint windows can be processed
by a thread pool.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def edt_squared(mask):
    """Exact squared Euclidean distance to the nearest true pixel.

    Two-pass lower-envelope construction on integer squared distances; exact
    for any mask with at least one true pixel. Rows with no true pixel feed a
    per-row sentinel that can never win against a real row.
    """
    h, w = mask.shape
    big = w + h  # exceeds any in-grid distance
    # phase 1: per-row horizontal distance to the nearest true pixel
    g = np.empty((h, w), np.int64)
    for y in range(h):
        d = big
        for x in range(w):
            if mask[y, x]:
                d = 0
            elif d < big:
                d += 1
            g[y, x] = d
        d = big
        for x in range(w - 1, -1, -1):
            if mask[y, x]:
                d = 0
            elif d < big:
                d += 1
            if d < g[y, x]:
                g[y, x] = d
    # phase 2: per-column lower envelope of parabolas y' -> g[y',x]^2 + (y-y')^2
    out = np.empty((h, w), np.int64)
    v = np.empty(h, np.int64)
    z = np.empty(h + 1, np.float64)
    f = np.empty(h, np.int64)
    for x in range(w):
        for y in range(h):
            f[y] = g[y, x] * g[y, x]
        k = 0
        v[0] = 0
        z[0] = -np.inf
        z[1] = np.inf
        for q in range(1, h):
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
            while s <= z[k]:
                k -= 1
                s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]))
            k += 1
            v[k] = q
            z[k] = s
            z[k + 1] = np.inf
        k = 0
        for y in range(h):
            while z[k + 1] < y:
                k += 1
            dy = y - v[k]
            out[y, x] = dy * dy + f[v[k]]
    return out


@njit(cache=True, nogil=True, inline="always")
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True, nogil=True)
def pair_weight_sweep(pred, labels, region, k):
    """Single maximum-spanning-tree sweep counting bottlenecked pixel pairs.

    pred    : (h, w) f32 values
    labels  : (h, w) int32, 0 on region pixels, 1..k elsewhere
    region  : (h, w) bool
    k       : number of background labels

    Returns (w_counts, v_counts) as flat int64 arrays of length h*w.
    Edges are 4-adjacencies with affinity min(endpoint values), processed in
    (affinity desc, smaller endpoint asc, larger endpoint asc) order; the
    construction order below is exactly (smaller asc, larger asc), so a stable
    descending sort preserves the tie rule. On each merge the bottleneck is
    the smaller-valued endpoint (ties to the smaller linear index): cross-label
    pair counts land in w there iff the pixel is region, same-label counts in
    v iff it is not.
    """
    h, w = pred.shape
    n = h * w
    m = h * (w - 1) + (h - 1) * w
    ea = np.empty(m, np.int64)
    eb = np.empty(m, np.int64)
    aff = np.empty(m, np.float32)
    t = 0
    for y in range(h):
        for x in range(w):
            p = y * w + x
            a = pred[y, x]
            if x + 1 < w:
                b = pred[y, x + 1]
                ea[t] = p
                eb[t] = p + 1
                aff[t] = a if a < b else b
                t += 1
            if y + 1 < h:
                b = pred[y + 1, x]
                ea[t] = p
                eb[t] = p + w
                aff[t] = a if a < b else b
                t += 1
    order = np.argsort(-aff, kind="mergesort")

    parent = np.arange(n)
    size = np.ones(n, np.int64)
    tot = np.zeros(n, np.int64)          # labeled pixels per component
    counts = np.zeros((n, k), np.int64)  # per-label member counts per root
    flat_labels = labels.ravel()
    flat_region = region.ravel()
    flat_pred = pred.ravel()
    for p in range(n):
        lab = flat_labels[p]
        if lab > 0:
            counts[p, lab - 1] = 1
            tot[p] = 1

    wc = np.zeros(n, np.int64)
    vc = np.zeros(n, np.int64)
    for i in range(m):
        e = order[i]
        a = ea[e]
        b = eb[e]
        ra = _find(parent, a)
        rb = _find(parent, b)
        if ra == rb:
            continue
        pa = flat_pred[a]
        pb = flat_pred[b]
        if pa < pb:
            bn = a
        elif pb < pa:
            bn = b
        else:
            bn = a if a < b else b
        same = np.int64(0)
        for j in range(k):
            same += counts[ra, j] * counts[rb, j]
        cross = tot[ra] * tot[rb] - same
        if flat_region[bn]:
            wc[bn] += cross
        else:
            vc[bn] += same
        if size[ra] < size[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        size[ra] += size[rb]
        tot[ra] += tot[rb]
        for j in range(k):
            counts[ra, j] += counts[rb, j]
    return wc, vc


def warmup():
    """Force JIT compilation of all kernels on a tiny input."""
    m = np.zeros((3, 3), np.bool_)
    m[1, 1] = True
    edt_squared(m)
    pred = np.arange(9, dtype=np.float32).reshape(3, 3)
    labels = np.zeros((3, 3), np.int32)
    labels[0] = 1
    labels[2] = 2
    region = labels == 0
    pair_weight_sweep(pred, labels, region, 2)
