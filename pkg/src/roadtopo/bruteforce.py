"""Brute-force reference implementations of the pair-weight machinery.

These are the independent oracles: pure Python, no compiled kernels, written
to be obviously correct rather than fast. They exist for the self-test suite
and for exhaustive small-grid checks; the production sweep lives in loss.py.
Only the documented edge-ordering/tie-break convention is shared with the
production code — the mechanisms (per-pair enumeration with explicit member
lists vs. count aggregation) are disjoint on purpose.
"""
from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass

import numpy as np

from .grids import BinaryMask, LabelGrid, ScalarGrid


def _check_pixel(grid: ScalarGrid, p: tuple[int, int], name: str) -> int:
    x, y = p
    if not (0 <= x < grid.width and 0 <= y < grid.height):
        raise ValueError(f"{name}=({x},{y}) outside {grid.width}x{grid.height} grid")
    return y * grid.width + x


def _neighbors4(p: int, w: int, h: int):
    y, x = divmod(p, w)
    if x > 0:
        yield p - 1
    if x + 1 < w:
        yield p + 1
    if y > 0:
        yield p - w
    if y + 1 < h:
        yield p + w


def maximin_from(pred: ScalarGrid, q: tuple[int, int]) -> np.ndarray:
    """Widest-path values from q to every pixel (max over paths of path-min)."""
    w, h = pred.width, pred.height
    vals = pred.data.ravel()
    start = _check_pixel(pred, q, "q")
    best = np.full(w * h, -np.inf)
    best[start] = float(vals[start])
    heap = [(-best[start], start)]
    while heap:
        negd, p = heapq.heappop(heap)
        d = -negd
        if d < best[p]:
            continue
        for nb in _neighbors4(p, w, h):
            nd = min(d, float(vals[nb]))
            if nd > best[nb]:
                best[nb] = nd
                heapq.heappush(heap, (-nd, nb))
    return best.reshape(h, w)


def maximin_bruteforce(pred: ScalarGrid, q: tuple[int, int], r: tuple[int, int]) -> float:
    """Maximin connection cost between two pixels, endpoints included."""
    ri = _check_pixel(pred, r, "r")
    if _check_pixel(pred, q, "q") == ri:
        raise ValueError("q and r must differ")
    return float(maximin_from(pred, q).ravel()[ri])


def maximin_threshold_scan(pred: ScalarGrid, q: tuple[int, int], r: tuple[int, int]) -> float:
    """Same quantity via descending threshold + flood fill; cross-check route."""
    w, h = pred.width, pred.height
    vals = pred.data.ravel()
    qi = _check_pixel(pred, q, "q")
    ri = _check_pixel(pred, r, "r")
    if qi == ri:
        raise ValueError("q and r must differ")
    cap = min(float(vals[qi]), float(vals[ri]))
    for t in sorted({float(v) for v in vals if v <= cap}, reverse=True):
        keep = vals >= t
        seen = {qi}
        queue = deque([qi])
        while queue:
            p = queue.popleft()
            if p == ri:
                return t
            for nb in _neighbors4(p, w, h):
                if keep[nb] and nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
    raise AssertionError("unreachable: the global minimum always connects")


@dataclass(frozen=True)
class PairRecord:
    """One labeled pixel pair with its tie-rule bottleneck attribution."""

    q: int     # linear index, q < r
    r: int
    bottleneck: int
    cross: bool  # labels differ


def pair_attribution(
    pred: ScalarGrid, labels: LabelGrid, region: BinaryMask
) -> list[PairRecord]:
    """Attribute every labeled pixel pair to its bottleneck, the slow way.

    Edges are inserted in (affinity desc, smaller endpoint asc, larger asc)
    order; when an edge first joins the components of q and r, the pair's
    bottleneck is that edge's smaller-valued endpoint (ties to the smaller
    linear index). Component membership is tracked with explicit pixel lists
    and every pair is emitted individually.
    """
    w, h = pred.width, pred.height
    n = w * h
    vals = pred.data.ravel()
    labs = labels.data.ravel()
    edges = []
    for p in range(n):
        y, x = divmod(p, w)
        if x + 1 < w:
            edges.append((min(float(vals[p]), float(vals[p + 1])), p, p + 1))
        if y + 1 < h:
            edges.append((min(float(vals[p]), float(vals[p + w])), p, p + w))
    edges.sort(key=lambda e: (-e[0], e[1], e[2]))

    comp = list(range(n))
    members: list[list[int]] = [[p] for p in range(n)]
    out: list[PairRecord] = []
    for _, a, b in edges:
        ra, rb = comp[a], comp[b]
        if ra == rb:
            continue
        va, vb = float(vals[a]), float(vals[b])
        if va < vb:
            bn = a
        elif vb < va:
            bn = b
        else:
            bn = min(a, b)
        for q in members[ra]:
            if labs[q] == 0:
                continue
            for r in members[rb]:
                if labs[r] == 0:
                    continue
                out.append(PairRecord(min(q, r), max(q, r), bn, labs[q] != labs[r]))
        if len(members[ra]) < len(members[rb]):
            ra, rb = rb, ra
        for p in members[rb]:
            comp[p] = ra
        members[ra].extend(members[rb])
        members[rb] = []
    return out


def bruteforce_pair_weights(
    pred: ScalarGrid, labels: LabelGrid, region: BinaryMask
) -> tuple[np.ndarray, np.ndarray]:
    """Reference w/v count grids from per-pair attribution + region gating."""
    reg = region.data.ravel()
    w_counts = np.zeros(pred.height * pred.width, np.int64)
    v_counts = np.zeros_like(w_counts)
    for rec in pair_attribution(pred, labels, region):
        if rec.cross:
            if reg[rec.bottleneck]:
                w_counts[rec.bottleneck] += 1
        elif not reg[rec.bottleneck]:
            v_counts[rec.bottleneck] += 1
    shape = (pred.height, pred.width)
    return w_counts.reshape(shape), v_counts.reshape(shape)
