"""Connectivity metrics comparing a reconstructed road graph to a reference.

Five scores: APLS and TLTS over sampled shortest paths, junction recovery
(JCT), marker-propagation f1 (holes-and-marbles), and rasterized CCQ.
Sampling uses one counter-based RNG stream per sample, so evaluating samples
in parallel cannot change results.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .annotate import GeoGraph, rasterize
from .grids import BinaryMask, distance_transform

_ATTEMPTS_PER_SAMPLE = 50


@dataclass(frozen=True)
class MetricConfig:
    """Shared knobs. snap_radius gates endpoint snapping, buffer gates CCQ
    pixel matching, hm_radius is the marker ring spacing (travel budget =
    hm_budget_factor rings), inject_spacing densifies long edges before
    sampling/snapping."""

    seed: int
    samples: int = 500
    buffer: float = 5.0
    snap_radius: float = 15.0
    rel_tol: float = 0.05
    hm_radius: float = 15.0
    inject_spacing: float = 50.0
    hm_budget_factor: int = 8

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        for name in ("buffer", "snap_radius", "hm_radius", "inject_spacing"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.rel_tol < 1:
            raise ValueError("rel_tol must be in (0, 1)")
        if self.hm_budget_factor < 1:
            raise ValueError("hm_budget_factor must be >= 1")


@dataclass(frozen=True)
class MetricReport:
    apls: float
    tlts: float
    jct_recall: float
    jct_precision: float
    jct_f1: float
    hm_f1: float
    correctness: float
    completeness: float
    ccq_quality: float

    def __post_init__(self):
        for name, v in self.as_dict().items():
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} outside [0,1]: {v}")

    def as_dict(self) -> dict[str, float]:
        return {
            "apls": self.apls,
            "tlts": self.tlts,
            "jct_recall": self.jct_recall,
            "jct_precision": self.jct_precision,
            "jct_f1": self.jct_f1,
            "hm_f1": self.hm_f1,
            "correctness": self.correctness,
            "completeness": self.completeness,
            "ccq_quality": self.ccq_quality,
        }


def path_score(l_ref: float, l_other: float) -> float:
    """Per-path APLS contribution: 1 - min(1, |l_ref - l_other| / l_ref)."""
    if l_ref <= 0:
        raise ValueError("reference length must be positive")
    return 1.0 - min(1.0, abs(l_ref - l_other) / l_ref)


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2.0 * p * r / (p + r)


def _oriented_points(graph: GeoGraph, i: int) -> np.ndarray:
    pts = np.asarray(graph.edge_points(i), np.float64)
    ax, ay = graph.positions()[graph.edges[i][0]]
    d0 = math.hypot(pts[0, 0] - ax, pts[0, 1] - ay)
    d1 = math.hypot(pts[-1, 0] - ax, pts[-1, 1] - ay)
    return pts if d0 <= d1 else pts[::-1]


class _AugGraph:
    """Working graph: contiguous node indices, polyline edges, midpoints
    injected every `spacing` px so path sampling sees dense start points.
    Original nodes come first (ascending id), injected ones follow in edge
    order — indices are the deterministic tie-break for node matching."""

    __slots__ = ("xy", "edges", "adj", "anchor")

    def __init__(self, graph: GeoGraph, spacing: float):
        index = {n.id: k for k, n in enumerate(graph.nodes)}
        pts_xy = [(n.x, n.y) for n in graph.nodes]
        self.edges: list[tuple[int, int, float, np.ndarray]] = []
        for i, (a, b) in enumerate(graph.edges):
            chain = _oriented_points(graph, i)
            seglen = np.hypot(*(chain[1:] - chain[:-1]).T)
            total = float(seglen.sum())
            n_seg = max(1, math.ceil(total / spacing)) if total > 0 else 1
            cuts = [total * k / n_seg for k in range(1, n_seg)]
            pieces = _split_polyline(chain, seglen, cuts)
            ids = [index[a]]
            for _ in range(n_seg - 1):
                ids.append(len(pts_xy))
                pts_xy.append((0.0, 0.0))  # patched just below
            ids.append(index[b])
            for k, piece in enumerate(pieces):
                u, v = ids[k], ids[k + 1]
                if k > 0:
                    pts_xy[u] = (float(piece[0, 0]), float(piece[0, 1]))
                plen = float(np.hypot(*(piece[1:] - piece[:-1]).T).sum())
                self.edges.append((u, v, plen, piece))
        self.xy = np.array(pts_xy, np.float64).reshape(len(pts_xy), 2)
        self.adj: list[list[tuple[int, float]]] = [[] for _ in pts_xy]
        for u, v, plen, _ in self.edges:
            self.adj[u].append((v, plen))
            self.adj[v].append((u, plen))
        # (edge index, exact arc offset) locating each node on its first
        # incident edge; (-1, 0.0) for edge-less nodes
        self.anchor: list[tuple[int, float]] = [(-1, 0.0)] * len(pts_xy)
        for e_idx, (u, v, plen, _) in enumerate(self.edges):
            if self.anchor[u][0] < 0:
                self.anchor[u] = (e_idx, 0.0)
            if self.anchor[v][0] < 0:
                self.anchor[v] = (e_idx, plen)

    @property
    def size(self) -> int:
        return len(self.adj)


def _split_polyline(
    chain: np.ndarray, seglen: np.ndarray, cuts: list[float]
) -> list[np.ndarray]:
    """Cut an oriented polyline at ascending arc positions."""
    if not cuts:
        return [chain]
    cum = np.concatenate([[0.0], np.cumsum(seglen)])
    pieces = []
    cur = [chain[0]]
    j = 0
    for s in cuts:
        while j + 1 < len(cum) and cum[j + 1] < s:
            j += 1
            cur.append(chain[j])
        t = 0.0 if seglen[j] == 0 else (s - cum[j]) / seglen[j]
        p = chain[j] * (1 - t) + chain[j + 1] * t
        cur.append(p)
        pieces.append(np.array(cur))
        cur = [p]
    rest = chain[j + 1 :]
    pieces.append(np.vstack([np.array(cur), rest]) if len(rest) else np.array(cur))
    return pieces


def _dijkstra(aug: _AugGraph, src: int) -> np.ndarray:
    dist = np.full(aug.size, np.inf)
    dist[src] = 0.0
    heap = [(0.0, src)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in aug.adj[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


class _Loc(NamedTuple):
    """A point on the graph: arc offset `t` from the u-end of edge `edge`,
    or (edge == -1) a bare node with no incident edges."""

    edge: int
    t: float
    node: int


def _project(aug: _AugGraph, point: np.ndarray) -> tuple[float, int, float] | None:
    """(squared distance, edge index, arc offset) of the closest on-edge
    point. Ties keep the lowest edge index / smallest offset."""
    best: tuple[float, int, float] | None = None
    for e_idx, (_, _, length, pts) in enumerate(aug.edges):
        a, b = pts[:-1], pts[1:]
        dx = b - a
        seg2 = (dx * dx).sum(1)
        t = ((point - a) * dx).sum(1) / np.where(seg2 == 0, 1.0, seg2)
        t = np.where(seg2 == 0, 0.0, np.clip(t, 0.0, 1.0))
        proj = a + t[:, None] * dx
        d2 = ((proj - point) ** 2).sum(1)
        j = int(np.argmin(d2))
        if best is None or d2[j] < best[0]:
            seglen = np.hypot(dx[:, 0], dx[:, 1])
            arc = min(float(seglen[:j].sum() + t[j] * seglen[j]), length)
            best = (float(d2[j]), e_idx, arc)
    return best


def _snap(aug: _AugGraph, point: np.ndarray, radius: float) -> _Loc | None:
    """Nearest location on the graph within radius — interior edge points
    included. A node beating or tying the interior projection wins, so exact
    node hits snap to exact arc offsets (ties between nodes: lowest index)."""
    point = np.asarray(point, np.float64)
    r2 = radius * radius
    best: _Loc | None = None
    best_d2 = np.inf
    hit = _project(aug, point)
    if hit is not None and hit[0] <= r2:
        best_d2 = hit[0]
        best = _Loc(hit[1], hit[2], -1)
    if aug.size:
        d2n = ((aug.xy - point) ** 2).sum(1)
        k = int(np.argmin(d2n))
        if d2n[k] <= r2 and d2n[k] <= best_d2:
            e, t = aug.anchor[k]
            best = _Loc(-1, 0.0, k) if e < 0 else _Loc(e, t, -1)
    return best


def _loc_seeds(aug: _AugGraph, loc: _Loc) -> tuple[tuple[int, float], ...]:
    if loc.edge < 0:
        return ((loc.node, 0.0),)
    u, v, length, _ = aug.edges[loc.edge]
    return ((u, loc.t), (v, length - loc.t))


def _loc_dijkstra(aug: _AugGraph, loc: _Loc) -> np.ndarray:
    """Node distances from an arbitrary graph location."""
    dist = np.full(aug.size, np.inf)
    heap = []
    for n, off in _loc_seeds(aug, loc):
        if off < dist[n]:
            dist[n] = off
            heapq.heappush(heap, (off, n))
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in aug.adj[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def _loc_distance(
    aug: _AugGraph, dist_from_a: np.ndarray, loc_a: _Loc, loc_b: _Loc
) -> float:
    """Shortest travel from loc_a (whose node distances are given) to loc_b;
    two points interior to one edge may connect directly along it."""
    cands = [float(dist_from_a[n]) + off for n, off in _loc_seeds(aug, loc_b)]
    if loc_a.edge >= 0 and loc_a.edge == loc_b.edge:
        cands.append(abs(loc_a.t - loc_b.t))
    return min(cands)


class _PassCache:
    __slots__ = ("aug", "dists", "loc_dists")

    def __init__(self, aug: _AugGraph):
        self.aug = aug
        self.dists: dict[int, np.ndarray] = {}
        self.loc_dists: dict[_Loc, np.ndarray] = {}

    def from_(self, src: int) -> np.ndarray:
        got = self.dists.get(src)
        if got is None:
            got = self.dists[src] = _dijkstra(self.aug, src)
        return got

    def from_loc(self, loc: _Loc) -> np.ndarray:
        got = self.loc_dists.get(loc)
        if got is None:
            got = self.loc_dists[loc] = _loc_dijkstra(self.aug, loc)
        return got


def _sampled_paths(
    src: _AugGraph, dst: _AugGraph, cfg: MetricConfig, tag: int
):
    """Yield (l_src, l_dst | None) per sample: a seeded connected pair from
    src, snapped into dst. None marks a failed snap or unreachable dst path."""
    src_cache, dst_cache = _PassCache(src), _PassCache(dst)
    for i in range(cfg.samples):
        rng = np.random.default_rng((cfg.seed, tag, i))
        found = None
        for _ in range(_ATTEMPTS_PER_SAMPLE):
            a, b = (int(x) for x in rng.integers(0, src.size, 2))
            if a == b:
                continue
            l_src = src_cache.from_(a)[b]
            if not np.isfinite(l_src) or l_src <= 0:
                continue
            found = (a, b, float(l_src))
            break
        if found is None:
            yield None, None
            continue
        a, b, l_src = found
        sa = _snap(dst, src.xy[a], cfg.snap_radius)
        sb = _snap(dst, src.xy[b], cfg.snap_radius)
        if sa is None or sb is None:
            yield l_src, None
            continue
        l_dst = _loc_distance(dst, dst_cache.from_loc(sa), sa, sb)
        yield l_src, (l_dst if np.isfinite(l_dst) else None)


def _path_pass(src: _AugGraph, dst: _AugGraph, cfg: MetricConfig, tag: int) -> float:
    total = 0.0
    for l_src, l_dst in _sampled_paths(src, dst, cfg, tag):
        if l_src is not None and l_dst is not None:
            total += path_score(l_src, l_dst)
    return total / cfg.samples


def apls(pred: GeoGraph, gt: GeoGraph, cfg: MetricConfig) -> float:
    """Symmetric mean of sampled shortest-path agreement, gt→pred and back."""
    if len(gt.nodes) < 2 or len(pred.nodes) < 2:
        return 1.0 if (len(gt.nodes) < 2 and len(pred.nodes) < 2) else 0.0
    if not gt.edges and not pred.edges:
        return 1.0  # neither side has any path to compare
    ag = _AugGraph(gt, cfg.inject_spacing)
    ap = _AugGraph(pred, cfg.inject_spacing)
    return 0.5 * (_path_pass(ag, ap, cfg, 1) + _path_pass(ap, ag, cfg, 2))


def tlts(pred: GeoGraph, gt: GeoGraph, cfg: MetricConfig) -> float:
    """Fraction of sampled gt paths reproduced within rel_tol length."""
    if len(gt.nodes) < 2 or len(pred.nodes) < 2:
        return 1.0 if (len(gt.nodes) < 2 and len(pred.nodes) < 2) else 0.0
    if not gt.edges and not pred.edges:
        return 1.0
    ag = _AugGraph(gt, cfg.inject_spacing)
    ap = _AugGraph(pred, cfg.inject_spacing)
    good = 0
    for l_gt, l_pred in _sampled_paths(ag, ap, cfg, 1):
        if l_gt is not None and l_pred is not None:
            if abs(l_gt - l_pred) / l_gt <= cfg.rel_tol:
                good += 1
    return good / cfg.samples


def _greedy_match(
    a_xy: np.ndarray, b_xy: np.ndarray, radius: float
) -> list[tuple[int, int]]:
    """One-to-one nearest matching within radius; ties by (distance, ia, ib)."""
    cand = []
    for ia in range(len(a_xy)):
        d = np.hypot(b_xy[:, 0] - a_xy[ia, 0], b_xy[:, 1] - a_xy[ia, 1])
        for ib in np.nonzero(d <= radius)[0]:
            cand.append((float(d[ib]), ia, int(ib)))
    cand.sort()
    used_a: set[int] = set()
    used_b: set[int] = set()
    out = []
    for _, ia, ib in cand:
        if ia in used_a or ib in used_b:
            continue
        used_a.add(ia)
        used_b.add(ib)
        out.append((ia, ib))
    return out


def jct(pred: GeoGraph, gt: GeoGraph, cfg: MetricConfig) -> tuple[float, float, float]:
    """Junction recovery: degree-≥3 nodes matched one-to-one by distance;
    a match scores min(deg_pred, deg_gt)/deg_own toward each side."""
    gdeg = gt.degrees()
    pdeg = pred.degrees()
    gpos = gt.positions()
    ppos = pred.positions()
    gj = sorted(n for n, d in gdeg.items() if d >= 3)
    pj = sorted(n for n, d in pdeg.items() if d >= 3)
    if not gj or not pj:
        both = not gj and not pj
        score = 1.0 if both else 0.0
        return score, score, score
    g_xy = np.array([gpos[n] for n in gj])
    p_xy = np.array([ppos[n] for n in pj])
    matches = _greedy_match(g_xy, p_xy, cfg.snap_radius)
    recall = sum(
        min(pdeg[pj[ib]], gdeg[gj[ia]]) / gdeg[gj[ia]] for ia, ib in matches
    ) / len(gj)
    precision = sum(
        min(pdeg[pj[ib]], gdeg[gj[ia]]) / pdeg[pj[ib]] for ia, ib in matches
    ) / len(pj)
    return recall, precision, _f1(precision, recall)


def _markers(aug: _AugGraph, src: _Loc, cfg: MetricConfig) -> np.ndarray:
    """Positions at exact travel distances k·hm_radius (k=0..budget_factor)
    from src: ring crossings on edges plus nodes landing exactly on a ring.

    Travel along an edge is the lower envelope of unit-slope candidates
    (through either endpoint, plus straight along the source edge), so
    crossings are found per linear piece; half-open pieces keep each
    crossing unique and t==0/t==length are left to the node scan."""
    dist = _loc_dijkstra(aug, src)
    rings = [cfg.hm_radius * k for k in range(cfg.hm_budget_factor + 1)]
    out: list[tuple[float, float]] = []
    for n in range(aug.size):
        if np.isfinite(dist[n]) and dist[n] in rings:
            out.append((float(aug.xy[n, 0]), float(aug.xy[n, 1])))
    for e_idx, (u, v, length, pts) in enumerate(aug.edges):
        du, dv = dist[u], dist[v]
        on_src = e_idx == src.edge
        if not (np.isfinite(du) or np.isfinite(dv) or on_src) or length == 0:
            continue

        def travel(t: float) -> float:
            cand = [du + t, dv + (length - t)]
            if on_src:
                cand.append(abs(t - src.t))
            return min(cand)

        cuts = {0.0, length}
        if np.isfinite(du) and np.isfinite(dv):
            cuts.add((dv + length - du) / 2)
        if on_src:
            cuts.add(src.t)
            if np.isfinite(du):
                cuts.add((src.t - du) / 2)
            if np.isfinite(dv):
                cuts.add((dv + length + src.t) / 2)
        grid = sorted(c for c in cuts if 0.0 <= c <= length)
        seglen = np.hypot(*(pts[1:] - pts[:-1]).T)
        hits: list[float] = []
        for t0, t1 in zip(grid[:-1], grid[1:]):
            d0, d1 = travel(t0), travel(t1)
            if not (np.isfinite(d0) and np.isfinite(d1)) or d0 == d1:
                continue
            for s in rings:
                if d0 <= s < d1:  # rising piece, crossing in [t0, t1)
                    t = t0 + (s - d0)
                elif d1 < s <= d0:  # falling piece
                    t = t0 + (d0 - s)
                else:
                    continue
                if 0.0 < t < length:
                    hits.append(t)
        for t in hits:
            out.append(_point_at_arc(pts, seglen, t))
    return np.array(out, np.float64).reshape(len(out), 2)


def _point_at_arc(
    pts: np.ndarray, seglen: np.ndarray, s: float
) -> tuple[float, float]:
    cum = 0.0
    for j, sl in enumerate(seglen):
        if cum + sl >= s and sl > 0:
            t = (s - cum) / sl
            p = pts[j] * (1 - t) + pts[j + 1] * t
            return (float(p[0]), float(p[1]))
        cum += sl
    return (float(pts[-1, 0]), float(pts[-1, 1]))


def holes_marbles(pred: GeoGraph, gt: GeoGraph, cfg: MetricConfig) -> float:
    """Marker-propagation agreement from seeded paired start locations.

    A start that fails to snap counts its reference markers as misses; a
    matched start contributes greedy one-to-one marker matches within
    hm_radius as hits, the rest as misses/extras.
    """
    ag = _AugGraph(gt, cfg.inject_spacing)
    ap = _AugGraph(pred, cfg.inject_spacing)
    if ag.size == 0 or ap.size == 0:
        return 1.0 if (ag.size == 0 and ap.size == 0) else 0.0
    tp = fp = fn = 0
    g_cache: dict[int, np.ndarray] = {}
    p_cache: dict[_Loc, np.ndarray] = {}
    for i in range(cfg.samples):
        rng = np.random.default_rng((cfg.seed, 3, i))
        a = int(rng.integers(0, ag.size))
        if a not in g_cache:
            g_cache[a] = _markers(ag, _Loc(-1, 0.0, a), cfg)
        g_marks = g_cache[a]
        snapped = _snap(ap, ag.xy[a], cfg.snap_radius)
        if snapped is None:
            fn += len(g_marks)
            continue
        if snapped not in p_cache:
            p_cache[snapped] = _markers(ap, snapped, cfg)
        p_marks = p_cache[snapped]
        matched = len(_greedy_match(g_marks, p_marks, cfg.hm_radius))
        tp += matched
        fn += len(g_marks) - matched
        fp += len(p_marks) - matched
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return _f1(precision, recall)


def ccq(
    pred: GeoGraph,
    gt: GeoGraph,
    extent: tuple[int, int],
    buffer: float,
) -> tuple[float, float, float]:
    """Rasterized correctness/completeness/quality with a Euclidean buffer."""
    width, height = extent
    pr = rasterize(pred, width, height).data
    gr = rasterize(gt, width, height).data
    n_pred = int(pr.sum())
    n_gt = int(gr.sum())
    if n_pred == 0 and n_gt == 0:
        return 1.0, 1.0, 1.0
    if n_pred == 0 or n_gt == 0:
        return 0.0, 0.0, 0.0
    to_gt = distance_transform(BinaryMask(gr)).data
    to_pred = distance_transform(BinaryMask(pr)).data
    tp = int((pr & (to_gt <= buffer)).sum())
    matched_gt = int((gr & (to_pred <= buffer)).sum())
    correctness = tp / n_pred
    completeness = matched_gt / n_gt
    quality = tp / (tp + (n_pred - tp) + (n_gt - matched_gt))
    return correctness, completeness, quality


def shortest_path_length(graph: GeoGraph, a: int, b: int) -> float:
    """Dijkstra over polyline edge lengths; inf when unreachable."""
    ids = {n.id for n in graph.nodes}
    if a not in ids or b not in ids:
        raise ValueError("unknown node id")
    if a == b:
        return 0.0
    index = {n.id: k for k, n in enumerate(graph.nodes)}
    adj: list[list[tuple[int, float]]] = [[] for _ in graph.nodes]
    for i, (u, v) in enumerate(graph.edges):
        w = graph.edge_length(i)
        adj[index[u]].append((index[v], w))
        adj[index[v]].append((index[u], w))
    dist = np.full(len(graph.nodes), np.inf)
    dist[index[a]] = 0.0
    heap = [(0.0, index[a])]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in adj[u]:
            nd = d + w
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return float(dist[index[b]])


def evaluate(
    pred: GeoGraph,
    gt: GeoGraph,
    extent: tuple[int, int],
    cfg: MetricConfig,
) -> MetricReport:
    """All five scores in one report."""
    jr, jp, jf = jct(pred, gt, cfg)
    corr, comp, quality = ccq(pred, gt, extent, cfg.buffer)
    return MetricReport(
        apls=apls(pred, gt, cfg),
        tlts=tlts(pred, gt, cfg),
        jct_recall=jr,
        jct_precision=jp,
        jct_f1=jf,
        hm_f1=holes_marbles(pred, gt, cfg),
        correctness=corr,
        completeness=comp,
        ccq_quality=quality,
    )
