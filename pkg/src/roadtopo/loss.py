"""Connectivity-aware training loss over distance-map predictions.

Three terms: a plain squared error against the capped ground-truth distance
map, a disconnectivity term that pushes down the bottleneck pixels separating
background components that should stay separated, and a connectivity term that
keeps background regions internally connected. The pair counts w and v come
from a single maximum-spanning-tree sweep (see _kernels.pair_weight_sweep);
gradients treat them as piecewise-constant.

Ordering convention (shared with bruteforce.py, the independent oracle):
edges are 4-adjacencies with affinity min(endpoint values), processed by
(affinity desc, smaller endpoint asc, larger endpoint asc); the bottleneck of
a merge is its smaller-valued endpoint, ties to the smaller linear index.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._kernels import pair_weight_sweep
from .annotate import GroundTruth
from .grids import (
    BinaryMask,
    LabelGrid,
    ScalarGrid,
    WindowSpec,
    _freeze,
    connected_components,
    crop,
    tile,
)


def _same_extent(a, b) -> None:
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError(
            f"extent mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


@dataclass(frozen=True)
class PairWeights:
    """Per-pixel pair counts: w for cross-component pairs, v for same-component."""

    w: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        w = _freeze(self.w, np.int64)
        v = _freeze(self.v, np.int64)
        if w.shape != v.shape:
            raise ValueError(f"w/v shape mismatch: {w.shape} vs {v.shape}")
        if w.min() < 0 or v.min() < 0:
            raise ValueError("pair counts must be non-negative")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "v", v)

    @property
    def width(self) -> int:
        return self.w.shape[1]

    @property
    def height(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 1e-4
    beta: float = 0.1
    window: int = 64
    mode: str = "windowed"
    dmax: float = 20.0

    def __post_init__(self):
        if self.mode not in ("windowed", "global"):
            raise ValueError(f"mode must be 'windowed' or 'global', got {self.mode!r}")
        if not (np.isfinite(self.alpha) and self.alpha >= 0):
            raise ValueError("alpha must be finite and >= 0")
        if not (np.isfinite(self.beta) and self.beta >= 0):
            raise ValueError("beta must be finite and >= 0")
        if int(self.window) != self.window or self.window < 2:
            raise ValueError("window must be an integer >= 2")
        if not (np.isfinite(self.dmax) and self.dmax > 0):
            raise ValueError("dmax must be finite and > 0")


@dataclass(frozen=True)
class LossBreakdown:
    """Loss values (float64 Python floats) plus the combined gradient grid."""

    mse: float
    dis: float
    conn: float
    total: float
    grad: ScalarGrid


def compute_pair_weights(
    pred: ScalarGrid,
    labels: LabelGrid,
    region: BinaryMask,
    *,
    restrict_search_to_region: bool = False,
) -> PairWeights:
    """Count bottlenecked pixel pairs: cross-label into w, same-label into v.

    A pair's bottleneck is where the maximin path between its pixels attains
    its minimum (tie rule above). Cross-label counts stick only on region
    pixels, same-label counts only off-region; other pairs are dropped.

    `restrict_search_to_region` switches to a variant where a pair's maximin
    path may only traverse region pixels and the pair's own two components;
    pairs left unconnected under that restriction are dropped. Quadratic in
    the component count — diagnostic use on small grids.
    """
    _same_extent(pred, labels)
    _same_extent(pred, region)
    if not np.array_equal(labels.data == 0, region.data):
        raise ValueError("labels and region disagree: label 0 must mark exactly the region pixels")
    if restrict_search_to_region:
        wc, vc = _restricted_pair_weights(pred, labels, region)
        return PairWeights(wc, vc)
    wc, vc = pair_weight_sweep(
        pred.data, labels.data, region.data, labels.component_count
    )
    shape = (pred.height, pred.width)
    return PairWeights(wc.reshape(shape), vc.reshape(shape))


def loss_mse(pred: ScalarGrid, gt_dist: ScalarGrid) -> tuple[float, ScalarGrid]:
    """Sum of squared deviations from the capped distance map, with gradient."""
    _same_extent(pred, gt_dist)
    d = pred.data.astype(np.float64) - gt_dist.data.astype(np.float64)
    value = float(np.sum(d * d))
    return value, ScalarGrid((2.0 * d).astype(np.float32))


def loss_dis(pred: ScalarGrid, weights: PairWeights) -> tuple[float, ScalarGrid]:
    """Sum of w[p]·pred[p]²; w held constant for the gradient."""
    _same_extent(pred, weights)
    p = pred.data.astype(np.float64)
    value = float(np.sum(weights.w * p * p))
    return value, ScalarGrid((2.0 * weights.w * p).astype(np.float32))


def loss_conn(
    pred: ScalarGrid, gt_dist: ScalarGrid, weights: PairWeights
) -> tuple[float, ScalarGrid]:
    """Sum of v[p]·(pred[p] − gt_dist[p])²; v held constant for the gradient."""
    _same_extent(pred, gt_dist)
    _same_extent(pred, weights)
    d = pred.data.astype(np.float64) - gt_dist.data.astype(np.float64)
    value = float(np.sum(weights.v * d * d))
    return value, ScalarGrid((2.0 * weights.v * d).astype(np.float32))


def _window_terms(
    pred: ScalarGrid, gt: GroundTruth, win: WindowSpec
) -> tuple[float, float, np.ndarray, np.ndarray]:
    """dis/conn values and float64 gradients for one window, labels recomputed."""
    pc = crop(pred, win)
    rc = crop(gt.region, win)
    labs = connected_components(rc.complement(), 4)
    wc, vc = pair_weight_sweep(pc.data, labs.data, rc.data, labs.component_count)
    shape = (win.h, win.w)
    w2 = wc.reshape(shape)
    v2 = vc.reshape(shape)
    p = pc.data.astype(np.float64)
    d = p - crop(gt.dist, win).data.astype(np.float64)
    dis = float(np.sum(w2 * p * p))
    conn = float(np.sum(v2 * d * d))
    return dis, conn, 2.0 * w2 * p, 2.0 * v2 * d


def total_loss(
    pred: ScalarGrid, gt: GroundTruth, cfg: LossConfig, *, threads: int = 1
) -> LossBreakdown:
    """Combined loss: mse globally, dis/conn per cfg.mode, summed not averaged.

    Windows are disjoint, each worker writes its own slice of the gradient,
    and values reduce in window order — results are identical for any thread
    count.
    """
    _same_extent(pred, gt)
    if not np.isfinite(pred.data).all():
        raise ValueError("prediction contains non-finite values")
    if threads < 1:
        raise ValueError("threads must be >= 1")

    pd = pred.data.astype(np.float64)
    d = pd - gt.dist.data.astype(np.float64)
    mse = float(np.sum(d * d))
    grad64 = 2.0 * d

    if cfg.mode == "global":
        weights = compute_pair_weights(pred, gt.labels, gt.region)
        p = pd
        dis = float(np.sum(weights.w * p * p))
        conn = float(np.sum(weights.v * d * d))
        grad64 += cfg.alpha * (2.0 * weights.w * p + cfg.beta * 2.0 * weights.v * d)
    else:
        windows = tile(pred.width, pred.height, cfg.window)
        if threads == 1:
            parts = [_window_terms(pred, gt, win) for win in windows]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                parts = list(pool.map(lambda w: _window_terms(pred, gt, w), windows))
        dis = 0.0
        conn = 0.0
        for win, (dval, cval, dgrad, cgrad) in zip(windows, parts):
            dis += dval
            conn += cval
            sl = (slice(win.y0, win.y0 + win.h), slice(win.x0, win.x0 + win.w))
            grad64[sl] += cfg.alpha * (dgrad + cfg.beta * cgrad)

    total = mse + cfg.alpha * (dis + cfg.beta * conn)
    return LossBreakdown(mse, dis, conn, total, ScalarGrid(grad64.astype(np.float32)))


@dataclass(frozen=True)
class GradCheckReport:
    max_rel_err: float
    checked: int
    resampled: int
    worst_pixel: tuple[int, int] | None

    def passed(self, tol: float = 1e-3) -> bool:
        return self.checked > 0 and self.max_rel_err <= tol


def _window_slice(x: int, y: int, cfg: LossConfig, width: int, height: int):
    if cfg.mode == "global":
        return slice(0, height), slice(0, width)
    x0 = (x // cfg.window) * cfg.window
    y0 = (y // cfg.window) * cfg.window
    return (
        slice(y0, min(y0 + cfg.window, height)),
        slice(x0, min(x0 + cfg.window, width)),
    )


def grad_check(
    pred: ScalarGrid,
    gt: GroundTruth,
    cfg: LossConfig,
    eps: float = 1e-3,
    samples: int = 100,
    seed: int = 17,
) -> GradCheckReport:
    """Compare the analytic gradient to central finite differences.

    Sampled pixels must differ from every other value in their window by more
    than 10·eps so the sweep ordering (hence w and v) is locally constant;
    failing draws are resampled, with a hard cap, so `checked` can fall short
    of `samples` on grids without enough separated pixels. The relative error
    uses a unit floor: |a − fd| / max(|a|, |fd|, 1).
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    base = total_loss(pred, gt, cfg)
    analytic = base.grad.data
    w, h = pred.width, pred.height
    rng = np.random.default_rng(seed)

    chosen: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    resampled = 0
    attempts = 0
    while len(chosen) < samples and attempts < 50 * samples:
        attempts += 1
        x = int(rng.integers(0, w))
        y = int(rng.integers(0, h))
        if (x, y) in seen:
            resampled += 1
            continue
        win = pred.data[_window_slice(x, y, cfg, w, h)]
        gap = np.abs(win.astype(np.float64) - float(pred.data[y, x]))
        if np.count_nonzero(gap <= 10.0 * eps) != 1:  # itself only
            resampled += 1
            continue
        seen.add((x, y))
        chosen.append((x, y))

    max_rel = 0.0
    worst: tuple[int, int] | None = None
    for x, y in chosen:
        v = float(pred.data[y, x])
        vp = np.float32(v + eps)
        vm = np.float32(v - eps)
        step = float(vp) - float(vm)  # the f32 delta actually applied
        if step == 0.0:
            continue
        arr = pred.data.copy()
        arr[y, x] = vp
        lp = total_loss(ScalarGrid(arr), gt, cfg).total
        arr[y, x] = vm
        lm = total_loss(ScalarGrid(arr), gt, cfg).total
        fd = (lp - lm) / step
        a = float(analytic[y, x])
        rel = abs(a - fd) / max(abs(a), abs(fd), 1.0)
        if rel > max_rel:
            max_rel = rel
            worst = (x, y)
    return GradCheckReport(max_rel, len(chosen), resampled, worst)


# --- restricted-search variant (diagnostic) ---------------------------------


def _masked_sweep(vals, labs, reg, allowed, li, lj, wc, vc, width):
    """Kruskal sweep over the `allowed` pixels only, counting label li vs lj.

    li == lj counts same-label pairs into vc (off-region bottlenecks only);
    otherwise cross pairs into wc (region bottlenecks only). Same ordering and
    tie rule as the unrestricted sweep.
    """
    idx = np.flatnonzero(allowed)
    edges = []
    allow = allowed
    for p in idx:
        x = p % width
        if x + 1 < width and allow[p + 1]:
            edges.append((min(float(vals[p]), float(vals[p + 1])), int(p), int(p + 1)))
        if p + width < allow.size and allow[p + width]:
            edges.append((min(float(vals[p]), float(vals[p + width])), int(p), int(p + width)))
    edges.sort(key=lambda e: (-e[0], e[1], e[2]))

    parent = {int(p): int(p) for p in idx}
    size = dict.fromkeys(parent, 1)
    ci = {int(p): int(labs[p] == li) for p in idx}
    cj = {int(p): int(labs[p] == lj) for p in idx}

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for _, a, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            continue
        va, vb = float(vals[a]), float(vals[b])
        if va < vb:
            bn = a
        elif vb < va:
            bn = b
        else:
            bn = min(a, b)
        if li == lj:
            if not reg[bn]:
                vc[bn] += ci[ra] * ci[rb]
        elif reg[bn]:
            wc[bn] += ci[ra] * cj[rb] + cj[ra] * ci[rb]
        if size[ra] < size[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        size[ra] += size[rb]
        ci[ra] += ci[rb]
        cj[ra] += cj[rb]


def _restricted_pair_weights(
    pred: ScalarGrid, labels: LabelGrid, region: BinaryMask
) -> tuple[np.ndarray, np.ndarray]:
    vals = pred.data.ravel()
    labs = labels.data.ravel()
    reg = region.data.ravel()
    n = vals.size
    wc = np.zeros(n, np.int64)
    vc = np.zeros(n, np.int64)
    k = labels.component_count
    for i in range(1, k + 1):
        own = reg | (labs == i)
        _masked_sweep(vals, labs, reg, own, i, i, wc, vc, pred.width)
        for j in range(i + 1, k + 1):
            allowed = own | (labs == j)
            _masked_sweep(vals, labs, reg, allowed, i, j, wc, vc, pred.width)
    shape = (pred.height, pred.width)
    return wc.reshape(shape), vc.reshape(shape)
