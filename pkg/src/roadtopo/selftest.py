"""Seeded self-checks pitting the production kernels against brute force.

Everything here is redundant with the unit-test suite by design: it ships in
the package so an installed build can re-verify its compiled kernels on the
target machine (`roadtopo selftest`). Checks print one line each; failures
are collected, not raised.
"""
from __future__ import annotations

import numpy as np

from ._kernels import warmup
from .annotate import build_ground_truth
from .bruteforce import bruteforce_pair_weights, maximin_from, pair_attribution
from .grids import BinaryMask, ScalarGrid, connected_components, distance_transform
from .loss import LossConfig, compute_pair_weights, loss_conn, loss_dis, total_loss
from .synth import random_pair_weight_instance, random_span_graph


def oracle_equivalence_failures(seeds: int = 200) -> list[str]:
    """Production sweep vs brute-force maximin enumeration, `seeds` instances.

    Per instance: w/v grids must match the per-pair attribution exactly, every
    attributed bottleneck value must equal the pair's maximin connection cost
    from an independent widest-path search, the pairwise-sum forms of the two
    loss terms must match to 1e-9 relative, and no pixel may exceed the N²/4
    weight bound.
    """
    fails: list[str] = []
    rng = np.random.default_rng(727)
    for seed in range(seeds):
        pred, labels, region = random_pair_weight_instance(seed)
        pw = compute_pair_weights(pred, labels, region)
        bw, bv = bruteforce_pair_weights(pred, labels, region)
        if not (np.array_equal(pw.w, bw) and np.array_equal(pw.v, bv)):
            fails.append(f"seed {seed}: sweep w/v differ from brute force")
            continue

        vals = pred.data.ravel().astype(np.float64)
        reg = region.data.ravel()
        recs = pair_attribution(pred, labels, region)
        reach: dict[int, np.ndarray] = {}
        for rec in recs:
            if rec.q not in reach:
                q = (rec.q % pred.width, rec.q // pred.width)
                reach[rec.q] = maximin_from(pred, q).ravel()
            if vals[rec.bottleneck] != reach[rec.q][rec.r]:
                fails.append(
                    f"seed {seed}: pair ({rec.q},{rec.r}) bottleneck value "
                    f"{vals[rec.bottleneck]} != maximin {reach[rec.q][rec.r]}"
                )

        dist = ScalarGrid(rng.random((pred.height, pred.width)).astype(np.float32) * 5)
        dvals = dist.data.ravel().astype(np.float64)
        dis_pairs = sum(
            vals[r.bottleneck] ** 2 for r in recs if r.cross and reg[r.bottleneck]
        )
        conn_pairs = sum(
            (vals[r.bottleneck] - dvals[r.bottleneck]) ** 2
            for r in recs
            if not r.cross and not reg[r.bottleneck]
        )
        for name, got, want in (
            ("dis", loss_dis(pred, pw)[0], dis_pairs),
            ("conn", loss_conn(pred, dist, pw)[0], conn_pairs),
        ):
            if abs(got - want) > 1e-9 * max(abs(want), 1e-12):
                fails.append(f"seed {seed}: {name} {got} != pairwise sum {want}")

        n = pred.width * pred.height
        if pw.w.max(initial=0) > n * n / 4:
            fails.append(f"seed {seed}: weight bound exceeded: {pw.w.max()} > {n*n/4}")
    return fails


def _brute_distance(mask: np.ndarray) -> np.ndarray:
    h, w = mask.shape
    out = np.full((h, w), float(w + h))
    ys, xs = np.nonzero(mask)
    for y in range(h):
        for x in range(w):
            if len(ys):
                out[y, x] = np.sqrt(((ys - y) ** 2 + (xs - x) ** 2).min())
    return out


def grid_op_failures(seeds: int = 30) -> list[str]:
    """Distance transform and component labeling vs direct definitions."""
    fails: list[str] = []
    for seed in range(seeds):
        rng = np.random.default_rng((seed, 515))
        h, w = int(rng.integers(2, 9)), int(rng.integers(2, 9))
        mask = rng.random((h, w)) < 0.35
        grid = BinaryMask(mask)
        got = distance_transform(grid).data
        want = _brute_distance(mask).astype(np.float32)
        if not np.array_equal(got, want):
            fails.append(f"seed {seed}: distance transform mismatch")
        labs = connected_components(grid, 4)
        ref = _reference_labels(mask)
        if not np.array_equal(labs.data, ref):
            fails.append(f"seed {seed}: component labels mismatch")
    return fails


def _reference_labels(mask: np.ndarray) -> np.ndarray:
    h, w = mask.shape
    out = np.zeros((h, w), np.int32)
    nxt = 0
    for sy in range(h):
        for sx in range(w):
            if mask[sy, sx] and not out[sy, sx]:
                nxt += 1
                stack = [(sy, sx)]
                out[sy, sx] = nxt
                while stack:
                    y, x = stack.pop()
                    for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                        if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not out[ny, nx]:
                            out[ny, nx] = nxt
                            stack.append((ny, nx))
    return out


def fixture_failures() -> list[str]:
    fails: list[str] = []
    pred = ScalarGrid(np.array([[5, 5, 3, 5, 5]], np.float32))
    region = BinaryMask(np.array([[False, False, True, False, False]]))
    labels = connected_components(region.complement(), 4)
    pw = compute_pair_weights(pred, labels, region)
    if pw.w.tolist() != [[0, 0, 4, 0, 0]] or pw.v.tolist() != [[1, 0, 0, 1, 0]]:
        fails.append(f"1x5 fixture: w={pw.w.tolist()} v={pw.v.tolist()}")
    val, grad = loss_dis(pred, pw)
    if val != 36.0 or grad.data[0, 2] != 24.0:
        fails.append(f"1x5 fixture: dis={val} grad={grad.data[0, 2]}")

    for seed in range(3):
        gt = build_ground_truth(random_span_graph(seed, 96, 96), 96, 96)
        out = total_loss(gt.dist, gt, LossConfig())
        if out.total != 0.0 or out.grad.data.any():
            fails.append(f"zero-at-gt seed {seed}: total={out.total}")
    return fails


def run_selftest(seeds: int = 200, log=print) -> bool:
    """Run all self-checks; prints one status line per group, returns pass."""
    warmup()
    groups = (
        ("oracle equivalence", lambda: oracle_equivalence_failures(seeds)),
        ("grid operations", grid_op_failures),
        ("fixtures", fixture_failures),
    )
    ok = True
    for name, fn in groups:
        fails = fn()
        if fails:
            ok = False
            log(f"FAIL {name} ({len(fails)} problem(s))")
            for f in fails[:10]:
                log(f"  {f}")
        else:
            log(f"ok   {name}")
    log("selftest " + ("passed" if ok else "FAILED"))
    return ok
