"""Tests for the five graph-comparison scores."""
from __future__ import annotations

import numpy as np
import pytest

from roadtopo.annotate import GeoGraph, Node, rasterize
from roadtopo.metrics import (
    MetricConfig,
    MetricReport,
    apls,
    ccq,
    evaluate,
    holes_marbles,
    jct,
    path_score,
    shortest_path_length,
    tlts,
)
from roadtopo.synth import grid_roads_graph, random_span_graph

CFG = MetricConfig(seed=17, samples=60)

EMPTY = GeoGraph((), (), None)


def _line(y: float, x0: float = 20.0, x1: float = 100.0) -> GeoGraph:
    return GeoGraph((Node(0, x0, y), Node(1, x1, y)), ((0, 1),))


def _bump(pct: float) -> GeoGraph:
    # single edge from (0,0) to (40,0) whose polyline is pct longer
    half = 20.0 * (1 + pct)
    h = np.sqrt(half * half - 400.0)
    geom = np.array([[0.0, 0.0], [20.0, h], [40.0, 0.0]])
    return GeoGraph((Node(0, 0.0, 0.0), Node(1, 40.0, 0.0)), ((0, 1),), (geom,))


def _without_edge(g: GeoGraph, i: int) -> GeoGraph:
    edges = tuple(e for k, e in enumerate(g.edges) if k != i)
    geoms = (
        None
        if g.geometry is None
        else tuple(gm for k, gm in enumerate(g.geometry) if k != i)
    )
    return GeoGraph(g.nodes, edges, geoms)


def test_config_validation():
    bad = [
        dict(seed=-1),
        dict(seed=1, samples=0),
        dict(seed=1, buffer=0.0),
        dict(seed=1, snap_radius=-2.0),
        dict(seed=1, rel_tol=0.0),
        dict(seed=1, rel_tol=1.0),
        dict(seed=1, hm_radius=0.0),
        dict(seed=1, inject_spacing=0.0),
        dict(seed=1, hm_budget_factor=0),
    ]
    for kw in bad:
        with pytest.raises(ValueError):
            MetricConfig(**kw)


def test_report_rejects_out_of_range():
    ok = dict(
        apls=0.5,
        tlts=0.5,
        jct_recall=1.0,
        jct_precision=1.0,
        jct_f1=1.0,
        hm_f1=0.0,
        correctness=1.0,
        completeness=1.0,
        ccq_quality=1.0,
    )
    assert len(MetricReport(**ok).as_dict()) == 9
    with pytest.raises(ValueError):
        MetricReport(**{**ok, "apls": 1.5})
    with pytest.raises(ValueError):
        MetricReport(**{**ok, "hm_f1": -0.1})


def test_path_score_formula():
    assert path_score(100.0, 110.0) == 0.9
    assert path_score(40.0, 40.0) == 1.0
    assert path_score(10.0, 50.0) == 0.0  # clamped at total mismatch
    with pytest.raises(ValueError):
        path_score(0.0, 5.0)


def test_shortest_path_length_examples():
    two = _line(0.0, 0.0, 10.0)
    assert shortest_path_length(two, 0, 0) == 0.0
    assert shortest_path_length(two, 0, 1) == 10.0
    disc = GeoGraph(
        (Node(0, 0.0, 0.0), Node(1, 10.0, 0.0), Node(2, 30.0, 0.0), Node(3, 40.0, 0.0)),
        ((0, 1), (2, 3)),
    )
    assert shortest_path_length(disc, 0, 3) == np.inf
    with pytest.raises(ValueError):
        shortest_path_length(two, 0, 7)


def test_shortest_path_takes_cheaper_parallel_edge():
    straight = np.array([[0.0, 0.0], [10.0, 0.0]])
    detour = np.array([[0.0, 0.0], [5.0, 12.0], [10.0, 0.0]])
    g = GeoGraph(
        (Node(0, 0.0, 0.0), Node(1, 10.0, 0.0)),
        ((0, 1), (0, 1)),
        (straight, detour),
    )
    assert shortest_path_length(g, 0, 1) == 10.0


def test_self_identity_on_synthetic_graphs():
    for seed in range(6):
        maker = grid_roads_graph if seed % 2 else random_span_graph
        g = maker(seed, 128, 128)
        rep = evaluate(g, g, (128, 128), CFG)
        for name, v in rep.as_dict().items():
            assert abs(v - 1.0) <= 1e-9, (seed, name, v)


def test_ccq_shift_examples():
    gt = _line(40.0)
    assert ccq(gt, gt, (128, 128), 5.0) == (1.0, 1.0, 1.0)
    assert ccq(_line(46.0), gt, (128, 128), 5.0) == (0.0, 0.0, 0.0)
    corr, comp, _ = ccq(_line(43.0), gt, (128, 128), 5.0)
    assert corr == 1.0 and comp == 1.0


def test_ccq_empty_rules():
    gt = _line(40.0)
    assert ccq(EMPTY, EMPTY, (64, 64), 5.0) == (1.0, 1.0, 1.0)
    assert ccq(EMPTY, gt, (128, 128), 5.0) == (0.0, 0.0, 0.0)
    assert ccq(gt, EMPTY, (128, 128), 5.0) == (0.0, 0.0, 0.0)


def test_ccq_counts_against_bruteforce():
    # pred covers the left half of gt plus a stray far segment
    gt = _line(40.0, 10.0, 110.0)
    pred = GeoGraph(
        (
            Node(0, 10.0, 40.0),
            Node(1, 60.0, 40.0),
            Node(2, 20.0, 90.0),
            Node(3, 50.0, 90.0),
        ),
        ((0, 1), (2, 3)),
    )
    buffer = 5.0
    pr = rasterize(pred, 128, 128).data
    gr = rasterize(gt, 128, 128).data
    pp = np.argwhere(pr)
    gp = np.argwhere(gr)
    d2 = ((pp[:, None, :] - gp[None, :, :]) ** 2).sum(-1)
    tp = int((d2.min(1) <= buffer * buffer).sum())
    matched_gt = int((d2.min(0) <= buffer * buffer).sum())
    want_corr = tp / len(pp)
    want_comp = matched_gt / len(gp)
    want_q = tp / (tp + (len(pp) - tp) + (len(gp) - matched_gt))
    corr, comp, q = ccq(pred, gt, (128, 128), buffer)
    assert (corr, comp, q) == (want_corr, want_comp, want_q)
    assert 0.0 < q < 1.0


def test_apls_two_node_fixture():
    # both directions forced onto the single node pair: 1-1.6/40 and
    # 1-1.6/41.6, averaged
    got = apls(_bump(0.04), _line(0.0, 0.0, 40.0), CFG)
    want = ((1 - 1.6 / 40.0) + (1 - 1.6 / 41.6)) / 2
    assert got == pytest.approx(want, rel=1e-9)
    assert got == pytest.approx(0.9607692307692308, rel=1e-9)


def test_apls_degenerate_rules():
    g = random_span_graph(0, 128, 128)
    one = GeoGraph((Node(0, 5.0, 5.0),), (), None)
    assert apls(EMPTY, g, CFG) == 0.0
    assert apls(g, EMPTY, CFG) == 0.0
    assert apls(one, EMPTY, CFG) == 1.0
    assert apls(EMPTY, EMPTY, CFG) == 1.0


def test_apls_penalizes_missing_bridge():
    g = grid_roads_graph(1, 128, 128)
    sub = _without_edge(g, 0)
    assert apls(sub, g, CFG) < apls(g, g, CFG) == 1.0


def test_tlts_threshold_behavior():
    gt = _line(0.0, 0.0, 40.0)
    assert tlts(gt, gt, CFG) == 1.0
    assert tlts(_bump(0.04), gt, CFG) == 1.0
    assert tlts(_bump(0.10), gt, CFG) == 0.0


def test_jct_examples():
    cross = GeoGraph(
        (
            Node(0, 50.0, 50.0),
            Node(1, 50.0, 10.0),
            Node(2, 50.0, 90.0),
            Node(3, 10.0, 50.0),
            Node(4, 90.0, 50.0),
        ),
        ((0, 1), (0, 2), (0, 3), (0, 4)),
    )
    tee = GeoGraph(
        (
            Node(0, 50.0, 50.0),
            Node(1, 50.0, 10.0),
            Node(2, 50.0, 90.0),
            Node(3, 10.0, 50.0),
        ),
        ((0, 1), (0, 2), (0, 3)),
    )
    recall, precision, f1 = jct(tee, cross, CFG)
    assert recall == 0.75
    assert precision == 1.0
    assert f1 == pytest.approx(6.0 / 7.0)
    assert jct(cross, cross, CFG) == (1.0, 1.0, 1.0)


def test_jct_no_junction_rules():
    line = _line(40.0)
    cross = GeoGraph(
        (
            Node(0, 50.0, 50.0),
            Node(1, 50.0, 10.0),
            Node(2, 50.0, 90.0),
            Node(3, 10.0, 50.0),
            Node(4, 90.0, 50.0),
        ),
        ((0, 1), (0, 2), (0, 3), (0, 4)),
    )
    assert jct(line, line, CFG) == (1.0, 1.0, 1.0)
    assert jct(line, cross, CFG) == (0.0, 0.0, 0.0)
    assert jct(cross, line, CFG) == (0.0, 0.0, 0.0)


def test_jct_respects_snap_radius():
    def cross_at(cx: float) -> GeoGraph:
        return GeoGraph(
            (
                Node(0, cx, 50.0),
                Node(1, cx, 10.0),
                Node(2, cx, 90.0),
                Node(3, cx - 40.0, 50.0),
                Node(4, cx + 40.0, 50.0),
            ),
            ((0, 1), (0, 2), (0, 3), (0, 4)),
        )

    near = jct(cross_at(60.0), cross_at(50.0), CFG)  # 10 <= 15: matched
    far = jct(cross_at(70.0), cross_at(50.0), CFG)  # 20 > 15: unmatched
    assert near == (1.0, 1.0, 1.0)
    assert far == (0.0, 0.0, 0.0)


def test_holes_marbles_fork():
    gt = GeoGraph(
        (
            Node(0, 0.0, 50.0),
            Node(1, 50.0, 50.0),
            Node(2, 100.0, 50.0),
            Node(3, 50.0, 100.0),
        ),
        ((0, 1), (1, 2), (1, 3)),
    )
    pred = GeoGraph(
        (Node(0, 0.0, 50.0), Node(1, 50.0, 50.0), Node(2, 100.0, 50.0)),
        ((0, 1), (1, 2)),
    )
    assert holes_marbles(gt, gt, CFG) == 1.0
    partial = holes_marbles(pred, gt, CFG)
    assert 0.0 < partial < 1.0
    assert holes_marbles(EMPTY, gt, CFG) == 0.0


def test_reports_are_deterministic():
    g = grid_roads_graph(3, 128, 128)
    sub = _without_edge(g, 1)
    r1 = evaluate(sub, g, (128, 128), CFG)
    r2 = evaluate(sub, g, (128, 128), CFG)
    assert r1.as_dict() == r2.as_dict()


def test_monotone_degradation():
    cfg = MetricConfig(seed=23, samples=30)
    for seed in range(50):
        maker = grid_roads_graph if seed % 2 else random_span_graph
        g = maker(seed, 96, 96)
        rng = np.random.default_rng((seed, 909))
        prev = g
        prev_scores = (
            apls(prev, g, cfg),
            tlts(prev, g, cfg),
            ccq(prev, g, (96, 96), cfg.buffer)[1],
        )
        for _ in range(3):
            if len(prev.edges) == 0:
                break
            cur = _without_edge(prev, int(rng.integers(0, len(prev.edges))))
            cur_scores = (
                apls(cur, g, cfg),
                tlts(cur, g, cfg),
                ccq(cur, g, (96, 96), cfg.buffer)[1],
            )
            for a, b in zip(prev_scores, cur_scores):
                assert b <= a + 1e-12
            prev, prev_scores = cur, cur_scores
