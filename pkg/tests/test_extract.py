"""Tests for the prediction→graph pipeline: threshold, thin, trace, prune."""
from __future__ import annotations

import numpy as np
import pytest

from roadtopo.annotate import (
    GeoGraph,
    Node,
    build_ground_truth,
    format_graph,
    parse_graph,
    rasterize,
)
from roadtopo.extract import (
    extract_graph,
    flatten,
    prune,
    skeleton_to_graph,
    thin,
    threshold,
)
from roadtopo.grids import BinaryMask, ScalarGrid, connected_components
from roadtopo.synth import grid_roads_graph, random_span_graph


def _mask(rows):
    return BinaryMask(np.array(rows, bool))


def _degree_image(mask: BinaryMask) -> np.ndarray:
    h, w = mask.data.shape
    pad = np.pad(mask.data.astype(np.int16), 1)
    return sum(
        pad[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
        for dy in (-1, 0, 1)
        for dx in (-1, 0, 1)
        if (dy, dx) != (0, 0)
    )


def _random_blobs(seed: int, extent: int = 24) -> BinaryMask:
    rng = np.random.default_rng((seed, 404))
    m = np.zeros((extent, extent), bool)
    for _ in range(4):
        y, x = rng.integers(0, extent - 4, 2)
        h, w = rng.integers(2, 9, 2)
        m[y : min(y + h, extent), x : min(x + w, extent)] = True
    return BinaryMask(m)


def test_threshold_is_strict():
    d = ScalarGrid(np.array([[0.5, 4.0, 3.9]], np.float32))
    assert threshold(d, 4.0).data.tolist() == [[True, False, True]]
    assert not threshold(d, 0.0).data.any()
    assert threshold(d, float("inf")).data.all()


def test_thin_leaves_single_pixel_line_alone():
    line = np.zeros((5, 12), bool)
    line[2, 1:11] = True
    assert np.array_equal(thin(BinaryMask(line)).data, line)


def test_thin_collapses_rectangle_to_line():
    rect = np.zeros((7, 15), bool)
    rect[2:5, 2:13] = True  # filled 11x3 block
    out = thin(BinaryMask(rect))
    n = int(out.data.sum())
    assert 9 <= n <= 11
    deg = _degree_image(out)
    assert (deg[out.data] <= 2).all()  # 1-px-wide path, no junctions
    assert connected_components(out, 8).component_count == 1


def test_thin_idempotent_subset_and_connectivity():
    for seed in range(25):
        m = _random_blobs(seed)
        t = thin(m)
        assert (t.data <= m.data).all()
        assert np.array_equal(thin(t).data, t.data)
        before = connected_components(m, 8).component_count
        after = connected_components(t, 8).component_count
        assert before == after


def test_thin_annulus_keeps_cycle():
    yy, xx = np.mgrid[0:21, 0:21]
    d2 = (yy - 10) ** 2 + (xx - 10) ** 2
    out = thin(BinaryMask((d2 >= 9) & (d2 <= 49)))
    assert out.data.sum() > 0
    deg = _degree_image(out)
    assert (deg[out.data] == 2).all()  # pure closed loop


def test_line_becomes_two_nodes_one_edge():
    line = np.zeros((5, 12), bool)
    line[2, 1:11] = True
    g = skeleton_to_graph(BinaryMask(line))
    assert len(g.nodes) == 2
    assert len(g.edges) == 1
    assert sorted((n.x, n.y) for n in g.nodes) == [(1.0, 2.0), (10.0, 2.0)]
    assert g.edge_length(0) == pytest.approx(9.0)


def test_plus_sign_has_one_junction():
    plus = np.zeros((9, 9), bool)
    plus[4, 1:8] = True
    plus[1:8, 4] = True
    g = skeleton_to_graph(BinaryMask(plus))
    assert len(g.nodes) == 5
    assert len(g.edges) == 4
    deg = sorted(g.degrees().values())
    assert deg == [1, 1, 1, 1, 4]
    # the crossing contracts to a single node at the cluster centroid
    hub = [n for n in g.nodes if g.degrees()[n.id] == 4]
    assert (hub[0].x, hub[0].y) == (4.0, 4.0)


def test_diamond_cycle_splits_into_two_parallel_edges():
    dia = np.zeros((4, 4), bool)
    for y, x in ((0, 1), (1, 0), (1, 2), (2, 1)):
        dia[y, x] = True
    g = skeleton_to_graph(BinaryMask(dia))
    assert len(g.nodes) == 2
    assert len(g.edges) == 2
    assert g.edges[0] == g.edges[1]  # parallel pair, distinct geometry
    assert g.geometry is not None
    assert not np.array_equal(g.geometry[0], g.geometry[1])
    total = g.edge_length(0) + g.edge_length(1)
    assert total == pytest.approx(4 * np.sqrt(2.0))


def test_isolated_pixel_is_bare_node():
    iso = np.zeros((3, 3), bool)
    iso[1, 1] = True
    g = skeleton_to_graph(BinaryMask(iso))
    assert len(g.nodes) == 1
    assert len(g.edges) == 0


def test_lollipop_loop_split_at_midpoint():
    m = np.zeros((8, 6), bool)
    for y, x in ((2, 3), (3, 2), (3, 4), (4, 3), (5, 3), (6, 3)):
        m[y, x] = True  # diamond ring + 2px tail hanging south
    g = skeleton_to_graph(BinaryMask(m))
    assert len(g.nodes) == 3
    assert len(g.edges) == 3
    deg = sorted(g.degrees().values())
    assert deg == [1, 2, 3]


def test_rerasterized_graph_covers_skeleton():
    # every skeleton pixel within euclidean distance 1 of a drawn pixel
    for seed in range(8):
        maker = grid_roads_graph if seed % 2 else random_span_graph
        gt = build_ground_truth(maker(seed, 128, 128), 128, 128)
        skel = thin(threshold(gt.dist, 4.0))
        ras = rasterize(skeleton_to_graph(skel), 128, 128).data
        near = ras.copy()
        near[1:] |= ras[:-1]
        near[:-1] |= ras[1:]
        near[:, 1:] |= ras[:, :-1]
        near[:, :-1] |= ras[:, 1:]
        assert (skel.data <= near).all()


def test_prune_zero_is_identity():
    line = np.zeros((5, 12), bool)
    line[2, 1:11] = True
    g = skeleton_to_graph(BinaryMask(line))
    assert prune(g, 0.0) is g


def test_prune_removes_short_stub():
    t = np.zeros((9, 30), bool)
    t[4, 1:27] = True  # 26px bar
    t[5:8, 13] = True  # 3px stub
    g = skeleton_to_graph(BinaryMask(t))
    assert len(g.nodes) == 4
    out = prune(g, 10.0)
    assert len(out.nodes) == 2
    assert len(out.edges) == 1
    assert sorted((n.x, n.y) for n in out.nodes) == [(1.0, 4.0), (26.0, 4.0)]
    assert out.edge_length(0) == pytest.approx(25.0)


def test_prune_drops_isolated_short_segment():
    s = np.zeros((4, 8), bool)
    s[1, 1:6] = True  # 5px: degree-1 at both ends
    out = prune(skeleton_to_graph(BinaryMask(s)), 10.0)
    assert len(out.nodes) == 0
    assert len(out.edges) == 0


def test_prune_keeps_cycle_after_trimming_tail():
    m = np.zeros((8, 6), bool)
    for y, x in ((2, 3), (3, 2), (3, 4), (4, 3), (5, 3), (6, 3)):
        m[y, x] = True
    out = prune(skeleton_to_graph(BinaryMask(m)), 10.0)
    # the tail goes, the split ring (2 nodes, 2 parallel edges) survives
    assert len(out.edges) == 2
    assert out.edges[0] == out.edges[1]
    assert all(d == 2 for d in out.degrees().values())


def test_prune_rejects_negative_min_spur():
    g = skeleton_to_graph(_mask([[True, True, True]]))
    with pytest.raises(ValueError):
        prune(g, -1.0)


def test_flatten_straight_chain_to_single_edge():
    line = np.zeros((5, 12), bool)
    line[2, 1:11] = True
    fl = flatten(skeleton_to_graph(BinaryMask(line)))
    assert len(fl.nodes) == 2
    assert len(fl.edges) == 1
    assert fl.geometry is None
    assert parse_graph(format_graph(fl)) == fl


def test_flatten_breaks_at_corner():
    # right-angle polyline: east to (8,2), then south to (8,7)
    east = [(float(x), 2.0) for x in range(2, 9)]
    south = [(8.0, float(y)) for y in range(3, 8)]
    chain = np.array(east + south)
    g = GeoGraph((Node(0, 2.0, 2.0), Node(1, 8.0, 7.0)), ((0, 1),), (chain,))
    fl = flatten(g)
    assert len(fl.nodes) == 3
    assert len(fl.edges) == 2
    deg2 = [n for n in fl.nodes if fl.degrees()[n.id] == 2]
    assert len(deg2) == 1
    assert (deg2[0].x, deg2[0].y) == (8.0, 2.0)


def test_flatten_on_thinned_bend():
    # thinning swaps the sharp corner for a diagonal step, so the greedy
    # split needs two breakpoints to stay within 0.5 px
    m = np.zeros((9, 10), bool)
    m[2, 2:9] = True
    m[3:8, 8] = True
    fl = flatten(skeleton_to_graph(thin(BinaryMask(m))))
    assert len(fl.nodes) == 4
    assert len(fl.edges) == 3
    mids = sorted((n.x, n.y) for n in fl.nodes if fl.degrees()[n.id] == 2)
    assert mids == [(7.0, 2.0), (8.0, 4.0)]


def _min_dist_to_edges(pt: np.ndarray, graph) -> float:
    pos = graph.positions()
    best = np.inf
    for a, b in graph.edges:
        p0 = np.array(pos[a])
        p1 = np.array(pos[b])
        seg = p1 - p0
        denom = float(seg @ seg)
        t = 0.0 if denom == 0 else float(np.clip((pt - p0) @ seg / denom, 0.0, 1.0))
        best = min(best, float(np.hypot(*(pt - (p0 + t * seg)))))
    return best


def test_flatten_stays_within_tolerance():
    tol = 0.5
    for seed in range(10):
        skel = thin(_random_blobs(seed))
        g = skeleton_to_graph(skel)
        if not g.edges:
            continue
        fl = flatten(g, tol)
        for i in range(len(g.edges)):
            for pt in g.edge_points(i):
                assert _min_dist_to_edges(np.asarray(pt), fl) <= tol + 1e-9


def test_flatten_mints_fresh_node_ids():
    m = np.zeros((9, 10), bool)
    m[2, 2:9] = True
    m[3:8, 8] = True
    g = skeleton_to_graph(thin(BinaryMask(m)))
    fl = flatten(g)
    old = {n.id for n in g.nodes}
    new = {n.id for n in fl.nodes} - old
    assert new and min(new) > max(old)


def test_extract_graph_end_to_end_recovers_roads():
    def covered(src: np.ndarray, dst: np.ndarray, r: int) -> float:
        if not src.any():
            return 1.0
        pad = np.pad(dst, r)
        acc = np.zeros_like(src)
        for dy in range(-r, r + 1):
            for dx in range(-r, r + 1):
                acc |= pad[r + dy : r + dy + src.shape[0], r + dx : r + dx + src.shape[1]]
        return float((src & acc).sum() / src.sum())

    for seed in range(6):
        maker = grid_roads_graph if seed % 2 else random_span_graph
        g = maker(seed, 128, 128)
        gt = build_ground_truth(g, 128, 128)
        found = extract_graph(gt.dist, tau=4.0, min_spur=10.0)
        assert len(found.edges) > 0
        src = rasterize(g, 128, 128).data
        out = rasterize(found, 128, 128).data
        assert covered(src, out, 3) >= 0.95
        assert covered(out, src, 3) >= 0.95
