"""Prediction post-processing: threshold, thin, skeleton→graph, prune.

The traced pixel chains are kept as edge geometry so downstream metrics see
true polyline lengths; `flatten` converts a traced graph back to plain
straight-segment form for serialization.
"""
from __future__ import annotations

import numpy as np
from skimage.morphology import skeletonize

from .annotate import GeoGraph, Node
from .grids import BinaryMask, ScalarGrid, connected_components

_NBRS8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


def threshold(dist: ScalarGrid, tau: float) -> BinaryMask:
    """Road-candidate mask: pixels whose predicted distance is strictly < tau."""
    return BinaryMask(dist.data < tau)


def _shifted(padded: np.ndarray, dy: int, dx: int, h: int, w: int) -> np.ndarray:
    return padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]


def thin(mask: BinaryMask) -> BinaryMask:
    """Zhang–Suen thinning to fixpoint: 1-px-wide, connectivity-preserving."""
    return BinaryMask(skeletonize(mask.data.copy(), method="zhang"))


def _neighbors(data: np.ndarray, y: int, x: int) -> list[tuple[int, int]]:
    h, w = data.shape
    return [
        (y + dy, x + dx)
        for dy, dx in _NBRS8
        if 0 <= y + dy < h and 0 <= x + dx < w and data[y + dy, x + dx]
    ]


def _chain_geometry(chain: list[tuple[int, int]]) -> np.ndarray:
    return np.array([(x, y) for y, x in chain], np.float64)


def skeleton_to_graph(skel: BinaryMask) -> GeoGraph:
    """Convert a thin mask to a graph of junction/endpoint nodes and chains.

    Node pixels are those with 8-neighbor degree ≠ 2. Adjacent degree-≥3
    pixels are contracted into a single junction node (a crossing of two
    8-connected lines produces a 5-pixel cluster, not one pixel), placed at
    the cluster centroid; endpoints and isolated pixels become nodes of their
    own. Degree-2 chains trace edges between nodes. Pure cycles split at
    their raster-smallest pixel and its antipode (two nodes, two parallel
    edges); loops hanging off one node split at their midpoint for the same
    reason — no self-loop edges.
    """
    data = skel.data
    h, w = data.shape
    padded = np.pad(data.astype(np.uint8), 1)
    deg = sum(_shifted(padded, dy, dx, h, w).astype(np.int16) for dy, dx in _NBRS8)

    clusters = connected_components(BinaryMask(data & (deg >= 3)), 8)
    cluster_of = clusters.data
    node_of: dict[tuple[int, int], int] = {}
    nodes: list[Node] = []
    cluster_node: dict[int, int] = {}
    for y, x in np.argwhere(data & (deg != 2)):
        p = (int(y), int(x))
        c = int(cluster_of[p])
        if c == 0:  # endpoint or isolated pixel: its own node
            node_of[p] = len(nodes)
            nodes.append(Node(len(nodes), float(p[1]), float(p[0])))
        elif c in cluster_node:
            node_of[p] = cluster_node[c]
        else:  # first (raster) pixel of a junction cluster: node at centroid
            members = np.argwhere(cluster_of == c)
            cluster_node[c] = len(nodes)
            node_of[p] = cluster_node[c]
            nodes.append(
                Node(len(nodes), float(members[:, 1].mean()), float(members[:, 0].mean()))
            )

    edges: list[tuple[int, int]] = []
    geoms: list[np.ndarray] = []
    used_dir: set[tuple[tuple[int, int], tuple[int, int]]] = set()
    interior_done = np.zeros((h, w), bool)

    def add_edge(ida: int, idb: int, chain: list[tuple[int, int]]) -> None:
        if ida == idb:  # loop anchored at one node: split at the midpoint
            mid = len(chain) // 2
            my, mx = chain[mid]
            mid_id = len(nodes)
            nodes.append(Node(mid_id, float(mx), float(my)))
            edges.append((ida, mid_id))
            geoms.append(_chain_geometry(chain[: mid + 1]))
            edges.append((mid_id, idb))
            geoms.append(_chain_geometry(chain[mid:]))
        else:
            edges.append((ida, idb))
            geoms.append(_chain_geometry(chain))

    for start in sorted(node_of):
        for nb in _neighbors(data, *start):
            if nb in node_of and node_of[nb] == node_of[start]:
                continue  # intra-cluster adjacency, part of the node itself
            if (start, nb) in used_dir:
                continue
            chain = [start, nb]
            prev, cur = start, nb
            while cur not in node_of:
                interior_done[cur] = True
                a, b = _neighbors(data, *cur)
                prev, cur = cur, (b if a == prev else a)
                chain.append(cur)
            used_dir.add((start, nb))
            used_dir.add((cur, chain[-2]))
            add_edge(node_of[start], node_of[cur], chain)

    # pure cycles: leftover degree-2 pixels never touched by a node walk
    left = data & (deg == 2) & ~interior_done
    for py, px in np.argwhere(left):
        anchor = (int(py), int(px))
        if interior_done[anchor]:
            continue
        first = min(_neighbors(data, *anchor))
        chain = [anchor, first]
        interior_done[anchor] = True
        prev, cur = anchor, first
        while cur != anchor:
            interior_done[cur] = True
            a, b = _neighbors(data, *cur)
            prev, cur = cur, (b if a == prev else a)
            chain.append(cur)
        aid = len(nodes)
        ay, ax = anchor
        nodes.append(Node(aid, float(ax), float(ay)))
        add_edge(aid, aid, chain)

    return GeoGraph(tuple(nodes), tuple(edges), tuple(geoms) if geoms else None)


def _oriented(pts: np.ndarray, from_xy: tuple[float, float]) -> np.ndarray:
    if tuple(pts[0]) == from_xy:
        return pts
    if tuple(pts[-1]) == from_xy:
        return pts[::-1]
    # tolerate float drift, pick the closer end
    d0 = np.hypot(pts[0, 0] - from_xy[0], pts[0, 1] - from_xy[1])
    d1 = np.hypot(pts[-1, 0] - from_xy[0], pts[-1, 1] - from_xy[1])
    return pts if d0 <= d1 else pts[::-1]


def prune(graph: GeoGraph, min_spur: float) -> GeoGraph:
    """Remove spur edges shorter than min_spur at degree-1 nodes, to fixpoint;
    then splice out the degree-2 nodes the removals created.

    Output always carries edge geometry (straight 2-point chains are
    synthesized when the input had none) so splices preserve shape.
    """
    if min_spur < 0:
        raise ValueError("min_spur must be >= 0")
    if min_spur == 0:
        return graph
    pos = graph.positions()
    edges = list(graph.edges)
    geoms = [np.asarray(graph.edge_points(i)) for i in range(len(edges))]

    def degree_map():
        d = {n.id: 0 for n in graph.nodes}
        for a, b in edges:
            d[a] += 1
            d[b] += 1
        return d

    def length(i: int) -> float:
        pts = geoms[i]
        return float(np.hypot(*(pts[1:] - pts[:-1]).T).sum())

    touched: set[int] = set()
    while True:
        deg = degree_map()
        drop = [
            i
            for i, (a, b) in enumerate(edges)
            if (deg[a] == 1 or deg[b] == 1) and length(i) < min_spur
        ]
        if not drop:
            break
        gone = set(drop)
        for i in drop:
            touched.update(edges[i])
        edges = [e for i, e in enumerate(edges) if i not in gone]
        geoms = [g for i, g in enumerate(geoms) if i not in gone]

    deg = degree_map()
    for n in sorted(touched):
        if deg.get(n) != 2:
            continue
        inc = [i for i, (a, b) in enumerate(edges) if n in (a, b)]
        if len(inc) != 2:  # parallel pair back to one neighbour: leave alone
            continue
        (i1, i2) = inc
        a = edges[i1][0] if edges[i1][1] == n else edges[i1][1]
        b = edges[i2][0] if edges[i2][1] == n else edges[i2][1]
        if a == b or a == n or b == n:
            continue
        g1 = _oriented(geoms[i1], pos[a])  # a ... n
        g2 = _oriented(geoms[i2], pos[n])  # n ... b
        merged = np.vstack([g1, g2[1:]])
        for i in sorted(inc, reverse=True):
            del edges[i]
            del geoms[i]
        edges.append((a, b))
        geoms.append(merged)
        deg[n] = 0

    deg = degree_map()
    keep = [n for n in graph.nodes if deg[n.id] > 0 or n.id not in touched]
    return GeoGraph(tuple(keep), tuple(edges), tuple(geoms) if geoms else None)


def _max_deviation(pts: np.ndarray, i0: int, i1: int) -> float:
    """Largest distance from interior points to the segment pts[i0]→pts[i1]."""
    seg = pts[i1] - pts[i0]
    mid = pts[i0 + 1 : i1]
    if len(mid) == 0:
        return 0.0
    denom = float(seg @ seg)
    if denom == 0.0:
        return float(np.hypot(*(mid - pts[i0]).T).max())
    t = np.clip((mid - pts[i0]) @ seg / denom, 0.0, 1.0)
    proj = pts[i0] + t[:, None] * seg
    return float(np.hypot(*(mid - proj).T).max())


def flatten(graph: GeoGraph, tol: float = 0.5) -> GeoGraph:
    """Replace traced geometry by chains of straight edges within `tol` px.

    Greedy split: each traced chain becomes the fewest segments such that no
    chain pixel deviates more than tol from its segment; split points become
    fresh nodes. The result carries no geometry and can be serialized.
    """
    if tol < 0:
        raise ValueError("tol must be >= 0")
    if graph.geometry is None:
        return graph
    pos = graph.positions()
    nodes = list(graph.nodes)
    next_id = max((n.id for n in nodes), default=-1) + 1
    out_edges: list[tuple[int, int]] = []
    for i, (a, b) in enumerate(graph.edges):
        pts = _oriented(graph.geometry[i], pos[a])
        # chains at contracted junctions start at a cluster pixel, not the
        # node itself; include the node positions so the bound is real
        pa = np.asarray(pos[a], np.float64)
        pb = np.asarray(pos[b], np.float64)
        if not np.array_equal(pts[0], pa):
            pts = np.vstack([pa[None], pts])
        if not np.array_equal(pts[-1], pb):
            pts = np.vstack([pts, pb[None]])
        breaks = [0]
        i0 = 0
        k = 1
        while k < len(pts) - 1:
            if _max_deviation(pts, i0, k + 1) > tol:
                breaks.append(k)
                i0 = k
            k += 1
        breaks.append(len(pts) - 1)
        ids = []
        for j, idx in enumerate(breaks):
            if idx == 0:
                ids.append(a)
            elif idx == len(pts) - 1:
                ids.append(b)
            else:
                nodes.append(Node(next_id, float(pts[idx, 0]), float(pts[idx, 1])))
                ids.append(next_id)
                next_id += 1
        out_edges.extend(
            (ids[j], ids[j + 1]) for j in range(len(ids) - 1) if ids[j] != ids[j + 1]
        )
    return GeoGraph(tuple(nodes), tuple(out_edges))


def extract_graph(
    pred: ScalarGrid, tau: float = 4.0, min_spur: float = 10.0
) -> GeoGraph:
    """Full pipeline: threshold → thin → trace → prune. Geometry retained."""
    return prune(skeleton_to_graph(thin(threshold(pred, tau))), min_spur)
