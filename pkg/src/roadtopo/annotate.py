"""Centerline annotations as spatial graphs and ground-truth preparation.

A GeoGraph is an undirected graph of pixel-coordinate nodes. Edges are
straight segments unless they carry traced polyline geometry (produced by the
skeleton extractor); parallel edges between the same node pair are permitted
only in that traced form — the text format never contains them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ParseError
from .grids import BinaryMask, LabelGrid, ScalarGrid, connected_components, dilate, distance_transform


class Node(NamedTuple):
    id: int
    x: float
    y: float


@dataclass(frozen=True)
class GeoGraph:
    """Undirected spatial graph; canonical ordering for deterministic output.

    nodes    : sorted by id, ids unique
    edges    : (a, b) with a < b, sorted; duplicates collapsed unless distinct
               traced geometry distinguishes them
    geometry : optional per-edge polyline, an (n, 2) float array of (x, y)
               points including both endpoints, aligned with `edges`
    """

    nodes: tuple[Node, ...]
    edges: tuple[tuple[int, int], ...] = ()
    geometry: tuple[np.ndarray, ...] | None = None

    def __post_init__(self):
        nodes = tuple(sorted((Node(int(i), float(x), float(y)) for i, x, y in self.nodes)))
        ids = [n.id for n in nodes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate node ids")
        known = set(ids)
        canon = []
        for a, b in self.edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"self-loop at node {a}")
            if a not in known or b not in known:
                raise ValueError(f"edge ({a},{b}) references unknown node")
            canon.append((a, b) if a < b else (b, a))
        if self.geometry is None:
            edges = tuple(sorted(set(canon)))
            geometry = None
        else:
            if len(self.geometry) != len(canon):
                raise ValueError("geometry must align with edges")
            order = sorted(range(len(canon)), key=lambda i: canon[i])
            edges = tuple(canon[i] for i in order)
            geometry = tuple(np.asarray(self.geometry[i], np.float64) for i in order)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "geometry", geometry)

    def positions(self) -> dict[int, tuple[float, float]]:
        return {n.id: (n.x, n.y) for n in self.nodes}

    def degrees(self) -> dict[int, int]:
        deg = {n.id: 0 for n in self.nodes}
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return deg

    def edge_points(self, i: int) -> np.ndarray:
        """Polyline of edge i: traced geometry, or the straight segment."""
        if self.geometry is not None:
            return self.geometry[i]
        pos = self.positions()
        a, b = self.edges[i]
        return np.array([pos[a], pos[b]], np.float64)

    def edge_length(self, i: int) -> float:
        pts = self.edge_points(i)
        return float(np.hypot(*(pts[1:] - pts[:-1]).T).sum())

    def __eq__(self, other):
        if not isinstance(other, GeoGraph):
            return NotImplemented
        if self.nodes != other.nodes or self.edges != other.edges:
            return False
        if (self.geometry is None) != (other.geometry is None):
            return False
        if self.geometry is not None:
            return all(np.array_equal(a, b) for a, b in zip(self.geometry, other.geometry))
        return True


@dataclass(frozen=True)
class GroundTruth:
    """Region mask, background component labels, capped distance map."""

    region: BinaryMask
    labels: LabelGrid
    dist: ScalarGrid
    dmax: float

    def __post_init__(self):
        r, l, d = self.region, self.labels, self.dist
        if not (r.width == l.width == d.width and r.height == l.height == d.height):
            raise ValueError("ground-truth grids must share one extent")
        if not np.array_equal(l.data == 0, r.data):
            raise ValueError("label 0 must coincide with the region mask")
        if float(d.data.max()) > float(self.dmax):
            raise ValueError("dist exceeds dmax")

    @property
    def width(self) -> int:
        return self.region.width

    @property
    def height(self) -> int:
        return self.region.height


def parse_graph(text: str | bytes) -> GeoGraph:
    """Parse the N/E line format; see the grammar in the CLI docs."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"not valid UTF-8: {e}") from None
    nodes: list[Node] = []
    seen: dict[int, None] = {}
    edges: list[tuple[int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        kind = parts[0]
        if kind == "N":
            if len(parts) != 4:
                raise ParseError(f"node line needs 'N <id> <x> <y>', got {raw!r}", lineno)
            try:
                nid, x, y = int(parts[1]), float(parts[2]), float(parts[3])
            except ValueError:
                raise ParseError(f"malformed node line {raw!r}", lineno) from None
            if not (np.isfinite(x) and np.isfinite(y)):
                raise ParseError(f"non-finite coordinate in {raw!r}", lineno)
            if nid in seen:
                raise ParseError(f"duplicate node id {nid}", lineno)
            seen[nid] = None
            nodes.append(Node(nid, x, y))
        elif kind == "E":
            if len(parts) != 3:
                raise ParseError(f"edge line needs 'E <id> <id>', got {raw!r}", lineno)
            try:
                a, b = int(parts[1]), int(parts[2])
            except ValueError:
                raise ParseError(f"malformed edge line {raw!r}", lineno) from None
            if a == b:
                raise ParseError(f"self-loop at node {a}", lineno)
            if a not in seen:
                raise ParseError(f"unknown node reference {a}", lineno)
            if b not in seen:
                raise ParseError(f"unknown node reference {b}", lineno)
            edges.append((a, b))
        else:
            raise ParseError(f"unknown line type {kind!r}", lineno)
    return GeoGraph(tuple(nodes), tuple(edges))


def format_graph(graph: GeoGraph) -> str:
    """Serialize to the N/E text format: nodes first, ids ascending.

    Traced geometry cannot be represented in the format; flatten it first
    (see extract.flatten) rather than silently dropping curves.
    """
    if graph.geometry is not None:
        raise ValueError("cannot serialize traced geometry; flatten the graph first")
    lines = [f"N {n.id} {n.x!r} {n.y!r}" for n in graph.nodes]
    lines += [f"E {a} {b}" for a, b in graph.edges]
    return "\n".join(lines) + ("\n" if lines else "")


def _round_px(v: float) -> int:
    return int(np.floor(v + 0.5))


def _draw_segment(out: np.ndarray, x0: int, y0: int, x1: int, y1: int) -> None:
    # classic integer line walk, 8-connected
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    while True:
        out[y0, x0] = True
        if x0 == x1 and y0 == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def rasterize(graph: GeoGraph, width: int, height: int) -> BinaryMask:
    """Draw every edge as an 8-connected digital segment; lone nodes get a pixel."""
    rounded: dict[int, tuple[int, int]] = {}
    for n in graph.nodes:
        px, py = _round_px(n.x), _round_px(n.y)
        if not (0 <= n.x < width and 0 <= n.y < height and 0 <= px < width and 0 <= py < height):
            raise ValueError(f"node {n.id} at ({n.x}, {n.y}) outside extent {width}x{height}")
    out = np.zeros((height, width), bool)
    for i, (a, b) in enumerate(graph.edges):
        pts = graph.edge_points(i)
        px = np.floor(pts + 0.5).astype(np.int64)
        if (px < 0).any() or (px[:, 0] >= width).any() or (px[:, 1] >= height).any():
            raise ValueError(f"edge ({a},{b}) geometry outside extent {width}x{height}")
        for (x0, y0), (x1, y1) in zip(px[:-1], px[1:]):
            _draw_segment(out, x0, y0, x1, y1)
    deg = graph.degrees()
    for n in graph.nodes:
        if deg[n.id] == 0:
            out[_round_px(n.y), _round_px(n.x)] = True
    return BinaryMask(out)


def build_ground_truth(
    graph: GeoGraph,
    width: int,
    height: int,
    dilate_radius: float = 5,
    dmax: float = 20.0,
) -> GroundTruth:
    """Rasterize, dilate into the region, label the background, cap distances."""
    if dmax <= 0:
        raise ValueError("dmax must be positive")
    centerline = rasterize(graph, width, height)
    region = dilate(centerline, dilate_radius)
    labels = connected_components(region.complement(), 4)
    dist = distance_transform(centerline)
    capped = ScalarGrid(np.minimum(dist.data, np.float32(dmax)))
    return GroundTruth(region, labels, capped, float(dmax))
