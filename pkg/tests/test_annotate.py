"""Graph parsing, rasterization, and ground-truth bundle tests."""
import numpy as np
import pytest

from roadtopo.annotate import (
    GeoGraph,
    GroundTruth,
    Node,
    build_ground_truth,
    format_graph,
    parse_graph,
    rasterize,
)
from roadtopo.errors import ParseError


def g(nodes, edges=()):
    return GeoGraph(tuple(Node(*n) for n in nodes), tuple(edges))


class TestParse:
    def test_two_nodes_one_edge(self):
        got = parse_graph("N 0 1 1\nN 1 5 1\nE 0 1")
        assert len(got.nodes) == 2
        assert got.edges == ((0, 1),)

    def test_empty_input(self):
        assert parse_graph("") == GeoGraph(())

    def test_unknown_node_reference_line_number(self):
        with pytest.raises(ParseError) as e:
            parse_graph("E 0 7")
        assert e.value.line == 1
        assert "unknown node reference" in str(e.value)

    def test_comments_and_blanks_ignored(self):
        got = parse_graph("# header\n\nN 3 2.5 7\n  \n# trailing\n")
        assert got.nodes == (Node(3, 2.5, 7.0),)

    def test_duplicate_node_id(self):
        with pytest.raises(ParseError) as e:
            parse_graph("N 1 0 0\nN 1 2 2")
        assert e.value.line == 2

    def test_malformed_lines(self):
        for bad in ["N 1 2", "N x 0 0", "E 1", "Q 1 2 3", "N 0 nan 1"]:
            with pytest.raises(ParseError):
                parse_graph(f"N 9 0 0\n{bad}")

    def test_self_loop_rejected(self):
        with pytest.raises(ParseError):
            parse_graph("N 0 1 1\nE 0 0")

    def test_duplicate_edges_collapsed(self):
        got = parse_graph("N 0 0 0\nN 1 3 0\nE 0 1\nE 1 0\nE 0 1")
        assert got.edges == ((0, 1),)

    def test_bytes_accepted(self):
        assert parse_graph(b"N 0 1 2\n").nodes == (Node(0, 1.0, 2.0),)


class TestFormat:
    def test_round_trip_exact(self):
        src = g([(5, 0.1, 7.25), (2, 3.0, 4.5), (9, 1e-3, 63.999999)], [(5, 2), (2, 9)])
        assert parse_graph(format_graph(src)) == src

    def test_nodes_before_edges_ids_ascending(self):
        txt = format_graph(g([(4, 1, 1), (0, 2, 2)], [(4, 0)]))
        lines = txt.splitlines()
        assert lines == ["N 0 2.0 2.0", "N 4 1.0 1.0", "E 0 4"]

    def test_empty_graph(self):
        assert format_graph(GeoGraph(())) == ""


class TestGeoGraph:
    def test_canonical_ordering(self):
        a = g([(1, 0, 0), (0, 1, 1)], [(1, 0)])
        assert a.edges == ((0, 1),)
        assert [n.id for n in a.nodes] == [0, 1]

    def test_edge_validation(self):
        with pytest.raises(ValueError):
            g([(0, 0, 0)], [(0, 1)])
        with pytest.raises(ValueError):
            g([(0, 0, 0), (0, 1, 1)])

    def test_edge_length_straight_and_traced(self):
        plain = g([(0, 0.0, 0.0), (1, 3.0, 4.0)], [(0, 1)])
        assert plain.edge_length(0) == 5.0
        traced = GeoGraph(
            (Node(0, 0, 0), Node(1, 2, 0)),
            ((0, 1),),
            (np.array([[0, 0], [1, 1], [2, 0]], np.float64),),
        )
        assert traced.edge_length(0) == pytest.approx(2 * np.sqrt(2))

    def test_parallel_edges_need_geometry(self):
        dup = g([(0, 0, 0), (1, 5, 0)], [(0, 1), (0, 1)])
        assert dup.edges == ((0, 1),)
        multi = GeoGraph(
            (Node(0, 0, 0), Node(1, 5, 0)),
            ((0, 1), (0, 1)),
            (np.array([[0, 0], [5, 0]]), np.array([[0, 0], [2, 3], [5, 0]])),
        )
        assert len(multi.edges) == 2
        assert multi.degrees() == {0: 2, 1: 2}


class TestRasterize:
    def test_horizontal_edge(self):
        m = rasterize(g([(0, 1, 1), (1, 5, 1)], [(0, 1)]), 8, 4)
        assert m.data.sum() == 5
        assert m.data[1, 1:6].all()

    def test_diagonal_edge(self):
        m = rasterize(g([(0, 0, 0), (1, 3, 3)], [(0, 1)]), 4, 4)
        assert set(zip(*np.nonzero(m.data))) == {(0, 0), (1, 1), (2, 2), (3, 3)}

    def test_empty_graph(self):
        assert not rasterize(GeoGraph(()), 5, 5).data.any()

    def test_isolated_node_single_pixel(self):
        m = rasterize(g([(0, 2.4, 3.6)]), 8, 8)
        assert set(zip(*np.nonzero(m.data))) == {(4, 2)}

    def test_out_of_range_names_node(self):
        with pytest.raises(ValueError, match="node 7"):
            rasterize(g([(7, 9.0, 1.0)]), 8, 8)
        # rounds up past the right edge
        with pytest.raises(ValueError, match="node 3"):
            rasterize(g([(3, 7.6, 1.0)]), 8, 8)


class TestGroundTruth:
    def test_default_parameters_shape(self):
        gt = build_ground_truth(g([(0, 0, 32), (1, 63, 32)], [(0, 1)]), 64, 64)
        assert gt.dmax == 20.0
        # vertical extent of the band around a horizontal centerline is 11
        assert gt.region.data[:, 30].sum() == 11
        assert gt.labels.component_count == 2

    def test_empty_graph_bundle(self):
        gt = build_ground_truth(GeoGraph(()), 32, 32)
        assert not gt.region.data.any()
        assert gt.labels.component_count == 1
        assert (gt.dist.data == np.float32(20.0)).all()

    def test_region_background_partition(self):
        gt = build_ground_truth(g([(0, 10, 0), (1, 10, 63)], [(0, 1)]), 64, 64)
        assert np.array_equal(gt.labels.data == 0, gt.region.data)
        assert ((gt.labels.data > 0) ^ gt.region.data).all()

    def test_dist_zero_on_centerline_and_capped(self):
        graph = g([(0, 0, 16), (1, 63, 16)], [(0, 1)])
        gt = build_ground_truth(graph, 64, 64)
        raster = rasterize(graph, 64, 64)
        assert (gt.dist.data[raster.data] == 0).all()
        assert gt.dist.data.max() == np.float32(20.0)

    def test_dist_lipschitz_under_4_steps(self):
        gt = build_ground_truth(g([(0, 5, 5), (1, 50, 40)], [(0, 1)]), 64, 64)
        d = gt.dist.data.astype(np.float64)
        cap = gt.dmax
        for dy, dx in [(0, 1), (1, 0)]:
            a = d[: d.shape[0] - dy, : d.shape[1] - dx]
            b = d[dy:, dx:]
            below = (a < cap) & (b < cap)
            assert np.abs(a - b)[below].max() <= 1.0 + 1e-6

    def test_centerline_inside_region_any_radius(self):
        graph = g([(0, 3, 3), (1, 20, 11)], [(0, 1)])
        raster = rasterize(graph, 24, 24)
        for r in [0, 1, 2, 5]:
            gt = build_ground_truth(graph, 24, 24, dilate_radius=r)
            assert gt.region.data[raster.data].all()

    def test_consistency_validation(self):
        gt = build_ground_truth(g([(0, 0, 8), (1, 15, 8)], [(0, 1)]), 16, 16)
        bad_labels = np.array(gt.labels.data)
        bad_labels[0, 0] = 0
        with pytest.raises(ValueError):
            GroundTruth(gt.region, type(gt.labels)(bad_labels, gt.labels.component_count), gt.dist, gt.dmax)
