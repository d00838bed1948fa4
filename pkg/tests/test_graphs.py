"""Graph data model, neighborhoods and the text file format."""

import numpy as np
import pytest

import gmconv as gm
from gmconv import (AttributedGraph, FilterGraph, GraphError,
                    GraphParseError, l_hop_neighborhood, load_graph,
                    save_graph)


def grid5():
    """3x3 grid fragment used by several neighborhood tests."""
    vattrs = {i: [float(i)] for i in range(9)}
    edges = []
    for r in range(3):
        for c in range(3):
            v = r * 3 + c
            if c < 2:
                edges.append((v, v + 1))
            if r < 2:
                edges.append((v, v + 3))
    return AttributedGraph(vattrs, edges)


class TestConstruction:
    def test_vertex_order_is_sorted(self):
        G = AttributedGraph({3: [1.0], 1: [2.0], 2: [3.0]})
        assert G.vertex_ids == (1, 2, 3)
        assert G.vertex_attrs[:, 0].tolist() == [2.0, 3.0, 1.0]

    def test_edges_canonical_and_sorted(self):
        G = AttributedGraph({0: [0.0], 1: [0.0], 2: [0.0]},
                            [(2, 1), (1, 0)])
        assert G.edges == ((0, 1), (1, 2))

    def test_scalar_attrs_become_vectors(self):
        G = AttributedGraph({0: 1.5, 1: 2.5})
        assert G.vertex_attrs.shape == (2, 1)
        assert G.d_v == 1

    def test_edge_attrs_aligned_with_edges(self):
        G = AttributedGraph({0: [0.0], 1: [0.0], 2: [0.0]},
                            [(2, 0), (0, 1)],
                            {(0, 2): [5.0], (1, 0): [7.0]})
        assert G.edges == ((0, 1), (0, 2))
        assert G.edge_attrs[:, 0].tolist() == [7.0, 5.0]
        assert G.edge_attr(2, 0)[0] == 5.0

    def test_attrs_read_only(self):
        G = AttributedGraph({0: [1.0]})
        with pytest.raises(ValueError):
            G.vertex_attrs[0, 0] = 2.0

    def test_rejects_self_loop(self):
        with pytest.raises(GraphError):
            AttributedGraph({0: [0.0]}, [(0, 0)])

    def test_rejects_duplicate_edge(self):
        with pytest.raises(GraphError):
            AttributedGraph({0: [0.0], 1: [0.0]}, [(0, 1), (1, 0)])

    def test_rejects_unknown_endpoint(self):
        with pytest.raises(GraphError):
            AttributedGraph({0: [0.0]}, [(0, 5)])

    def test_rejects_empty(self):
        with pytest.raises(GraphError):
            AttributedGraph({})

    def test_rejects_ragged_attrs(self):
        with pytest.raises(GraphError):
            AttributedGraph({0: [1.0], 1: [1.0, 2.0]})

    def test_rejects_missing_edge_attr(self):
        with pytest.raises(GraphError):
            AttributedGraph({0: [0.0], 1: [0.0], 2: [0.0]},
                            [(0, 1), (1, 2)], {(0, 1): [1.0]})


class TestQueries:
    def test_neighbors_and_degree(self):
        G = grid5()
        assert G.neighbors(4) == (1, 3, 5, 7)
        assert G.degree(4) == 4
        assert G.degree(0) == 2

    def test_unknown_vertex_raises(self):
        G = grid5()
        with pytest.raises(GraphError):
            G.position(99)

    def test_with_attrs_shares_topology(self):
        G = grid5()
        G._hood_index(1)
        H = G.with_attrs(np.ones((9, 4)))
        assert H.d_v == 4
        assert H.edges is G.edges
        assert H._hood_cache is G._hood_cache

    def test_with_attrs_validates_shape(self):
        G = grid5()
        with pytest.raises(GraphError):
            G.with_attrs(np.ones((5, 2)))

    def test_permuted_relabels_consistently(self):
        G = AttributedGraph({0: [1.0], 1: [2.0], 2: [3.0]},
                            [(0, 1), (1, 2)], {(0, 1): [4.0], (1, 2): [5.0]})
        H = G.permuted({0: 2, 1: 0, 2: 1})
        assert H.vertex_attr(2)[0] == 1.0
        assert H.vertex_attr(0)[0] == 2.0
        assert H.edge_attr(0, 2)[0] == 4.0
        assert H.edge_attr(0, 1)[0] == 5.0


class TestNeighborhoods:
    def test_one_hop_center(self):
        G = grid5()
        hood = l_hop_neighborhood(G, 4, 1)
        assert hood.vertex_ids == (1, 3, 4, 5, 7)
        # induced edges include everything between members
        got = {tuple(sorted((hood.vertex_ids[a], hood.vertex_ids[b])))
               for a, b in hood.local_edges}
        assert got == {(1, 4), (3, 4), (4, 5), (4, 7)}

    def test_one_hop_corner(self):
        G = grid5()
        hood = l_hop_neighborhood(G, 0, 1)
        assert hood.vertex_ids == (0, 1, 3)

    def test_two_hop_covers_grid_from_center(self):
        G = grid5()
        hood = l_hop_neighborhood(G, 4, 2)
        assert hood.vertex_ids == tuple(range(9))
        assert len(hood.local_edges) == G.n_edges

    def test_induced_edges_present_between_members(self):
        # 1-hop ball of a triangle vertex contains the opposite edge too
        G = AttributedGraph({0: [0.0], 1: [1.0], 2: [2.0]},
                            [(0, 1), (1, 2), (0, 2)])
        hood = l_hop_neighborhood(G, 0, 1)
        got = {tuple(sorted((hood.vertex_ids[a], hood.vertex_ids[b])))
               for a, b in hood.local_edges}
        assert got == {(0, 1), (0, 2), (1, 2)}

    def test_materialized_graph_matches_views(self):
        G = grid5()
        hood = l_hop_neighborhood(G, 4, 1)
        mat = hood.graph
        assert mat.vertex_ids == hood.vertex_ids
        assert np.array_equal(mat.vertex_attrs, hood.vertex_attrs)

    def test_origin_map_is_identity(self):
        G = grid5()
        hood = l_hop_neighborhood(G, 4, 1)
        assert hood.origin_map == {v: v for v in hood.vertex_ids}

    def test_attrs_track_parent(self):
        G = grid5()
        hood = l_hop_neighborhood(G, 0, 1)
        H = G.with_attrs(G.vertex_attrs * 2.0)
        hood2 = l_hop_neighborhood(H, 0, 1)
        assert np.array_equal(hood2.vertex_attrs, hood.vertex_attrs * 2.0)

    def test_invalid_hops(self):
        with pytest.raises(GraphError):
            l_hop_neighborhood(grid5(), 0, 0)

    def test_edge_cover_roots_contains_endpoints(self):
        G = grid5()
        cover = G.edge_cover_roots(1)
        for (a, b), roots in zip(G.edges, cover):
            assert G.position(a) in roots
            assert G.position(b) in roots
            assert len(roots) >= 2

    def test_edge_cover_roots_exact_on_path(self):
        # on a path only the endpoints' balls contain an edge: the next
        # vertex over reaches one endpoint but not the other
        G = AttributedGraph({i: [0.0] for i in range(4)},
                            [(0, 1), (1, 2), (2, 3)])
        assert G.edge_cover_roots(1) == ((0, 1), (1, 2), (2, 3))

    def test_edge_cover_roots_triangle_includes_third(self):
        G = AttributedGraph({0: [0.0], 1: [0.0], 2: [0.0], 3: [0.0]},
                            [(0, 1), (1, 2), (0, 2), (2, 3)])
        cover = dict(zip(G.edges, G.edge_cover_roots(1)))
        assert cover[(0, 1)] == (0, 1, 2)
        assert cover[(2, 3)] == (2, 3)


class TestFilterGraph:
    def test_basic(self):
        F = FilterGraph({0: [1.0, 2.0], 1: [3.0, 4.0]}, [(0, 1)],
                        {(0, 1): [5.0]})
        assert F.n_vertices == 2
        assert F.d_v == 2
        assert F.d_e == 1
        assert F.n_parameters == 5

    def test_no_edges(self):
        F = FilterGraph({0: [1.0]}, [])
        assert F.d_e == 0
        assert F.n_parameters == 1

    def test_rejects_duplicate_edges(self):
        with pytest.raises(GraphError):
            FilterGraph({0: [0.0], 1: [0.0]}, [(0, 1), (1, 0)])


class TestFileFormat:
    def test_round_trip(self, tmp_path):
        G = AttributedGraph({0: [0.25, -1.0], 1: [1.0 / 3.0, 2.0],
                             2: [0.0, 0.0]},
                            [(0, 1), (1, 2)],
                            {(0, 1): [0.1], (1, 2): [-0.7]})
        p = tmp_path / "g.graph"
        save_graph(G, p)
        H = load_graph(p)
        assert H == G

    def test_round_trip_no_edge_attrs(self, tmp_path):
        G = AttributedGraph({0: [1.0], 1: [2.0]}, [(0, 1)])
        p = tmp_path / "g.graph"
        save_graph(G, p)
        assert load_graph(p) == G

    def test_comments_and_blank_lines(self, tmp_path):
        p = tmp_path / "g.graph"
        p.write_text("# a comment\n\ngraph 2 1 1 0\nv 0 1.5\nv 1 2.5\ne 0 1\n")
        G = load_graph(p)
        assert G.n_vertices == 2
        assert G.vertex_attr(0)[0] == 1.5

    def test_missing_header(self, tmp_path):
        p = tmp_path / "g.graph"
        p.write_text("v 0 1.0\n")
        with pytest.raises(GraphParseError):
            load_graph(p)

    def test_wrong_counts(self, tmp_path):
        p = tmp_path / "g.graph"
        p.write_text("graph 3 0 1 0\nv 0 1.0\nv 1 1.0\n")
        with pytest.raises(GraphParseError):
            load_graph(p)

    def test_wrong_attr_arity_names_line(self, tmp_path):
        p = tmp_path / "g.graph"
        p.write_text("graph 1 0 2 0\nv 0 1.0\n")
        with pytest.raises(GraphParseError) as err:
            load_graph(p)
        assert ":2:" in str(err.value)

    def test_non_numeric_attr(self, tmp_path):
        p = tmp_path / "g.graph"
        p.write_text("graph 1 0 1 0\nv 0 abc\n")
        with pytest.raises(GraphParseError):
            load_graph(p)

    def test_unknown_record(self, tmp_path):
        p = tmp_path / "g.graph"
        p.write_text("graph 1 0 1 0\nv 0 1.0\nx nonsense\n")
        with pytest.raises(GraphParseError):
            load_graph(p)

    def test_edge_before_vertices(self, tmp_path):
        p = tmp_path / "g.graph"
        p.write_text("graph 2 1 1 0\ne 0 1\nv 0 1.0\nv 1 1.0\n")
        with pytest.raises(GraphParseError):
            load_graph(p)

    def test_values_round_trip_bitwise(self, tmp_path):
        rng = np.random.default_rng(0)
        G = AttributedGraph({i: rng.normal(size=3) for i in range(5)},
                            [(0, 1), (2, 3), (3, 4)])
        p = tmp_path / "g.graph"
        save_graph(G, p)
        H = load_graph(p)
        assert np.array_equal(H.vertex_attrs, G.vertex_attrs)
