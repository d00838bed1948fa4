"""Louvain community detection against exhaustive modularity oracles."""

import numpy as np
import pytest

import gmconv as gm
from gmconv import louvain_levels, modularity

from conftest import all_partitions, modularity_reference


def two_cliques_bridge():
    edges = [(a, b) for a in range(4) for b in range(a + 1, 4)]
    edges += [(a + 4, b + 4) for a in range(4) for b in range(a + 1, 4)]
    edges += [(3, 4)]
    return 8, edges, [1.0] * len(edges)


def best_partition_exhaustive(n, edges, weights):
    best_q = -np.inf
    best = None
    for parts in all_partitions(range(n)):
        community = np.empty(n, dtype=np.int64)
        for c, members in enumerate(parts):
            for v in members:
                community[v] = c
        q = modularity_reference(n, edges, weights, community)
        if q > best_q:
            best_q = q
            best = [sorted(p) for p in parts]
    return best, best_q


class TestModularity:
    def test_matches_reference_formula(self):
        rng = np.random.default_rng(0)
        for _ in range(40):
            n = int(rng.integers(2, 8))
            edges = [(a, b) for a in range(n) for b in range(a + 1, n)
                     if rng.random() < 0.5]
            if not edges:
                continue
            weights = rng.uniform(0.1, 2.0, size=len(edges)).tolist()
            community = rng.integers(0, 3, size=n).tolist()
            got = modularity(n, edges, weights, community)
            want = modularity_reference(n, edges, weights, community)
            assert got == pytest.approx(want, abs=1e-12)

    def test_single_community_zero(self):
        # all mass inside one community: Q = 1 - 1 = 0
        n, edges, weights = two_cliques_bridge()
        assert modularity(n, edges, weights, [0] * n) == pytest.approx(0.0)

    def test_edgeless_graph(self):
        assert modularity(3, [], [], [0, 1, 2]) == 0.0

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            louvain_levels(2, [(0, 1)], [-1.0])


class TestLouvainLevels:
    def test_two_cliques_exact(self):
        n, edges, weights = two_cliques_bridge()
        levels = louvain_levels(n, edges, weights)
        part, q = levels[-1]
        comms = {}
        for v, c in enumerate(part):
            comms.setdefault(c, []).append(v)
        found = sorted(sorted(m) for m in comms.values())
        oracle_parts, oracle_q = best_partition_exhaustive(n, edges, weights)
        assert found == sorted(oracle_parts)
        assert found == [[0, 1, 2, 3], [4, 5, 6, 7]]
        assert q == pytest.approx(oracle_q, abs=1e-12)

    def test_reaches_oracle_optimum_on_small_graphs(self):
        # local moving is a heuristic; on small clique-ish graphs with a
        # clear structure it should land on the exhaustive optimum
        rng = np.random.default_rng(1)
        hits = 0
        total = 0
        for _ in range(15):
            n = int(rng.integers(4, 8))
            edges = [(a, b) for a in range(n) for b in range(a + 1, n)
                     if rng.random() < 0.45]
            if not edges:
                continue
            weights = [1.0] * len(edges)
            total += 1
            _, q = louvain_levels(n, edges, weights)[-1]
            _, oracle_q = best_partition_exhaustive(n, edges, weights)
            assert q <= oracle_q + 1e-12
            if q == pytest.approx(oracle_q, abs=1e-9):
                hits += 1
        assert hits >= total * 0.6

    def test_modularity_never_decreases_across_passes(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            n = int(rng.integers(3, 20))
            edges = [(a, b) for a in range(n) for b in range(a + 1, n)
                     if rng.random() < 0.25]
            if not edges:
                continue
            weights = rng.uniform(0.05, 3.0, size=len(edges)).tolist()
            levels = louvain_levels(n, edges, weights)
            qs = [q for _, q in levels]
            for earlier, later in zip(qs, qs[1:]):
                assert later >= earlier - 1e-12

    def test_reported_q_matches_reported_partition(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            n = int(rng.integers(3, 15))
            edges = [(a, b) for a in range(n) for b in range(a + 1, n)
                     if rng.random() < 0.3]
            if not edges:
                continue
            weights = rng.uniform(0.1, 2.0, size=len(edges)).tolist()
            for part, q in louvain_levels(n, edges, weights):
                assert q == pytest.approx(
                    modularity_reference(n, edges, weights, part), abs=1e-12)

    def test_deterministic(self):
        n, edges, weights = two_cliques_bridge()
        a = louvain_levels(n, edges, weights)
        b = louvain_levels(n, edges, weights)
        assert len(a) == len(b)
        for (pa, qa), (pb, qb) in zip(a, b):
            assert list(pa) == list(pb) and qa == qb

    def test_partition_ids_are_compact(self):
        n, edges, weights = two_cliques_bridge()
        part, _ = louvain_levels(n, edges, weights)[-1]
        assert sorted(set(part)) == list(range(len(set(part))))


class TestLouvainPool:
    def make_graph(self):
        n, edges, _ = two_cliques_bridge()
        rng = np.random.default_rng(7)
        return gm.AttributedGraph(
            {i: rng.uniform(0.1, 1.0, size=3) for i in range(n)}, edges)

    def test_pool_contracts_cliques(self):
        G = self.make_graph()
        coarse, part = gm.louvain_pool(G)
        assert coarse.n_vertices == 2
        assert part.n_communities == 2
        comms = {}
        for v, c in part.communities.items():
            comms.setdefault(c, set()).add(v)
        assert sorted(map(sorted, comms.values())) == [
            [0, 1, 2, 3], [4, 5, 6, 7]]

    def test_coarse_attr_is_elementwise_max(self):
        G = self.make_graph()
        coarse, part = gm.louvain_pool(G)
        for c in range(part.n_communities):
            members = [v for v, cc in part.communities.items() if cc == c]
            want = G.vertex_attrs[[G.position(v) for v in members]].max(axis=0)
            assert np.array_equal(coarse.vertex_attrs[c], want)

    def test_coarse_edges_connect_adjacent_communities(self):
        G = self.make_graph()
        coarse, _ = gm.louvain_pool(G)
        assert coarse.edges == ((0, 1),)  # the bridge survives
        assert coarse.d_e == 0            # pooling drops edge attributes

    def test_backward_routes_to_argmax_member(self):
        G = self.make_graph()
        coarse, part = gm.louvain_pool(G)
        upstream = np.ones((coarse.n_vertices, G.d_v))
        down = gm.pool_backward(part, upstream)
        assert down.shape == (G.n_vertices, G.d_v)
        # each column's mass lands exactly on one member per community
        assert np.sum(down) == pytest.approx(upstream.sum())
        for c in range(part.n_communities):
            members = [G.position(v) for v, cc in part.communities.items()
                       if cc == c]
            block = down[members]
            assert np.count_nonzero(block) == G.d_v
            got = block.sum(axis=0)
            assert np.array_equal(got, upstream[c])

    def test_gradient_matches_argmax_positions(self):
        G = self.make_graph()
        coarse, part = gm.louvain_pool(G)
        rng = np.random.default_rng(9)
        upstream = rng.normal(size=(coarse.n_vertices, G.d_v))
        down = gm.pool_backward(part, upstream)
        for c in range(part.n_communities):
            for col in range(G.d_v):
                members = [G.position(v) for v, cc in part.communities.items()
                           if cc == c]
                best = members[int(np.argmax(G.vertex_attrs[members, col]))]
                assert down[best, col] == upstream[c, col]

    def test_single_community_graph(self):
        G = gm.AttributedGraph({0: [1.0], 1: [2.0], 2: [3.0]},
                               [(0, 1), (1, 2), (0, 2)])
        coarse, part = gm.louvain_pool(G)
        assert coarse.n_vertices == 1
        assert coarse.vertex_attrs[0, 0] == 3.0
