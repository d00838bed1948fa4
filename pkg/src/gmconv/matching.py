"""Graph matching similarity (GMS) solvers.

Given a graph g and a filter graph F, a feasible assignment y maps every
filter vertex to a distinct vertex of g, or to the null vertex ε when g is
too small.  The similarity of an assignment is the sum of dot products
between matched vertex attributes plus, in the edge-aware model, matched
edge attributes.  Three solvers are provided:

* ``gms_no_edges``: vertex-only objective, solved exactly as one linear
  sum assignment problem.
* ``gms_bp_edges``: full objective, approximated by folding per-pair
  edge-assignment estimates into the vertex costs before solving a single
  square assignment problem.  Feasible but possibly suboptimal.
* ``gms_brute_force``: exact maximizer of the full objective by
  enumeration; the reference the others are measured against.

All solvers share one scoring routine so equal assignments always produce
bit-identical scores: matched similarities are sorted ascending and summed
sequentially, which makes the score a function of the term multiset only.
"""

from __future__ import annotations

import numpy as np

from ._lsap import AssignmentError, solve_lsap
from .graphs import AttributedGraph, FilterGraph, NeighborhoodGraph

__all__ = [
    "MatchingError",
    "Matching",
    "node_similarity",
    "edge_similarity",
    "score_assignment",
    "gms_no_edges",
    "gms_bp_edges",
    "gms_brute_force",
    "solve_lsap",
    "AssignmentError",
]


class MatchingError(ValueError):
    """Incompatible dimensions or infeasible matching request."""


def node_similarity(x, w) -> float:
    """Dot product of a vertex attribute and a filter weight vector.

    The null vertex ε never reaches this function; its similarity is zero
    by convention and handled by the solvers.  Summation runs in component
    order so results are bit-stable across implementations.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    w = np.asarray(w, dtype=np.float64).ravel()
    if x.shape[0] != w.shape[0]:
        raise MatchingError(
            f"attribute dimension {x.shape[0]} != weight dimension {w.shape[0]}")
    s = 0.0
    for c in range(x.shape[0]):
        s += x[c] * w[c]
    return s


def edge_similarity(x, w) -> float:
    """Dot product of an edge attribute and a filter edge weight vector.
    Null edges εε contribute zero and never reach this function."""
    return node_similarity(x, w)


def _as_graph(g):
    if isinstance(g, NeighborhoodGraph):
        return g.graph
    if isinstance(g, AttributedGraph):
        return g
    raise MatchingError(f"expected a graph, got {type(g).__name__}")


def _check_dims(G, F, need_edges):
    if G.d_v != F.d_v:
        raise MatchingError(
            f"graph d_v={G.d_v} does not match filter d_v={F.d_v}")
    # edge dimensions only constrain each other when both sides actually
    # carry edges; an edgeless graph matches any filter (all filter edges
    # fall on the null edge)
    if need_edges and len(F.edges) > 0 and len(G.edges) > 0:
        if F.edge_weights is None:
            raise MatchingError("filter has edges but no edge weights")
        if G.edge_attrs is None or G.d_e != F.d_e:
            raise MatchingError(
                f"graph d_e={G.d_e} does not match filter d_e={F.d_e}")


def score_assignment(G, F, vertex_map, include_edges) -> float:
    """Similarity of an explicit assignment, canonically summed.

    ``vertex_map`` maps graph vertex ids to filter vertex ids or None (ε).
    Edge terms count an edge ij exactly when both endpoints map onto the
    endpoints of an existing filter edge.
    """
    G = _as_graph(G)
    terms = []
    for i, a in vertex_map.items():
        if a is None:
            continue
        terms.append(node_similarity(G.vertex_attr(i),
                                     F.vertex_weights[F.position(a)]))
    if include_edges and F.edge_weights is not None and len(F.edges) > 0:
        for k, (i, j) in enumerate(G.edges):
            a = vertex_map.get(i)
            b = vertex_map.get(j)
            if a is None or b is None:
                continue
            e = (a, b) if a < b else (b, a)
            if e in F._edge_pos:
                terms.append(edge_similarity(G.edge_attrs[k],
                                             F.edge_weights[F.edge_position(*e)]))
    terms.sort()
    acc = 0.0
    for t in terms:
        acc += t
    return acc


class Matching:
    """A feasible assignment between a graph and a filter plus its score.

    ``vertex_map`` sends each graph vertex to a filter vertex or None (ε);
    it is injective on non-None values and covers min(|V(g)|, |V_F|)
    filter vertices, so every filter vertex not matched to a real vertex
    is implicitly matched to ε.  Lookups work in both directions.
    """

    __slots__ = ("graph", "filter", "vertex_map", "score", "with_edges",
                 "_reverse")

    def __init__(self, graph, filt, vertex_map, score, with_edges):
        self.graph = graph
        self.filter = filt
        self.vertex_map = dict(vertex_map)
        self.score = score
        self.with_edges = with_edges
        rev = {}
        for i, a in self.vertex_map.items():
            if a is not None:
                if a in rev:
                    raise MatchingError(f"filter vertex {a!r} matched twice")
                rev[a] = i
        self._reverse = rev

    def image(self, vertex_id):
        """Filter vertex matched to a graph vertex, or None for ε."""
        return self.vertex_map.get(vertex_id)

    def preimage(self, filter_vertex_id):
        """Graph vertex matched to a filter vertex, or None for ε."""
        return self._reverse.get(filter_vertex_id)

    def edge_map(self):
        """Induced map from graph edges to filter edges; edges whose
        endpoint images do not form a filter edge map to None (εε)."""
        out = {}
        for (i, j) in self.graph.edges:
            a = self.vertex_map.get(i)
            b = self.vertex_map.get(j)
            m = None
            if a is not None and b is not None:
                e = (a, b) if a < b else (b, a)
                if e in self.filter._edge_pos:
                    m = e
            out[(i, j)] = m
        return out

    def recomputed_score(self) -> float:
        return score_assignment(self.graph, self.filter, self.vertex_map,
                                self.with_edges)

    def __repr__(self):
        return (f"Matching(score={self.score!r}, "
                f"matched={len(self._reverse)}/{self.filter.n_vertices})")


def _canonical_row_order(X):
    """Stable ascending lexicographic order of attribute rows.

    Presenting rows to the assignment solver in this canonical frame makes
    the solved matching a function of the attribute multiset alone, so
    relabeled (for example rotated) graphs reproduce scores bit-exactly
    even when assignments are tied to within rounding.  Must sort exactly
    like the compiled kernel's row ordering."""
    return sorted(range(X.shape[0]), key=lambda p: tuple(X[p]))


def _vertex_similarity_matrix(G, F, order):
    n = G.n_vertices
    m = F.n_vertices
    S = np.empty((n, m))
    X = G.vertex_attrs
    W = F.vertex_weights
    d = X.shape[1]
    for r in range(n):
        p = order[r]
        for a in range(m):
            s = 0.0
            for c in range(d):
                s += X[p, c] * W[a, c]
            S[r, a] = s
    return S


def _padded_cost(S_plus):
    """Square cost matrix: negated similarities with zero-cost dummy
    rows/columns standing in for ε."""
    n, m = S_plus.shape
    size = max(n, m)
    C = np.zeros((size, size))
    C[:n, :m] = -S_plus
    return C


def _map_from_assignment(G, F, assign, order):
    n = G.n_vertices
    m = F.n_vertices
    vmap = {}
    for r in range(n):
        a = assign[r] if r < len(assign) else -1
        vmap[G.vertex_ids[order[r]]] = F.vertex_ids[a] if 0 <= a < m else None
    return vmap


def gms_no_edges(g, F: FilterGraph) -> Matching:
    """Exact maximizer of the vertex-only similarity.

    Builds the negated-similarity cost matrix (rows in canonical order),
    pads it square and solves one assignment problem; surplus filter
    vertices fall on zero-cost dummies, realizing the ε convention.
    """
    G = _as_graph(g)
    _check_dims(G, F, need_edges=False)
    order = _canonical_row_order(G.vertex_attrs)
    S = _vertex_similarity_matrix(G, F, order)
    assign, _ = solve_lsap(_padded_cost(S))
    vmap = _map_from_assignment(G, F, assign, order)
    score = score_assignment(G, F, vmap, include_edges=False)
    return Matching(G, F, vmap, score, with_edges=False)


def _incident_edge_estimate(G, F, S_E, g_inc, f_inc):
    """Optimal pairing value between two incident-edge lists under the
    precomputed edge-similarity matrix, ε-padded like the vertex problem."""
    n = len(g_inc)
    m = len(f_inc)
    if n == 0 or m == 0:
        return 0.0
    size = max(n, m)
    C = np.zeros((size, size))
    for p in range(n):
        for q in range(m):
            C[p, q] = -S_E[g_inc[p], f_inc[q]]
    assign, _ = solve_lsap(C)
    est = 0.0
    for p in range(n):
        q = assign[p]
        if q < m:
            est += S_E[g_inc[p], f_inc[q]]
    return est


def gms_bp_edges(g, F: FilterGraph) -> Matching:
    """Square fast bipartite approximation of the full similarity.

    Each candidate vertex pair's cost is augmented with the value of a
    small assignment problem between the edges incident to the two
    vertices; the outer square assignment is then solved once.  The
    returned score is the true objective of the returned assignment,
    recomputed from the maps, never the estimate.
    """
    G = _as_graph(g)
    _check_dims(G, F, need_edges=True)
    order = _canonical_row_order(G.vertex_attrs)
    S = _vertex_similarity_matrix(G, F, order)

    if F.edge_weights is not None and len(F.edges) > 0 and len(G.edges) > 0:
        n_ge = len(G.edges)
        n_fe = len(F.edges)
        S_E = np.empty((n_ge, n_fe))
        for k in range(n_ge):
            for q in range(n_fe):
                S_E[k, q] = edge_similarity(G.edge_attrs[k], F.edge_weights[q])
        g_incident = [[] for _ in G.vertex_ids]
        for k, (i, j) in enumerate(G.edges):
            g_incident[G.position(i)].append(k)
            g_incident[G.position(j)].append(k)
        f_incident = [[] for _ in F.vertex_ids]
        for q, (a, b) in enumerate(F.edges):
            f_incident[F.position(a)].append(q)
            f_incident[F.position(b)].append(q)
        for r in range(G.n_vertices):
            for a in range(F.n_vertices):
                S[r, a] += _incident_edge_estimate(
                    G, F, S_E, g_incident[order[r]], f_incident[a])

    assign, _ = solve_lsap(_padded_cost(S))
    vmap = _map_from_assignment(G, F, assign, order)
    score = score_assignment(G, F, vmap, include_edges=True)
    return Matching(G, F, vmap, score, with_edges=True)


def gms_brute_force(g, F: FilterGraph, max_filter_vertices: int = 8) -> Matching:
    """Exact maximizer of the full similarity by enumeration.

    Walks all feasible assignments depth-first over filter vertices in
    sorted order, candidates in sorted order with ε last, keeping the
    first maximum; ties therefore resolve to the lexicographically
    smallest map.  Guarded to small filters, as the count grows
    factorially.
    """
    G = _as_graph(g)
    _check_dims(G, F, need_edges=True)
    m = F.n_vertices
    if m > max_filter_vertices:
        raise MatchingError(
            f"brute force limited to {max_filter_vertices} filter vertices, got {m}")
    n = G.n_vertices
    eps_budget = max(0, m - n)

    g_ids = G.vertex_ids
    f_ids = F.vertex_ids
    # precomputed similarity matrices; entries are bit-identical to what
    # node_similarity/edge_similarity return on the same vectors
    S = _vertex_similarity_matrix(G, F, range(n))
    have_edges = (F.edge_weights is not None and len(F.edges) > 0
                  and len(G.edges) > 0)
    if have_edges:
        S_E = np.empty((len(G.edges), len(F.edges)))
        for k in range(len(G.edges)):
            for q in range(len(F.edges)):
                S_E[k, q] = edge_similarity(G.edge_attrs[k], F.edge_weights[q])
        edge_pos = [(G.position(i), G.position(j)) for (i, j) in G.edges]

    best_score = -np.inf
    best_assign = None
    # assign_fp[a_idx] = graph vertex position matched to filter vertex
    # a_idx, or -1 for ε; pos_map[p] = filter position matched to graph
    # position p, or -1
    assign_fp = np.full(m, -1, dtype=np.int64)
    pos_map = np.full(n, -1, dtype=np.int64)
    f_edges_by_pos = {}
    if have_edges:
        for q, (a, b) in enumerate(F.edges):
            f_edges_by_pos[(F.position(a), F.position(b))] = q

    def leaf_score():
        terms = []
        for a_idx in range(m):
            p = assign_fp[a_idx]
            if p >= 0:
                terms.append(S[p, a_idx])
        if have_edges:
            for k, (pi, pj) in enumerate(edge_pos):
                a = pos_map[pi]
                b = pos_map[pj]
                if a >= 0 and b >= 0:
                    e = (a, b) if a < b else (b, a)
                    q = f_edges_by_pos.get(e)
                    if q is not None:
                        terms.append(S_E[k, q])
        terms.sort()
        acc = 0.0
        for t in terms:
            acc += t
        return acc

    def walk(a_idx, eps_left):
        nonlocal best_score, best_assign
        if a_idx == m:
            s = leaf_score()
            if s > best_score:
                best_score = s
                best_assign = assign_fp.copy()
            return
        for p in range(n):
            if pos_map[p] < 0:
                pos_map[p] = a_idx
                assign_fp[a_idx] = p
                walk(a_idx + 1, eps_left)
                assign_fp[a_idx] = -1
                pos_map[p] = -1
        if eps_left > 0:
            walk(a_idx + 1, eps_left - 1)

    walk(0, eps_budget)
    vmap = {i: None for i in g_ids}
    for a_idx in range(m):
        p = best_assign[a_idx]
        if p >= 0:
            vmap[g_ids[p]] = f_ids[a_idx]
    return Matching(G, F, vmap, best_score, with_edges=True)
