"""Attributed-graph data model, neighborhood extraction and graph file I/O.

Graphs are undirected, loop-free, with dense real vector attributes on
vertices and (optionally) on edges.  All values are immutable after
construction and safe to share across workers.  Vertex order is always the
sorted order of the vertex ids, which makes every downstream computation
(matching tie-breaks, gradient accumulation) reproducible.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np

__all__ = [
    "GraphError",
    "GraphParseError",
    "AttributedGraph",
    "NeighborhoodGraph",
    "FilterGraph",
    "l_hop_neighborhood",
    "load_graph",
    "save_graph",
]


class GraphError(ValueError):
    """Invalid graph construction or graph-domain argument."""


class GraphParseError(GraphError):
    """Malformed graph file; message names the offending line."""


def _canonical_edge(a, b):
    if a == b:
        raise GraphError(f"self-loop on vertex {a!r} is not allowed")
    return (a, b) if a < b else (b, a)


class AttributedGraph:
    """Undirected graph with vector attributes on vertices and edges.

    Parameters
    ----------
    vertex_attrs : mapping ``id -> vector``.  Vertex ids must be mutually
        sortable (all ints or all strings).  Scalar attributes are accepted
        and treated as 1-vectors.
    edges : iterable of id pairs.
    edge_attrs : optional mapping ``(id, id) -> vector``; if given it must
        cover every edge (``d_e`` is then uniform).  ``None`` means the graph
        carries no edge attributes (``d_e = 0``).
    """

    __slots__ = (
        "vertex_ids", "vertex_attrs", "edges", "edge_attrs",
        "_pos", "_edge_pos", "_adj_idx", "_hood_cache", "_omega_cache",
    )

    def __init__(self, vertex_attrs, edges=(), edge_attrs=None):
        try:
            ids = sorted(vertex_attrs)
        except TypeError as exc:
            raise GraphError(f"vertex ids are not mutually sortable: {exc}") from exc
        if not ids:
            raise GraphError("graph must have at least one vertex")
        self.vertex_ids = tuple(ids)
        self._pos = {v: k for k, v in enumerate(ids)}

        try:
            attrs = np.asarray(
                [np.atleast_1d(np.asarray(vertex_attrs[v], dtype=np.float64))
                 for v in ids], dtype=np.float64)
        except ValueError as exc:
            raise GraphError(
                f"vertex attribute vectors must share a common dimension: {exc}"
            ) from exc
        if attrs.ndim != 2:
            raise GraphError("vertex attribute vectors must share a common dimension")
        self.vertex_attrs = attrs
        self.vertex_attrs.setflags(write=False)

        seen = set()
        canon = []
        for (a, b) in edges:
            if a not in self._pos or b not in self._pos:
                raise GraphError(f"edge ({a!r}, {b!r}) references an unknown vertex")
            e = _canonical_edge(a, b)
            if e in seen:
                raise GraphError(f"duplicate edge {e!r}")
            seen.add(e)
            canon.append(e)
        canon.sort()
        self.edges = tuple(canon)
        self._edge_pos = {e: k for k, e in enumerate(self.edges)}

        if edge_attrs is None:
            self.edge_attrs = None
        else:
            missing = [e for e in self.edges if e not in edge_attrs and (e[1], e[0]) not in edge_attrs]
            if missing:
                raise GraphError(f"edge attributes missing for {missing[0]!r}")
            rows = []
            for e in self.edges:
                val = edge_attrs.get(e)
                if val is None:
                    val = edge_attrs[(e[1], e[0])]
                rows.append(np.atleast_1d(np.asarray(val, dtype=np.float64)))
            arr = (np.asarray(rows, dtype=np.float64) if rows
                   else np.zeros((0, 0), dtype=np.float64))
            if rows and arr.ndim != 2:
                raise GraphError("edge attribute vectors must share a common dimension")
            self.edge_attrs = arr
            self.edge_attrs.setflags(write=False)

        self._adj_idx = None
        self._hood_cache = {}
        self._omega_cache = {}

    # -- basic queries -------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertex_ids)

    @property
    def n_edges(self):
        return len(self.edges)

    @property
    def d_v(self):
        return self.vertex_attrs.shape[1]

    @property
    def d_e(self):
        return 0 if self.edge_attrs is None else self.edge_attrs.shape[1]

    def position(self, vertex_id):
        """Index of a vertex in the sorted vertex order."""
        try:
            return self._pos[vertex_id]
        except KeyError:
            raise GraphError(f"unknown vertex id {vertex_id!r}") from None

    def edge_position(self, a, b):
        return self._edge_pos[_canonical_edge(a, b)]

    def vertex_attr(self, vertex_id):
        return self.vertex_attrs[self.position(vertex_id)]

    def edge_attr(self, a, b):
        if self.edge_attrs is None:
            raise GraphError("graph carries no edge attributes")
        return self.edge_attrs[self.edge_position(a, b)]

    def adjacency_index(self):
        """Neighbor positions per vertex position, each sorted ascending."""
        if self._adj_idx is None:
            adj = [[] for _ in self.vertex_ids]
            for (a, b) in self.edges:
                ia, ib = self._pos[a], self._pos[b]
                adj[ia].append(ib)
                adj[ib].append(ia)
            self._adj_idx = tuple(tuple(sorted(n)) for n in adj)
        return self._adj_idx

    def neighbors(self, vertex_id):
        idx = self.adjacency_index()[self.position(vertex_id)]
        return tuple(self.vertex_ids[k] for k in idx)

    def degree(self, vertex_id):
        return len(self.adjacency_index()[self.position(vertex_id)])

    # -- derived graphs ------------------------------------------------

    def with_attrs(self, vertex_attrs, edge_attrs=None):
        """New graph on the same topology with replaced attribute arrays.

        Topology-derived caches (adjacency, neighborhood indices) are shared
        with the original, which keeps layer stacks cheap.
        """
        g = object.__new__(AttributedGraph)
        g.vertex_ids = self.vertex_ids
        g._pos = self._pos
        g.edges = self.edges
        g._edge_pos = self._edge_pos
        arr = np.ascontiguousarray(vertex_attrs, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.shape[0] != self.n_vertices:
            raise GraphError("vertex attribute array does not match vertex count")
        arr.setflags(write=False)
        g.vertex_attrs = arr
        if edge_attrs is None:
            g.edge_attrs = None
        else:
            earr = np.ascontiguousarray(edge_attrs, dtype=np.float64)
            if earr.shape[0] != self.n_edges:
                raise GraphError("edge attribute array does not match edge count")
            earr.setflags(write=False)
            g.edge_attrs = earr
        g._adj_idx = self._adj_idx
        g._hood_cache = self._hood_cache
        g._omega_cache = self._omega_cache
        return g

    def permuted(self, mapping):
        """Relabel vertices through ``mapping`` (a dict id -> new id)."""
        vattrs = {mapping[v]: self.vertex_attrs[i] for i, v in enumerate(self.vertex_ids)}
        edges = [(mapping[a], mapping[b]) for (a, b) in self.edges]
        eattrs = None
        if self.edge_attrs is not None:
            eattrs = {(mapping[a], mapping[b]): self.edge_attrs[k]
                      for k, (a, b) in enumerate(self.edges)}
        return AttributedGraph(vattrs, edges, eattrs)

    # -- neighborhoods -------------------------------------------------

    def _hood_index(self, hops):
        """Per-vertex l-hop ball index structure, cached on the topology.

        Returns a list over vertex positions of tuples
        ``(member_pos, local_edges, parent_edge_idx)`` where ``member_pos``
        are parent positions of the ball members in sorted-id order,
        ``local_edges`` the induced edges as local index pairs and
        ``parent_edge_idx`` their positions in the parent edge array.
        """
        cached = self._hood_cache.get(hops)
        if cached is not None:
            return cached
        if hops < 1:
            raise GraphError(f"hop count must be >= 1, got {hops}")
        adj = self.adjacency_index()
        out = []
        for root in range(self.n_vertices):
            seen = {root}
            frontier = [root]
            for _ in range(hops):
                nxt = []
                for u in frontier:
                    for w in adj[u]:
                        if w not in seen:
                            seen.add(w)
                            nxt.append(w)
                if not nxt:
                    break
                frontier = nxt
            members = np.array(sorted(seen), dtype=np.int64)
            local = {p: k for k, p in enumerate(members)}
            ledges = []
            pedges = []
            for k, (a, b) in enumerate(self.edges):
                ia, ib = self._pos[a], self._pos[b]
                if ia in seen and ib in seen:
                    la, lb = local[ia], local[ib]
                    ledges.append((la, lb) if la < lb else (lb, la))
                    pedges.append(k)
            out.append((members,
                        np.array(ledges, dtype=np.int64).reshape(-1, 2),
                        np.array(pedges, dtype=np.int64)))
        self._hood_cache[hops] = out
        return out

    def neighborhoods(self, hops):
        """All l-hop closed neighborhoods, aligned with the vertex order."""
        return tuple(NeighborhoodGraph(self, pos, hops)
                     for pos in range(self.n_vertices))

    def edge_cover_roots(self, hops):
        """For each edge, the sorted positions of roots whose l-hop
        neighborhood contains the edge (the membership sets behind the
        edge-score estimator).  Both endpoints always qualify."""
        cached = self._omega_cache.get(hops)
        if cached is not None:
            return cached
        hoods = self._hood_index(hops)
        member_sets = [set(members.tolist()) for members, _, _ in hoods]
        cover = []
        for (a, b) in self.edges:
            ia, ib = self._pos[a], self._pos[b]
            roots = [r for r in range(self.n_vertices)
                     if ia in member_sets[r] and ib in member_sets[r]]
            cover.append(tuple(roots))
        cover = tuple(cover)
        self._omega_cache[hops] = cover
        return cover

    # -- dunder --------------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, AttributedGraph):
            return NotImplemented
        if self.vertex_ids != other.vertex_ids or self.edges != other.edges:
            return False
        if not np.array_equal(self.vertex_attrs, other.vertex_attrs):
            return False
        if (self.edge_attrs is None) != (other.edge_attrs is None):
            return False
        if self.edge_attrs is not None and not np.array_equal(self.edge_attrs, other.edge_attrs):
            return False
        return True

    def __repr__(self):
        return (f"AttributedGraph(|V|={self.n_vertices}, |E|={self.n_edges}, "
                f"d_v={self.d_v}, d_e={self.d_e})")


class NeighborhoodGraph:
    """Closed l-hop ball around a root vertex, as an induced subgraph.

    Local vertices keep their parent ids (so ``origin_map`` is the identity
    on the member set) and are ordered by sorted parent id.  The index
    arrays reference positions in the parent's attribute arrays, so the
    attributes seen through a neighborhood always track the parent graph.
    """

    __slots__ = ("parent", "root", "hops", "member_pos", "local_edges",
                 "parent_edge_idx", "_graph")

    def __init__(self, parent, root_pos, hops):
        members, ledges, pedges = parent._hood_index(hops)[root_pos]
        self.parent = parent
        self.root = parent.vertex_ids[root_pos]
        self.hops = hops
        self.member_pos = members
        self.local_edges = ledges
        self.parent_edge_idx = pedges
        self._graph = None

    @property
    def n_vertices(self):
        return len(self.member_pos)

    @property
    def origin_map(self):
        ids = [self.parent.vertex_ids[p] for p in self.member_pos]
        return {v: v for v in ids}

    @property
    def vertex_ids(self):
        return tuple(self.parent.vertex_ids[p] for p in self.member_pos)

    @property
    def vertex_attrs(self):
        return self.parent.vertex_attrs[self.member_pos]

    @property
    def edge_attrs(self):
        if self.parent.edge_attrs is None:
            return None
        return self.parent.edge_attrs[self.parent_edge_idx]

    @property
    def graph(self):
        """The induced subgraph materialized as an AttributedGraph."""
        if self._graph is None:
            ids = self.vertex_ids
            vattrs = {v: self.parent.vertex_attrs[p]
                      for v, p in zip(ids, self.member_pos)}
            edges = []
            eattrs = {} if self.parent.edge_attrs is not None else None
            for (la, lb), pe in zip(self.local_edges, self.parent_edge_idx):
                e = _canonical_edge(ids[la], ids[lb])
                edges.append(e)
                if eattrs is not None:
                    eattrs[e] = self.parent.edge_attrs[pe]
            self._graph = AttributedGraph(vattrs, edges, eattrs)
        return self._graph

    def __repr__(self):
        return (f"NeighborhoodGraph(root={self.root!r}, hops={self.hops}, "
                f"|V|={self.n_vertices}, |E|={len(self.local_edges)})")


def l_hop_neighborhood(G: AttributedGraph, vertex_id, hops: int) -> NeighborhoodGraph:
    """Closed l-hop neighborhood of a vertex: the ball members plus every
    parent edge between them.  Raises GraphError for unknown ids or l < 1."""
    if hops < 1:
        raise GraphError(f"hop count must be >= 1, got {hops}")
    return NeighborhoodGraph(G, G.position(vertex_id), hops)


class FilterGraph:
    """Small attributed graph whose attributes are trainable weights.

    ``vertex_weights`` has one weight vector per filter vertex (the vector
    dimension must equal d_v of the graphs it is matched against) and
    ``edge_weights`` one vector per filter edge (dimension d_e), or ``None``
    for vertex-only filters.
    """

    __slots__ = ("vertex_ids", "edges", "vertex_weights", "edge_weights",
                 "_pos", "_edge_pos")

    def __init__(self, vertex_weights, edges=(), edge_weights=None):
        try:
            ids = sorted(vertex_weights)
        except TypeError as exc:
            raise GraphError(f"filter vertex ids are not sortable: {exc}") from exc
        if not ids:
            raise GraphError("filter graph must have at least one vertex")
        self.vertex_ids = tuple(ids)
        self._pos = {v: k for k, v in enumerate(ids)}
        self.vertex_weights = np.asarray(
            [np.atleast_1d(np.asarray(vertex_weights[v], dtype=np.float64)) for v in ids],
            dtype=np.float64)
        if self.vertex_weights.ndim != 2:
            raise GraphError("filter weight vectors must share a common dimension")

        seen = set()
        canon = []
        for (a, b) in edges:
            if a not in self._pos or b not in self._pos:
                raise GraphError(f"filter edge ({a!r}, {b!r}) references an unknown vertex")
            e = _canonical_edge(a, b)
            if e in seen:
                raise GraphError(f"duplicate filter edge {e!r}")
            seen.add(e)
            canon.append(e)
        canon.sort()
        self.edges = tuple(canon)
        self._edge_pos = {e: k for k, e in enumerate(self.edges)}

        if edge_weights is None:
            self.edge_weights = None
        else:
            rows = []
            for e in self.edges:
                val = edge_weights.get(e)
                if val is None:
                    val = edge_weights[(e[1], e[0])]
                rows.append(np.atleast_1d(np.asarray(val, dtype=np.float64)))
            self.edge_weights = (np.asarray(rows, dtype=np.float64) if rows
                                 else np.zeros((0, 0), dtype=np.float64))

    @property
    def n_vertices(self):
        return len(self.vertex_ids)

    @property
    def d_v(self):
        return self.vertex_weights.shape[1]

    @property
    def d_e(self):
        return 0 if self.edge_weights is None else self.edge_weights.shape[1]

    @property
    def n_parameters(self):
        n = self.vertex_weights.size
        if self.edge_weights is not None:
            n += self.edge_weights.size
        return n

    def position(self, vertex_id):
        try:
            return self._pos[vertex_id]
        except KeyError:
            raise GraphError(f"unknown filter vertex id {vertex_id!r}") from None

    def edge_position(self, a, b):
        return self._edge_pos[_canonical_edge(a, b)]

    def __repr__(self):
        return (f"FilterGraph(|V|={self.n_vertices}, |E|={len(self.edges)}, "
                f"d_v={self.d_v}, d_e={self.d_e})")


# -- file format -------------------------------------------------------
#
# Line-oriented text:
#   graph <num_vertices> <num_edges> <d_v> <d_e>
#   v <id> <a_1> ... <a_dv>
#   e <id1> <id2> [<b_1> ... <b_de>]
# Ids are stored as written; purely numeric ids round-trip as ints.


def _parse_id(tok):
    try:
        return int(tok)
    except ValueError:
        return tok


def _fmt_float(x):
    return repr(float(x))


def save_graph(G: AttributedGraph, path):
    lines = [f"graph {G.n_vertices} {G.n_edges} {G.d_v} {G.d_e}"]
    for i, v in enumerate(G.vertex_ids):
        vals = " ".join(_fmt_float(x) for x in G.vertex_attrs[i])
        lines.append(f"v {v} {vals}".rstrip())
    for k, (a, b) in enumerate(G.edges):
        if G.edge_attrs is not None and G.d_e > 0:
            vals = " ".join(_fmt_float(x) for x in G.edge_attrs[k])
            lines.append(f"e {a} {b} {vals}")
        else:
            lines.append(f"e {a} {b}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_graph(path) -> AttributedGraph:
    with open(path) as fh:
        raw = fh.read().splitlines()

    def fail(lineno, msg):
        raise GraphParseError(f"{path}:{lineno}: {msg}")

    header = None
    vattrs = {}
    edges = []
    eattrs = {}
    for lineno, line in enumerate(raw, start=1):
        toks = line.split()
        if not toks or toks[0].startswith("#"):
            continue
        kind = toks[0]
        if kind == "graph":
            if header is not None:
                fail(lineno, "duplicate header")
            if len(toks) != 5:
                fail(lineno, "header must be 'graph <nv> <ne> <d_v> <d_e>'")
            try:
                header = tuple(int(t) for t in toks[1:])
            except ValueError:
                fail(lineno, "non-integer header field")
        elif kind == "v":
            if header is None:
                fail(lineno, "vertex line before header")
            d_v = header[2]
            if len(toks) != 2 + d_v:
                fail(lineno, f"expected {d_v} vertex attribute(s), got {len(toks) - 2}")
            vid = _parse_id(toks[1])
            if vid in vattrs:
                fail(lineno, f"duplicate vertex id {vid!r}")
            try:
                vattrs[vid] = [float(t) for t in toks[2:]]
            except ValueError:
                fail(lineno, "non-numeric vertex attribute")
        elif kind == "e":
            if header is None:
                fail(lineno, "edge line before header")
            d_e = header[3]
            if len(toks) != 3 + d_e:
                fail(lineno, f"expected {d_e} edge attribute(s), got {len(toks) - 3}")
            a, b = _parse_id(toks[1]), _parse_id(toks[2])
            if a not in vattrs or b not in vattrs:
                fail(lineno, f"edge ({a!r}, {b!r}) references an unknown vertex")
            edges.append((a, b))
            if d_e > 0:
                try:
                    eattrs[(a, b)] = [float(t) for t in toks[3:]]
                except ValueError:
                    fail(lineno, "non-numeric edge attribute")
        else:
            fail(lineno, f"unknown record type {kind!r}")

    if header is None:
        raise GraphParseError(f"{path}: missing 'graph' header")
    nv, ne, d_v, d_e = header
    if len(vattrs) != nv:
        raise GraphParseError(f"{path}: header declares {nv} vertices, found {len(vattrs)}")
    if len(edges) != ne:
        raise GraphParseError(f"{path}: header declares {ne} edges, found {len(edges)}")
    if d_v == 0:
        raise GraphParseError(f"{path}: d_v must be >= 1")
    try:
        return AttributedGraph(vattrs, edges, eattrs if d_e > 0 else None)
    except GraphError as exc:
        raise GraphParseError(f"{path}: {exc}") from exc
