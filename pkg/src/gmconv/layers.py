"""Network layers: graph convolution (vertex-only and edge-aware), Louvain
pooling, global average pooling, ReLU, dense, and the classification loss.

The convolution layer treats each vertex's l-hop neighborhood as a small
graph and scores it against every filter graph with the matching solvers;
the scores become the new vertex attributes (one component per filter).
The vertex-only model runs through a compiled batch kernel; the edge-aware
model runs through the bipartite approximation per neighborhood and
additionally produces edge attributes aggregated over the neighborhoods
containing each edge.

Every forward pass returns a tape holding the chosen assignments.  The
backward passes treat those assignments as constants, so all gradients are
plain linear accumulations read off the tape.
"""

from __future__ import annotations

import numpy as np

from . import pooling
from ._lsap import _conv_backward_batch, _conv_scores_batch
from .graphs import AttributedGraph, FilterGraph, GraphError
from .matching import edge_similarity, gms_bp_edges

__all__ = [
    "LayerError",
    "ConvLayer",
    "ConvTape",
    "ConvGradients",
    "conv_forward",
    "conv_backward",
    "PoolPartition",
    "louvain_pool",
    "pool_backward",
    "global_avg_pool",
    "global_avg_pool_backward",
    "relu_forward",
    "relu_backward",
    "DenseLayer",
    "dense_forward",
    "dense_backward",
    "softmax_cross_entropy",
    "init_uniform",
]

THETA_MODES = ("max", "avg")


class LayerError(ValueError):
    """Dimension mismatch, stale tape, or invalid layer configuration."""


def init_uniform(shape, fan_in, fan_out, rng):
    """Uniform init in [-b, b] with b = sqrt(6 / (fan_in + fan_out))."""
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def _hood_csr(G, hops):
    """Ragged neighborhood index (ptr, members) cached on the topology."""
    key = ("csr", hops)
    cached = G._hood_cache.get(key)
    if cached is None:
        idx = G._hood_index(hops)
        n = G.n_vertices
        ptr = np.zeros(n + 1, dtype=np.int64)
        for i in range(n):
            ptr[i + 1] = ptr[i] + len(idx[i][0])
        members = np.concatenate([idx[i][0] for i in range(n)]) if n else \
            np.zeros(0, dtype=np.int64)
        cached = (ptr, np.ascontiguousarray(members, dtype=np.int64))
        G._hood_cache[key] = cached
    return cached


class ConvGradients:
    """Gradient bundle of one convolution backward pass."""

    __slots__ = ("d_vertex_weights", "d_edge_weights",
                 "d_input_vertex_attrs", "d_input_edge_attrs")

    def __init__(self, d_vertex_weights, d_edge_weights,
                 d_input_vertex_attrs, d_input_edge_attrs):
        self.d_vertex_weights = d_vertex_weights
        self.d_edge_weights = d_edge_weights
        self.d_input_vertex_attrs = d_input_vertex_attrs
        self.d_input_edge_attrs = d_input_edge_attrs


class ConvTape:
    """Forward record of a convolution: which input vertex each filter
    vertex matched (-1 for ε) and, in the edge-aware model, the per-root
    edge maps and the aggregation choices per output edge."""

    __slots__ = ("graph", "hops", "n_filters", "vassign", "edge_maps",
                 "zeta_members")

    def __init__(self, graph, hops, n_filters, vassign,
                 edge_maps=None, zeta_members=None):
        self.graph = graph
        self.hops = hops
        self.n_filters = n_filters
        self.vassign = vassign
        self.edge_maps = edge_maps
        self.zeta_members = zeta_members


class ConvLayer:
    """A set of filter graphs sharing one topology, applied by matching.

    ``vertex_weights`` has shape (n_filters, filter_vertices, d_v) and
    ``edge_weights`` shape (n_filters, filter_edges, d_e) or None.  Output
    vertex attributes stack the per-filter matching scores; with
    ``edge_matching`` the output also carries per-edge scores aggregated
    by ``theta`` over the neighborhoods containing the edge.
    """

    def __init__(self, vertex_weights, filter_edges=(), edge_weights=None,
                 hops=1, theta="max", edge_matching=False):
        W = np.ascontiguousarray(vertex_weights, dtype=np.float64)
        if W.ndim != 3 or W.shape[0] < 1 or W.shape[1] < 1:
            raise LayerError("vertex weights must have shape "
                             "(n_filters, filter_vertices, d_v)")
        if hops < 1:
            raise LayerError(f"hops must be >= 1, got {hops}")
        if theta not in THETA_MODES:
            raise LayerError(f"theta must be one of {THETA_MODES}, got {theta!r}")
        self.vertex_weights = W
        self.hops = int(hops)
        self.theta = theta
        self.edge_matching = bool(edge_matching)
        m = W.shape[1]
        edges = []
        seen = set()
        for (a, b) in filter_edges:
            if not (0 <= a < m and 0 <= b < m) or a == b:
                raise LayerError(f"invalid filter edge ({a}, {b})")
            e = (a, b) if a < b else (b, a)
            if e in seen:
                raise LayerError(f"duplicate filter edge {e}")
            seen.add(e)
            edges.append(e)
        edges.sort()
        self.filter_edges = tuple(edges)
        if edge_weights is None:
            if self.filter_edges:
                raise LayerError("filter edges given without edge weights")
            self.edge_weights = None
        else:
            We = np.ascontiguousarray(edge_weights, dtype=np.float64)
            if We.ndim != 3 or We.shape[0] != W.shape[0] or \
                    We.shape[1] != len(self.filter_edges):
                raise LayerError("edge weights must have shape "
                                 "(n_filters, filter_edges, d_e)")
            self.edge_weights = We

    @classmethod
    def init(cls, n_filters, filter_vertices, d_v, *, filter_edges=(),
             d_e=0, hops=1, theta="max", edge_matching=False, rng=None):
        """Randomly initialized layer; fan counts are the number of weight
        vectors per filter (in) and the number of filters (out)."""
        rng = np.random.default_rng() if rng is None else rng
        fan_in = filter_vertices + len(filter_edges)
        W = init_uniform((n_filters, filter_vertices, d_v),
                         fan_in, n_filters, rng)
        We = None
        if filter_edges:
            We = init_uniform((n_filters, len(filter_edges), d_e),
                              fan_in, n_filters, rng)
        return cls(W, filter_edges, We, hops=hops, theta=theta,
                   edge_matching=edge_matching)

    @property
    def n_filters(self):
        return self.vertex_weights.shape[0]

    @property
    def filter_vertices(self):
        return self.vertex_weights.shape[1]

    @property
    def d_v(self):
        return self.vertex_weights.shape[2]

    @property
    def d_e(self):
        return 0 if self.edge_weights is None else self.edge_weights.shape[2]

    @property
    def filters(self):
        """The filters as FilterGraph values (rebuilt from the weights)."""
        out = []
        for p in range(self.n_filters):
            vw = {a: self.vertex_weights[p, a]
                  for a in range(self.filter_vertices)}
            ew = None
            if self.edge_weights is not None:
                ew = {e: self.edge_weights[p, q]
                      for q, e in enumerate(self.filter_edges)}
            out.append(FilterGraph(vw, self.filter_edges, ew))
        return out

    def parameters(self):
        params = [("vertex_weights", self.vertex_weights)]
        if self.edge_weights is not None:
            params.append(("edge_weights", self.edge_weights))
        return params

    # -- forward -------------------------------------------------------

    def forward(self, G: AttributedGraph):
        if G.d_v != self.d_v:
            raise LayerError(
                f"input d_v={G.d_v} does not match filter d_v={self.d_v}")
        if self.edge_matching:
            return self._forward_edges(G)
        ptr, members = _hood_csr(G, self.hops)
        X = G.vertex_attrs
        out, vassign = _conv_scores_batch(ptr, members, X, self.vertex_weights)
        G_out = G.with_attrs(out, None)
        tape = ConvTape(G, self.hops, self.n_filters, vassign)
        return G_out, tape

    def _forward_edges(self, G: AttributedGraph):
        if self.edge_weights is not None and G.d_e != self.d_e:
            raise LayerError(
                f"input d_e={G.d_e} does not match filter d_e={self.d_e}")
        n = G.n_vertices
        nf = self.n_filters
        m = self.filter_vertices
        hoods = G.neighborhoods(self.hops)
        filters = self.filters
        mu_out = np.empty((n, nf))
        vassign = np.full((n, nf, m), -1, dtype=np.int64)
        edge_maps = {}
        for i in range(n):
            hood = hoods[i]
            pe = hood.parent_edge_idx
            hg = hood.graph
            for p in range(nf):
                M = gms_bp_edges(hg, filters[p])
                mu_out[i, p] = M.score
                for a_idx, a in enumerate(filters[p].vertex_ids):
                    pre = M.preimage(a)
                    if pre is not None:
                        vassign[i, p, a_idx] = G.position(pre)
                emap = {}
                em = M.edge_map()
                for local_k, e in enumerate(hg.edges):
                    q_edge = em[e]
                    if q_edge is not None:
                        emap[int(pe[local_k])] = self.filter_edges.index(q_edge)
                edge_maps[(i, p)] = emap

        zeta_members = None
        zeta_out = None
        if G.n_edges > 0:
            cover = G.edge_cover_roots(self.hops)
            zeta_out = np.zeros((G.n_edges, nf))
            zeta_members = []
            for k in range(G.n_edges):
                per_filter = []
                for p in range(nf):
                    entries = []
                    for r in cover[k]:
                        q = edge_maps[(r, p)].get(k, -1)
                        if q >= 0:
                            s = edge_similarity(G.edge_attrs[k],
                                                self.edge_weights[p, q])
                        else:
                            s = 0.0
                        entries.append((r, q, s))
                    if self.theta == "max":
                        best = 0
                        for t in range(1, len(entries)):
                            if entries[t][2] > entries[best][2]:
                                best = t
                        zeta_out[k, p] = entries[best][2]
                        per_filter.append([entries[best]])
                    else:
                        acc = 0.0
                        for (_, _, s) in entries:
                            acc += s
                        zeta_out[k, p] = acc / len(entries)
                        per_filter.append(entries)
                zeta_members.append(per_filter)
        G_out = G.with_attrs(mu_out, zeta_out)
        tape = ConvTape(G, self.hops, nf, vassign, edge_maps, zeta_members)
        return G_out, tape

    # -- backward ------------------------------------------------------

    def backward(self, tape: ConvTape, d_mu, d_zeta=None):
        G = tape.graph
        n = G.n_vertices
        d_mu = np.ascontiguousarray(d_mu, dtype=np.float64)
        if tape.n_filters != self.n_filters or \
                tape.vassign.shape != (n, self.n_filters, self.filter_vertices):
            raise LayerError("tape does not belong to this layer")
        if d_mu.shape != (n, self.n_filters):
            raise LayerError(
                f"upstream vertex gradient shape {d_mu.shape} does not match "
                f"({n}, {self.n_filters})")
        if not self.edge_matching:
            if d_zeta is not None:
                raise LayerError("vertex-only layer produced no edge attrs")
            dX, dW = _conv_backward_batch(G.vertex_attrs, self.vertex_weights,
                                          tape.vassign, d_mu)
            return ConvGradients(dW, None, dX, None)
        return self._backward_edges(tape, d_mu, d_zeta)

    def _backward_edges(self, tape, d_mu, d_zeta):
        G = tape.graph
        n = G.n_vertices
        nf = self.n_filters
        m = self.filter_vertices
        X = G.vertex_attrs
        E = G.edge_attrs
        dWv = np.zeros_like(self.vertex_weights)
        dWe = None if self.edge_weights is None else \
            np.zeros_like(self.edge_weights)
        dX = np.zeros_like(X)
        dE = None if E is None else np.zeros_like(E)
        if d_zeta is not None:
            d_zeta = np.ascontiguousarray(d_zeta, dtype=np.float64)
            if d_zeta.shape != (G.n_edges, nf):
                raise LayerError(
                    f"upstream edge gradient shape {d_zeta.shape} does not "
                    f"match ({G.n_edges}, {nf})")

        for i in range(n):
            for p in range(nf):
                go = d_mu[i, p]
                if go == 0.0:
                    continue
                for a in range(m):
                    pp = tape.vassign[i, p, a]
                    if pp >= 0:
                        dWv[p, a] += go * X[pp]
                        dX[pp] += go * self.vertex_weights[p, a]
                for k, q in tape.edge_maps[(i, p)].items():
                    dWe[p, q] += go * E[k]
                    dE[k] += go * self.edge_weights[p, q]

        if d_zeta is not None and tape.zeta_members is not None:
            for k in range(G.n_edges):
                for p in range(nf):
                    gz = d_zeta[k, p]
                    if gz == 0.0:
                        continue
                    entries = tape.zeta_members[k][p]
                    scale = gz if self.theta == "max" else gz / len(entries)
                    for (_, q, _) in entries:
                        if q >= 0:
                            dWe[p, q] += scale * E[k]
                            dE[k] += scale * self.edge_weights[p, q]
        return ConvGradients(dWv, dWe, dX, dE)


def conv_forward(G: AttributedGraph, layer: ConvLayer):
    """Convolve a graph with a layer's filters; returns (G_out, tape)."""
    return layer.forward(G)


def conv_backward(layer: ConvLayer, tape: ConvTape, d_mu, d_zeta=None):
    """Backward pass of a convolution given its tape and the upstream
    gradients for the output vertex (and optionally edge) attributes."""
    return layer.backward(tape, d_mu, d_zeta)


# -- Louvain pooling ---------------------------------------------------

POOL_WEIGHT_FLOOR = 1e-6


class PoolPartition:
    """Partition produced by louvain_pool plus the argmax routing needed
    by the backward pass."""

    __slots__ = ("graph", "communities", "members", "argmax_pos", "n_communities")

    def __init__(self, graph, communities, members, argmax_pos):
        self.graph = graph
        self.communities = communities
        self.members = members
        self.argmax_pos = argmax_pos
        self.n_communities = len(members)


def louvain_pool(G: AttributedGraph, target=None):
    """Coarsen a graph by Louvain communities on attribute-product edge
    weights.

    Edge weights are max(mu(i).mu(j), 1e-6); the first-level Louvain
    partition defines the communities.  Each community becomes one coarse
    vertex carrying the element-wise maximum of its members' attributes;
    coarse edges link communities joined by at least one original edge and
    carry no attributes.  ``target`` (approximate community size) is
    advisory and recorded by callers only.

    Returns (G_coarse, PoolPartition).
    """
    n = G.n_vertices
    if n == 0:
        raise GraphError("cannot pool an empty graph")
    X = G.vertex_attrs
    edges_pos = [(G.position(a), G.position(b)) for (a, b) in G.edges]
    weights = np.empty(len(edges_pos))
    for k, (i, j) in enumerate(edges_pos):
        weights[k] = max(float(np.dot(X[i], X[j])), POOL_WEIGHT_FLOOR)
    levels = pooling.louvain_levels(n, edges_pos, weights)
    part = levels[0][0]

    n_comm = int(part.max()) + 1
    members = [[] for _ in range(n_comm)]
    for v in range(n):
        members[part[v]].append(v)

    d = G.d_v
    coarse_attrs = np.empty((n_comm, d))
    argmax_pos = np.empty((n_comm, d), dtype=np.int64)
    for c in range(n_comm):
        rows = X[members[c]]
        best = np.argmax(rows, axis=0)
        coarse_attrs[c] = rows[best, np.arange(d)]
        argmax_pos[c] = np.asarray(members[c], dtype=np.int64)[best]

    coarse_edges = set()
    for (i, j) in edges_pos:
        ci, cj = int(part[i]), int(part[j])
        if ci != cj:
            coarse_edges.add((ci, cj) if ci < cj else (cj, ci))
    vattrs = {c: coarse_attrs[c] for c in range(n_comm)}
    G_coarse = AttributedGraph(vattrs, sorted(coarse_edges), None)

    communities = {G.vertex_ids[v]: int(part[v]) for v in range(n)}
    return G_coarse, PoolPartition(G, communities, members, argmax_pos)


def pool_backward(partition: PoolPartition, upstream):
    """Route each upstream component to the member whose attribute won the
    element-wise max (lowest position on ties); all other members get 0."""
    upstream = np.ascontiguousarray(upstream, dtype=np.float64)
    n_comm, d = partition.argmax_pos.shape
    if upstream.shape != (n_comm, d):
        raise LayerError(
            f"upstream shape {upstream.shape} does not match partition "
            f"({n_comm}, {d})")
    dX = np.zeros_like(partition.graph.vertex_attrs)
    for c in range(n_comm):
        for comp in range(d):
            dX[partition.argmax_pos[c, comp], comp] += upstream[c, comp]
    return dX


# -- global pooling, activation, dense, loss ---------------------------


def global_avg_pool(G: AttributedGraph):
    """Component-wise mean of all vertex attributes.

    Per component the values are sorted before summing, so the result
    depends only on the multiset of attributes, not on vertex order;
    relabeled graphs pool to bit-identical vectors.
    """
    X = G.vertex_attrs
    n, d = X.shape
    out = np.empty(d)
    for c in range(d):
        col = np.sort(X[:, c])
        acc = 0.0
        for v in range(n):
            acc += col[v]
        out[c] = acc / n
    return out


def global_avg_pool_backward(G: AttributedGraph, upstream):
    upstream = np.asarray(upstream, dtype=np.float64)
    n, d = G.vertex_attrs.shape
    if upstream.shape != (d,):
        raise LayerError(f"upstream shape {upstream.shape} does not match ({d},)")
    return np.tile(upstream / n, (n, 1))


def relu_forward(x):
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0), x


def relu_backward(tape_x, upstream):
    return np.asarray(upstream, dtype=np.float64) * (tape_x > 0.0)


class DenseLayer:
    """Affine map logits = W x + b."""

    def __init__(self, weights, bias):
        self.weights = np.ascontiguousarray(weights, dtype=np.float64)
        self.bias = np.ascontiguousarray(bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise LayerError("dense weights must be (out, in) with bias (out,)")

    @classmethod
    def init(cls, in_dim, out_dim, rng=None):
        rng = np.random.default_rng() if rng is None else rng
        W = init_uniform((out_dim, in_dim), in_dim, out_dim, rng)
        return cls(W, np.zeros(out_dim))

    def parameters(self):
        return [("weights", self.weights), ("bias", self.bias)]

    def forward(self, x):
        return dense_forward(x, self.weights, self.bias)

    def backward(self, x, upstream):
        return dense_backward(x, self.weights, upstream)


def dense_forward(x, weights, bias):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (weights.shape[1],):
        raise LayerError(
            f"input shape {x.shape} does not match dense in-dim {weights.shape[1]}")
    return weights @ x + bias


def dense_backward(x, weights, upstream):
    """Returns (d_weights, d_bias, d_input)."""
    upstream = np.asarray(upstream, dtype=np.float64)
    dW = np.outer(upstream, x)
    db = upstream.copy()
    dx = weights.T @ upstream
    return dW, db, dx


def softmax_cross_entropy(logits, label):
    """Categorical cross-entropy after softmax; returns (loss, d_logits).
    Stabilized by subtracting the max logit, so the loss is always finite.
    """
    z = np.asarray(logits, dtype=np.float64)
    if not (0 <= label < z.shape[0]):
        raise LayerError(f"label {label} out of range for {z.shape[0]} classes")
    shifted = z - np.max(z)
    log_norm = np.log(np.sum(np.exp(shifted)))
    log_probs = shifted - log_norm
    loss = -log_probs[label]
    grad = np.exp(log_probs)
    grad[label] -= 1.0
    return loss, grad
