"""Louvain community detection on weighted undirected graphs.

Used by the pooling layer to decide which vertices collapse into one
coarse vertex.  The implementation is the standard two-phase scheme:
local moving (greedy modularity gains, sweeps until stable) followed by
community aggregation, repeated until no vertex moves.  Vertices are
always visited in ascending order and ties resolve to the smallest
community id, so the outcome is deterministic.

``louvain_levels`` reports the partition and the modularity after every
pass at the granularity of the original vertices; modularity never
decreases from one pass to the next because every accepted move has a
strictly positive gain.
"""

from __future__ import annotations

import numpy as np

__all__ = ["modularity", "louvain_levels"]


def modularity(n_vertices, edges, weights, community) -> float:
    """Weighted modularity of a partition.

    ``edges`` holds vertex-position pairs (no self-loops), ``weights`` one
    nonnegative weight per edge, ``community`` one community id per
    vertex.  Graphs without edges have modularity 0 by convention.
    """
    weights = np.asarray(weights, dtype=np.float64)
    total2 = 2.0 * float(np.sum(weights))
    if total2 <= 0.0:
        return 0.0
    deg = np.zeros(n_vertices)
    internal = {}
    tot = {}
    for k in range(len(edges)):
        i, j = edges[k]
        w = weights[k]
        deg[i] += w
        deg[j] += w
        if community[i] == community[j]:
            internal[community[i]] = internal.get(community[i], 0.0) + w
    for v in range(n_vertices):
        tot[community[v]] = tot.get(community[v], 0.0) + deg[v]
    q = 0.0
    for c in tot:
        q += 2.0 * internal.get(c, 0.0) / total2 - (tot[c] / total2) ** 2
    return q


def _local_moving(n, adj, self_w, min_gain):
    """One local-moving phase; returns (community array, any_move)."""
    k = np.empty(n)
    for u in range(n):
        s = 2.0 * self_w[u]
        for w in adj[u].values():
            s += w
        k[u] = s
    m2 = float(np.sum(k))
    comm = np.arange(n)
    if m2 <= 0.0:
        return comm, False
    tot = k.copy()
    moved_any = False
    improved = True
    while improved:
        improved = False
        for u in range(n):
            b = comm[u]
            ku = k[u]
            links = {}
            for v, w in adj[u].items():
                c = comm[v]
                links[c] = links.get(c, 0.0) + w
            tot[b] -= ku
            best_c = b
            best_gain = links.get(b, 0.0) - tot[b] * ku / m2
            for c in sorted(links):
                if c == b:
                    continue
                gain = links[c] - tot[c] * ku / m2
                if gain > best_gain + min_gain:
                    best_gain = gain
                    best_c = c
            tot[best_c] += ku
            if best_c != b:
                comm[u] = best_c
                improved = True
                moved_any = True
    return comm, moved_any


def _renumber(comm):
    """Map community ids to 0..K-1 in order of first (smallest) member."""
    mapping = {}
    out = np.empty_like(comm)
    for u in range(len(comm)):
        c = comm[u]
        if c not in mapping:
            mapping[c] = len(mapping)
        out[u] = mapping[c]
    return out, len(mapping)


def louvain_levels(n_vertices, edges, weights, min_gain=1e-12):
    """Full multi-level Louvain run.

    Returns a list of (community array over the original vertices,
    modularity) with one entry per pass; the first entry is the
    first-level partition the pooling layer consumes.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if np.any(weights < 0.0):
        raise ValueError("Louvain requires nonnegative edge weights")
    adj = [dict() for _ in range(n_vertices)]
    self_w = np.zeros(n_vertices)
    for kk in range(len(edges)):
        i, j = edges[kk]
        w = float(weights[kk])
        adj[i][j] = adj[i].get(j, 0.0) + w
        adj[j][i] = adj[j].get(i, 0.0) + w

    node_map = np.arange(n_vertices)
    cur_n = n_vertices
    levels = []
    while True:
        comm, moved = _local_moving(cur_n, adj, self_w, min_gain)
        comm, n_comm = _renumber(comm)
        part = comm[node_map]
        levels.append((part, modularity(n_vertices, edges, weights, part)))
        if not moved or n_comm == cur_n:
            break
        new_adj = [dict() for _ in range(n_comm)]
        new_self = np.zeros(n_comm)
        for u in range(cur_n):
            cu = comm[u]
            new_self[cu] += self_w[u]
            for v, w in adj[u].items():
                cv = comm[v]
                if cu == cv:
                    if u < v:
                        new_self[cu] += w
                else:
                    new_adj[cu][cv] = new_adj[cu].get(cv, 0.0) + w
        adj = new_adj
        self_w = new_self
        node_map = comm[node_map]
        cur_n = n_comm
    return levels
