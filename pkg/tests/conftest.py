"""Shared oracles and builders used across the test modules.

The oracles are deliberately naive re-implementations (exhaustive
enumeration, direct formula evaluation) kept independent of the package
internals, so agreement is meaningful.
"""

import itertools

import numpy as np
import pytest

import gmconv as gm


def exhaustive_lsap(C):
    """Minimum assignment by enumerating all permutations.

    Returns (best_perm, best_value); among ties the lexicographically
    smallest row-to-column vector wins.  Value is summed in row order,
    like the solver under test.
    """
    C = np.asarray(C, dtype=np.float64)
    n = C.shape[0]
    best_perm = None
    best_value = None
    for perm in itertools.permutations(range(n)):
        value = 0.0
        for i in range(n):
            value += C[i, perm[i]]
        if best_value is None or value < best_value:
            best_value = value
            best_perm = perm
    return np.asarray(best_perm, dtype=np.int64), best_value


def exhaustive_gms(G, F, include_edges):
    """Best assignment score by enumerating all feasible vertex maps."""
    g_ids = G.vertex_ids
    f_ids = F.vertex_ids
    n, m = len(g_ids), len(f_ids)
    best = None
    if n >= m:
        # every filter vertex matched to a distinct graph vertex
        for chosen in itertools.permutations(range(n), m):
            vmap = {g_ids[p]: None for p in range(n)}
            for a, p in enumerate(chosen):
                vmap[g_ids[p]] = f_ids[a]
            s = gm.score_assignment(G, F, vmap, include_edges)
            if best is None or s > best:
                best = s
    else:
        # every graph vertex matched, m - n filter vertices at the null
        # vertex
        for chosen in itertools.permutations(range(m), n):
            vmap = {g_ids[p]: f_ids[a] for p, a in enumerate(chosen)}
            s = gm.score_assignment(G, F, vmap, include_edges)
            if best is None or s > best:
                best = s
    return best


def all_partitions(items):
    """Every partition of a list (Bell-number many)."""
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for smaller in all_partitions(rest):
        for k in range(len(smaller)):
            yield smaller[:k] + [[first] + smaller[k]] + smaller[k + 1:]
        yield [[first]] + smaller


def modularity_reference(n_vertices, edges, weights, community):
    """Direct Q = sum_ij (A_ij - k_i k_j / 2W) delta(c_i, c_j) / 2W."""
    A = np.zeros((n_vertices, n_vertices))
    for (a, b), w in zip(edges, weights):
        A[a, b] += w
        A[b, a] += w
    k = A.sum(axis=1)
    two_w = A.sum()
    if two_w == 0:
        return 0.0
    Q = 0.0
    for i in range(n_vertices):
        for j in range(n_vertices):
            if community[i] == community[j]:
                Q += A[i, j] - k[i] * k[j] / two_w
    return Q / two_w


def random_attributed_graph(rng, n, d_v, d_e=None, p_edge=0.4):
    """Connected-ish random graph: path backbone plus random extras."""
    vattrs = {i: rng.uniform(-1.0, 1.0, size=d_v) for i in range(n)}
    edges = [(i, i + 1) for i in range(n - 1)]
    for a in range(n):
        for b in range(a + 2, n):
            if rng.random() < p_edge:
                edges.append((a, b))
    eattrs = None
    if d_e:
        eattrs = {e: rng.uniform(-1.0, 1.0, size=d_e) for e in edges}
    return gm.AttributedGraph(vattrs, edges, eattrs)


def random_filter(rng, m, d_v, d_e=None, p_edge=0.5):
    fedges = [(a, b) for a in range(m) for b in range(a + 1, m)
              if rng.random() < p_edge]
    eweights = None
    if d_e and fedges:
        eweights = {e: rng.uniform(-1.0, 1.0, size=d_e) for e in fedges}
    elif not d_e:
        fedges = []
    return gm.FilterGraph({a: rng.uniform(-1.0, 1.0, size=d_v)
                           for a in range(m)}, fedges, eweights)


@pytest.fixture
def path_graph():
    """The three-vertex path with attributes (0), (1), (0)."""
    return gm.AttributedGraph({0: [0.0], 1: [1.0], 2: [0.0]},
                              [(0, 1), (1, 2)])


@pytest.fixture
def step_filter():
    """Two-vertex filter with weights (-1), (1) and no edges."""
    return gm.FilterGraph({0: [-1.0], 1: [1.0]}, [])
