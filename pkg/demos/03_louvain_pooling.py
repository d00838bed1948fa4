"""
Pooling a graph by community detection
======================================

Grid graphs have no fixed stride to pool over, so downsampling is done
by grouping vertices into communities of maximal modularity and
contracting each community to a single vertex.  Edge weights come from
the scalar products of the incident activations, so strongly
co-activated regions merge first.
"""

import numpy as np

import gmconv as gm
from gmconv.pooling import louvain_levels

# two 4-cliques joined by a single bridge edge: the textbook case with
# an unambiguous best split
clique = lambda off: [(off + a, off + b)
                      for a in range(4) for b in range(a + 1, 4)]
edges = clique(0) + clique(4) + [(3, 4)]

levels = louvain_levels(8, edges, [1.0] * len(edges))
for i, (partition, q) in enumerate(levels):
    print(f"pass {i}: modularity {q:.4f}, partition {partition}")

# the same graph with unit attributes, contracted through the pooling
# layer used inside the network
G = gm.AttributedGraph({v: [1.0] for v in range(8)}, edges)
coarse, part = gm.louvain_pool(G)
print(f"\npooled: {G.n_vertices} -> {coarse.n_vertices} vertices, "
      f"coarse edges {coarse.edges}")

groups = {}
for v, c in part.communities.items():
    groups.setdefault(c, []).append(v)
print(f"communities: {sorted(groups.values())}")

# pooled attributes are the element-wise max over each community, and
# the backward pass routes gradient to exactly that argmax member
upstream = np.ones((coarse.n_vertices, 1))
down = gm.pool_backward(part, upstream)
print(f"gradient mass per original vertex: {down[:, 0].tolist()}")
