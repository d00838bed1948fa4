"""
Matching attributed graphs against small filters
================================================

A convolution filter here is itself a tiny attributed graph.  Applying
it to a vertex means solving an assignment problem between the filter
and the vertex's neighborhood: every filter vertex grabs one distinct
graph vertex (or the null vertex), and the score is the sum of
attribute dot products over matched pairs.
"""

import numpy as np

import gmconv as gm

# the assignment engine underneath: a square cost matrix in, a
# row-to-column permutation and its cost out
C = np.array([[4.0, 1.0], [2.0, 3.0]])
row_to_col, cost = gm.solve_lsap(C)
print("cost matrix:")
print(C)
print(f"optimal assignment {row_to_col.tolist()} with cost {cost}")

# a three-vertex path whose middle vertex is bright
G = gm.AttributedGraph({0: [0.0], 1: [1.0], 2: [0.0]}, [(0, 1), (1, 2)])

# a two-vertex filter looking for a dark/bright pair
F = gm.FilterGraph({0: [-1.0], 1: [1.0]}, [])

M = gm.gms_no_edges(G, F)
print(f"\npath vs (-1, 1) filter: score {M.score}")
for v in G.vertex_ids:
    a = M.image(v)
    print(f"  graph vertex {v} -> {'eps' if a is None else f'filter {a}'}")

# brute force enumerates every feasible map; on vertex-only matching the
# fast path is exact, so the two agree to the last bit
B = gm.gms_brute_force(G, F)
print(f"brute force agrees: {B.score == M.score}")

# when the filter is larger than the graph, the surplus filter vertices
# match the null vertex and contribute nothing
F_big = gm.FilterGraph({a: [1.0] for a in range(5)}, [])
M_big = gm.gms_no_edges(G, F_big)
print(f"\n5-vertex filter on a 3-vertex graph: score {M_big.score} "
      f"(two filter vertices sit at eps)")

# with edge weights the problem becomes quadratic; the bipartite
# heuristic folds edge estimates into vertex costs and never beats the
# exact optimum
G2 = gm.AttributedGraph({0: [1.0], 1: [2.0], 2: [3.0]},
                        [(0, 1), (1, 2)],
                        {(0, 1): [1.0], (1, 2): [0.5]})
F2 = gm.FilterGraph({0: [1.0], 1: [1.0]}, [(0, 1)], {(0, 1): [1.0]})
bp = gm.gms_bp_edges(G2, F2)
exact = gm.gms_brute_force(G2, F2)
print(f"\nedge-aware: heuristic {bp.score} vs exact {exact.score} "
      f"(gap {exact.score - bp.score})")
