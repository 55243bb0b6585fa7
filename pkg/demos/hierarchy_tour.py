"""Look inside the separator hierarchy.

The index answers straight-line queries by checking a handful of
separator vertices on the path from two leaves to the root. This script
prints how many are examined as the network grows.
"""

import math

import numpy as np

from mapmatch import build_hierarchy, generate, lanky_check, min_segment_frechet, straight_query

for side in (6, 10, 16):
    g = generate("perturbed-grid", {"rows": side, "cols": side, "perturbation": 0.3}, seed=side)
    tree = build_hierarchy(g, max(1, lanky_check(g)), seed=side, eager=False)
    rng = np.random.default_rng(side)
    examined = []
    for _ in range(100):
        u, v = (int(x) for x in rng.integers(g.num_vertices, size=2))
        straight_query(tree, u, v)
        examined.append(tree.last_examined)
    print(f"n={g.n:4d}  depth={tree.depth():2d}  mean transits examined={np.mean(examined):6.1f}"
          f"  sqrt(n)={math.sqrt(g.n):5.1f}")

# The straight-line answer is within a factor 3 of the exact one.
g = generate("theta-graph", {"n": 25, "cones": 8}, seed=3)
tree = build_hierarchy(g, seed=3)
u, v = 0, g.num_vertices - 1
approx = straight_query(tree, u, v)
exact = min_segment_frechet(g, u, v, (g.points[u], g.points[v])).distance
print(f"straight query {approx:.4f} vs exact {exact:.4f}")
