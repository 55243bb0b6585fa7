"""Match a noisy trace against a small synthetic road grid.

Run with ``python3 demos/match_a_trace.py``. The script builds an index,
answers one query, and compares the answer with the exact oracle.
"""

import time

import numpy as np

from mapmatch import build_index, curve_report, generate, min_curve_frechet, polyline_frechet

g = generate("perturbed-grid", {"rows": 6, "cols": 6, "perturbation": 0.25, "diagonals": 0.2}, seed=4)
print(f"road network: {g.num_vertices} intersections, {g.num_edges} road segments")

# A trace that drives roughly along the bottom row, then turns north.
rng = np.random.default_rng(0)
route = np.array([(0, 0), (3, 0), (3, 4), (5, 5)], dtype=float)
trace = route + rng.normal(0, 0.15, route.shape)

t0 = time.perf_counter()
idx = build_index(g, eps=0.25, seed=4)
print(f"index built in {time.perf_counter() - t0:.2f}s")

t0 = time.perf_counter()
res = curve_report(idx, trace)
print(f"matched distance {res.distance:.4f} in {time.perf_counter() - t0:.2f}s")
print("walk:", res.path)
print("distance of the reported walk to the trace:", round(polyline_frechet(g.embed(res.path), trace), 4))

exact = min_curve_frechet(g, trace)
print(f"exact optimum {exact.distance:.4f}; ratio {res.distance / exact.distance:.4f} (allowed up to 1.25)")
