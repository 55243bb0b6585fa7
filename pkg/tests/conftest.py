import math

import numpy as np
import pytest

from mapmatch.geom import polyline_frechet
from mapmatch.graph import GeometricGraph, generate


def path_graph(points):
    return GeometricGraph(np.asarray(points, dtype=float), [(i, i + 1) for i in range(len(points) - 1)])


@pytest.fixture
def detour():
    # u=(0,0), w=(1,1), v=(2,0); the middle vertex sits at distance 1 from uv
    return path_graph([(0, 0), (1, 1), (2, 0)])


def small_graph(seed: int, n_max: int = 40) -> GeometricGraph:
    """Perturbed grid or theta graph with |V| + |E| <= n_max."""
    rng = np.random.default_rng(seed)
    for _ in range(50):
        if seed % 2:
            g = generate("perturbed-grid", {"rows": int(rng.integers(2, 4)), "cols": int(rng.integers(3, 5)),
                                            "perturbation": 0.3, "diagonals": 0.25}, seed=seed)
        else:
            g = generate("theta-graph", {"n": int(rng.integers(5, 13)), "cones": 6}, seed=seed)
        if g.n <= n_max:
            return g
        seed += 1000
    raise AssertionError("could not draw a small graph")


def resample(curve, step: float) -> np.ndarray:
    curve = np.asarray(curve, dtype=float)
    out = [curve[0]]
    for a, b in zip(curve, curve[1:]):
        k = max(1, int(math.ceil(np.hypot(*(b - a)) / step)))
        out.extend(a + (b - a) * (i / k) for i in range(1, k + 1))
    return np.array(out)


def discrete_frechet(a, b) -> float:
    """Textbook coupling-distance dynamic program on vertex sequences."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    d = np.hypot(*(a[:, None, :] - b[None, :, :]).transpose(2, 0, 1))
    ca = np.full(d.shape, math.inf)
    for i in range(len(a)):
        for j in range(len(b)):
            if i == 0 and j == 0:
                prev = 0.0
            else:
                prev = min(ca[i - 1, j] if i else math.inf, ca[i, j - 1] if j else math.inf,
                           ca[i - 1, j - 1] if i and j else math.inf)
            ca[i, j] = max(prev, d[i, j])
    return float(ca[-1, -1])


def walks(g: GeometricGraph, start: int, max_edges: int):
    """Every walk from ``start`` with at most ``max_edges`` edges."""
    stack = [[start]]
    while stack:
        w = stack.pop()
        yield w
        if len(w) - 1 < max_edges:
            for nb, _ in g.adj[w[-1]]:
                stack.append(w + [nb])


def enum_min_curve(g: GeometricGraph, Q, max_edges: int):
    best, arg = math.inf, None
    for s in range(g.num_vertices):
        for w in walks(g, s, max_edges):
            d = polyline_frechet(g.embed(w), Q)
            if d < best:
                best, arg = d, w
    return best, arg


def enum_min_segment(g: GeometricGraph, u: int, v: int, pq, max_edges: int) -> float:
    best = math.inf
    for w in walks(g, u, max_edges):
        if w[-1] == v:
            best = min(best, polyline_frechet(g.embed(w), np.array(pq, float)))
    return best


def diameter(g: GeometricGraph, Q=None) -> float:
    pts = g.coords if Q is None else np.concatenate([g.coords, np.asarray(Q, float)])
    return float(np.hypot(*(pts.max(0) - pts.min(0))))


def random_curve(g: GeometricGraph, rng, m: int, noise: float = 0.15) -> np.ndarray:
    if rng.random() < 0.6:
        w = [int(rng.integers(g.num_vertices))]
        for _ in range(m - 1):
            nb = g.adj[w[-1]]
            w.append(nb[int(rng.integers(len(nb)))][0] if nb else w[-1])
        return g.coords[w] + rng.normal(0, noise, (m, 2))
    lo, hi = g.coords.min(0), g.coords.max(0)
    return rng.uniform(lo, hi, (m, 2))


__all__ = ["path_graph", "small_graph", "resample", "discrete_frechet", "walks", "enum_min_curve",
           "enum_min_segment", "diameter", "random_curve"]
