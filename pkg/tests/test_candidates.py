import math

import numpy as np
import pytest

from conftest import path_graph
from mapmatch.candidates import (
    PointIndex,
    Square,
    build_trough_index,
    edge_point_distance,
    gonzalez_sequence,
    in_trough,
    long_edges_near,
    point_candidates,
    vertex_candidates,
)
from mapmatch.graph import EdgePoint, GeometricGraph, dijkstra, generate


def _graph(trial):
    if trial % 2:
        return generate("theta-graph", {"n": 20, "cones": 6}, seed=trial)
    return generate("perturbed-grid", {"rows": 4, "cols": 5, "perturbation": 0.3, "diagonals": 0.3}, seed=trial)


def test_gonzalez_examples():
    one = GeometricGraph(np.array([[2.0, 3.0]]), [])
    s = gonzalez_sequence(one)
    assert s.centers == [0] and s.radii == [0.0]
    abc = path_graph([(0, 0), (1, 0), (2, 0)])
    s = gonzalez_sequence(abc, start=1)
    assert s.centers[0] == 1 and s.radii == [1.0, 1.0, 0.0]


@pytest.mark.parametrize("trial", range(10))
def test_gonzalez_definition(trial):
    g = _graph(trial)
    s = gonzalez_sequence(g, seed=trial)
    D = np.array([dijkstra(g, v) for v in range(g.num_vertices)])
    assert sorted(s.centers) == list(range(g.num_vertices))
    assert all(a >= b for a, b in zip(s.radii, s.radii[1:])) and s.radii[-1] == 0
    for i in range(1, len(s) + 1):
        assert s.radii[i - 1] == pytest.approx(D[:, s.centers[:i]].min(1).max(), abs=1e-12)
    # prefix separation
    eps_r = s.radii[len(s) // 3]
    i = s.prefix_for(eps_r)
    pre = s.centers[:i]
    for a in range(len(pre)):
        for b in range(a):
            assert D[pre[a], pre[b]] >= eps_r - 1e-12


def test_point_index_matches_scan():
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 10, (200, 2))
    rank = list(rng.permutation(200) + 1)
    idx = PointIndex(pts, rank)
    for _ in range(50):
        sq = Square(tuple(rng.uniform(0, 10, 2)), float(rng.uniform(0.5, 3)))
        k = int(rng.integers(1, 201))
        want = sorted(i for i in range(200) if sq.contains(pts[i]) and rank[i] <= k)
        assert idx.query(sq, k) == want


def test_vertex_candidates_trivial_branches():
    g = _graph(2)
    s = gonzalez_sequence(g)
    idx = PointIndex(g.coords, s.index)
    huge = Square(tuple(g.coords.mean(0)), 1e3)
    assert vertex_candidates(s, idx, huge, 0.5) == [s.centers[0]]
    far = Square((1e4, 1e4), 0.5)
    assert vertex_candidates(s, idx, far, 0.5) == []


def test_trough_examples():
    empty = GeometricGraph(np.zeros((0, 2)), [])
    assert build_trough_index(empty, 0.5).stab(0, 0, 1) == []
    assert in_trough((0, 0), (1, 0), 0.5, 0.5, 2, 1)
    assert not in_trough((0, 0), (1, 0), 0.5, 0.5, 0, 5)
    g = path_graph([(0, 0), (1, 0)])
    tr = build_trough_index(g, 0.5)
    assert tr.stab(0.5, 2, 1) == [0] and tr.stab(0.5, 0, 5) == []


def test_long_edges_trivial_cases():
    g = path_graph([(0, 0), (0.1, 0), (0.2, 0)])
    assert long_edges_near(build_trough_index(g, 0.25), Square((0.1, 0), 5.0)) == []
    h = path_graph([(-50, 0), (50, 0)])
    assert long_edges_near(build_trough_index(h, 0.25), Square((0, 0.5), 1.0)) == [0]


def test_point_candidates_trivial_cases():
    g = path_graph([(0, 0), (0.05, 0)])
    s = gonzalez_sequence(g)
    cs = point_candidates(g, s, PointIndex(g.coords, s.index), build_trough_index(g, 0.25), Square((0, 0), 1.0))
    assert cs.count("T2") == 0 and cs.count("T1") >= 1
    h = path_graph([(-50, 0), (50, 0)])
    s = gonzalez_sequence(h)
    eps, r = 0.25, 1.0
    cs = point_candidates(h, s, PointIndex(h.coords, s.index), build_trough_index(h, eps), Square((0, 0), r))
    xs = sorted(p.position[0] for p, k in zip(cs.points, cs.provenance) if k == "T2")
    assert xs[0] <= -r and xs[-1] >= r
    assert max(b - a for a, b in zip(xs, xs[1:])) <= eps * r + 1e-12


@pytest.mark.parametrize("trial", range(20))
def test_coverage_brute_force(trial):
    rng = np.random.default_rng(trial)
    g = _graph(trial)
    seq = gonzalez_sequence(g, seed=trial)
    pidx = PointIndex(g.coords, seq.index)
    eps = float(rng.choice([0.5, 0.25, 0.125]))
    tr = build_trough_index(g, eps)
    lo, hi = g.coords.min(0), g.coords.max(0)
    sq = Square(tuple(rng.uniform(lo, hi)), float(rng.uniform(0.1, 3)))
    c, r = sq.center, sq.r
    brute = [e for e, (u, v) in enumerate(g.edges) if in_trough(g.points[u], g.points[v], eps, c[0], c[1], r)]
    assert long_edges_near(tr, sq) == brute
    cache: dict = {}

    def dist_from(s):
        if s not in cache:
            cache[s] = dijkstra(g, s)
        return cache[s]

    cs = point_candidates(g, seq, pidx, tr, sq)
    for _ in range(50):
        f = EdgePoint.on(g, int(rng.integers(g.num_edges)), float(rng.random()))
        if sq.contains(f.position):
            assert min(edge_point_distance(g, f, z, dist_from) for z in cs.points) <= eps * r * (1 + 1e-9)
    vc = vertex_candidates(seq, pidx, sq, eps)
    for v in range(g.num_vertices):
        if sq.contains(g.points[v]):
            assert min(dist_from(v)[z] for z in vc) <= eps * r + 1e-12


def test_candidate_growth_when_eps_halves():
    g = generate("perturbed-grid", {"rows": 8, "cols": 8, "perturbation": 0.3, "diagonals": 0.3}, seed=1)
    seq = gonzalez_sequence(g)
    pidx = PointIndex(g.coords, seq.index)
    sizes = []
    for eps in (0.5, 0.25, 0.125, 0.0625):
        tr = build_trough_index(g, eps)
        sizes.append(len(point_candidates(g, seq, pidx, tr, Square((3.5, 3.5), 1.0))))
    for a, b in zip(sizes, sizes[1:]):
        assert b <= 8 * 2 * a


def test_edge_point_distance_on_common_edge():
    g = path_graph([(0, 0), (4, 0)])
    a, b = EdgePoint.on(g, 0, 0.25), EdgePoint.on(g, 0, 0.75)
    assert edge_point_distance(g, a, b) == pytest.approx(2.0)
    assert edge_point_distance(g, a, EdgePoint.at_vertex(g, 1)) == pytest.approx(3.0)
    assert math.isfinite(edge_point_distance(g, b, a))
