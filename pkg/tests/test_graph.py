import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import path_graph, small_graph
from mapmatch.graph import (
    EdgePoint,
    GeometricGraph,
    GraphFormatError,
    dumps_graph,
    estimate_density,
    estimate_stretch,
    generate,
    graph_distance,
    lanky_check,
    load_curve,
    load_graph,
    realism_report,
)


def test_load_sizes():
    assert load_graph('{"vertices": [], "edges": []}').n == 0
    g = load_graph('{"vertices": [[0,0],[1,0],[2,0]], "edges": [[0,1],[1,2]]}')
    assert g.n == 5


def test_duplicate_edges_merged():
    g = load_graph('{"vertices": [[0,0],[1,0]], "edges": [[0,1],[1,0],[0,1]]}')
    assert g.num_edges == 1


def test_round_trip_exact():
    g = generate("theta-graph", {"n": 15, "cones": 6}, seed=4)
    h = load_graph(dumps_graph(g))
    assert h.edges == g.edges
    assert np.array_equal(h.coords, g.coords)


@pytest.mark.parametrize("text, line", [
    ('{"vertices": [[0,0],[1,0]],\n "edges": [\n[0,1],\n[1,5]]}', 4),
    ('{"vertices": [[0,0],[1,0]],\n "edges": [[0,0]]}', 2),
    ('{"vertices": [[0,0],\n[1,0]', None),
])
def test_rejections_name_the_line(text, line):
    with pytest.raises(GraphFormatError) as info:
        load_graph(text)
    if line is not None:
        assert info.value.line == line


def test_load_curve():
    assert load_curve('{"points": [[0, 1], [2, 3]]}').shape == (2, 2)
    with pytest.raises(GraphFormatError):
        load_curve('{"points": []}')


def test_edge_point():
    g = path_graph([(0, 0), (2, 0)])
    p = EdgePoint.on(g, 0, 0.25)
    assert p.position == pytest.approx((0.5, 0.0))
    assert EdgePoint.at_vertex(g, 1).vertex == 1


def test_graph_distance_examples():
    g = path_graph([(0, 0), (1, 0), (2, 0)])
    assert graph_distance(g, 1, 1) == 0
    assert graph_distance(g, 0, 2) == 2
    h = GeometricGraph(np.array([[0, 0], [1, 0], [5, 5]], float), [(0, 1)])
    assert graph_distance(h, 0, 2) == math.inf
    with pytest.raises((IndexError, ValueError)):
        graph_distance(g, 0, 7)


def _bellman_ford(g, s):
    d = [math.inf] * g.num_vertices
    d[s] = 0.0
    for _ in range(g.num_vertices):
        for (a, b), w in zip(g.edges, g.lengths):
            d[b] = min(d[b], d[a] + w)
            d[a] = min(d[a], d[b] + w)
    return d


@pytest.mark.parametrize("seed", range(8))
def test_graph_distance_matches_bellman_ford(seed):
    g = small_graph(seed)
    for s in range(0, g.num_vertices, 3):
        bf = _bellman_ford(g, s)
        for t in range(g.num_vertices):
            assert graph_distance(g, s, t) == pytest.approx(bf[t], abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 200), st.data())
def test_metric_properties(seed, data):
    g = small_graph(seed)
    u, v, w = (data.draw(st.integers(0, g.num_vertices - 1)) for _ in range(3))
    duv = graph_distance(g, u, v)
    assert duv >= math.dist(g.points[u], g.points[v]) - 1e-12
    assert duv <= graph_distance(g, u, w) + graph_distance(g, w, v) + 1e-12


def test_density_examples():
    assert estimate_density(path_graph([(0, 0), (1, 0)])) == 1
    k = 6
    pts, edges = [], []
    for i in range(k):
        pts += [(0.0, i * 1e-3), (1.0, i * 1e-3)]
        edges.append((2 * i, 2 * i + 1))
    assert estimate_density(GeometricGraph(np.array(pts), edges)) == k


def test_density_cutoff():
    g = generate("perturbed-grid", {"rows": 5, "cols": 5}, seed=0)
    with pytest.raises(ValueError):
        estimate_density(g, "exact", cutoff=10)


@pytest.mark.parametrize("seed", range(6))
def test_sampled_density_is_a_lower_bound(seed):
    g = small_graph(seed)
    assert estimate_density(g, "sampled", samples=500, seed=seed) <= estimate_density(g, "exact")


def test_stretch_examples():
    tri = GeometricGraph(np.array([[0, 0], [1, 0], [0, 1]], float), [(0, 1), (1, 2), (0, 2)])
    assert estimate_stretch(tri) == pytest.approx(1.0)
    assert estimate_stretch(path_graph([(0, 0), (1, 1), (2, 0)])) == pytest.approx(math.sqrt(2))
    h = GeometricGraph(np.array([[0, 0], [1, 0], [5, 5]], float), [(0, 1)])
    assert estimate_stretch(h) == math.inf


def test_lanky_examples():
    k = 5
    ang = np.linspace(0, 2 * np.pi, k, endpoint=False)
    star = GeometricGraph(np.vstack([[0, 0], np.c_[np.cos(ang), np.sin(ang)]]), [(0, i + 1) for i in range(k)])
    assert lanky_check(star) == k
    assert lanky_check(path_graph([(0, 0), (1, 0.3), (2, 0), (3, 0.5)])) <= 2


def _lanky_brute(g):
    ends = np.array(g.edges)
    L = np.array(g.lengths)
    best = 0
    for v in range(g.num_vertices):
        dv = np.hypot(*(g.coords - g.coords[v]).T)
        crit = np.unique(np.concatenate([dv, L]))
        radii = [r + s for r in crit if r > 0 for s in (-1e-9, 0.0, 1e-9)]
        for r in radii:
            cut = [(dv[a] <= r) != (dv[b] <= r) and L[i] >= r for i, (a, b) in enumerate(ends)]
            best = max(best, sum(cut))
    return best


@pytest.mark.parametrize("seed", range(5))
def test_lanky_matches_brute_force_on_theta_graphs(seed):
    g = generate("theta-graph", {"n": 14, "cones": 6}, seed=seed)
    assert lanky_check(g) == _lanky_brute(g)


@pytest.mark.parametrize("seed", range(6))
def test_lanky_bounded_by_density_up_to_constant(seed):
    # density implies lankiness only up to a constant factor (see notes)
    g = small_graph(seed)
    assert lanky_check(g) <= 7 * estimate_density(g, "exact")


def test_generators():
    g = generate("perturbed-grid", {"rows": 3, "cols": 3, "perturbation": 0.0})
    assert (g.num_vertices, g.num_edges) == (9, 12)
    a = generate("theta-graph", {"n": 30, "cones": 8}, seed=7)
    b = generate("theta-graph", {"n": 30, "cones": 8}, seed=7)
    assert dumps_graph(a) == dumps_graph(b)
    # one outgoing edge per cone and vertex at most
    assert a.num_edges <= 8 * a.num_vertices
    with pytest.raises(ValueError):
        generate("hexagons", {})


def test_theta_one_edge_per_cone():
    from mapmatch.graph import theta_edges

    pts = np.random.default_rng(3).uniform(0, 10, (25, 2))
    k = 6
    out = {}
    for u, v in theta_edges(pts, k):
        ang = math.atan2(*(pts[v] - pts[u])[::-1]) % (2 * math.pi)
        cone = int(ang // (2 * math.pi / k))
        assert (u, cone) not in out
        out[(u, cone)] = v


@pytest.mark.parametrize("seed", range(4))
def test_perturbed_grid_lanky_gate(seed):
    g = generate("perturbed-grid", {"rows": 6, "cols": 6, "perturbation": 0.3, "diagonals": 0.3}, seed=seed)
    assert lanky_check(g) <= 12


def test_realism_report():
    g = generate("theta-graph", {"n": 12, "cones": 6}, seed=1)
    rep = realism_report(g)
    assert rep.t_hat >= 1
    assert rep.tau_hat == lanky_check(g)
    assert json.loads(json.dumps(rep.to_dict()))["density_mode"] == "exact"
