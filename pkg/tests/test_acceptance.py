"""End-to-end acceptance checks.

Every test prints exactly one ``criterion N: PASS|FAIL`` line with the
measured quantities, then asserts.
"""

import math
import time

import numpy as np
import pytest

from conftest import diameter, enum_min_curve, random_curve, small_graph
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
from mapmatch.curvequery import curve_report
from mapmatch.geom import polyline_frechet
from mapmatch.graph import EdgePoint, dijkstra, generate, lanky_check
from mapmatch.hierarchy import build_hierarchy, lca, straight_query
from mapmatch.index import build_index
from mapmatch.oracle import decide_curve, min_curve_frechet, min_segment_frechet
from mapmatch.seggrid import SegGrid, segment_query_endpoints


@pytest.fixture
def report(capsys):
    def emit(number: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    return emit


def _instance(rng, lo: int, hi: int):
    """Perturbed grid or theta graph with lo <= |V| + |E| <= hi."""
    while True:
        seed = int(rng.integers(1 << 30))
        if rng.random() < 0.5:
            params = {"rows": int(rng.integers(2, 6)), "cols": int(rng.integers(2, 6)),
                      "perturbation": 0.3, "diagonals": float(rng.choice([0.0, 0.2, 0.4]))}
            g = generate("perturbed-grid", params, seed=seed)
        else:
            g = generate("theta-graph", {"n": int(rng.integers(4, 25)), "cones": int(rng.choice([6, 8]))}, seed=seed)
        if lo <= g.n <= hi:
            return g, seed


def _ratio_ok(val, opt, eps, diam, rel=1e-6):
    if opt > 1e-9 * diam:
        return 1 - rel <= val / opt <= 1 + eps + rel
    return abs(val - opt) <= rel * diam


def test_criterion_1_three_approximation(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst, bad, pairs = 0.0, 0, 0
    for _ in range(200):
        g, seed = _instance(rng, 10, 60)
        tree = build_hierarchy(g, seed=seed)
        for _ in range(5):
            u, v = (int(x) for x in rng.integers(g.num_vertices, size=2))
            opt = min_segment_frechet(g, u, v, (g.points[u], g.points[v])).distance
            val = straight_query(tree, u, v)
            pairs += 1
            if not (opt - 1e-9 <= val <= 3 * opt + 1e-9):
                bad += 1
            if opt > 0:
                worst = max(worst, val / opt)
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 120
    report(1, ok, f"200 instances, {pairs} pairs, violations={bad}, max ratio={worst:.3f}, {elapsed:.1f}s")
    assert ok


def test_criterion_2_segment_queries(report):
    t0 = time.perf_counter()
    lines = []
    ok = True
    for eps in (0.5, 0.25):
        rng = np.random.default_rng(202)
        trials, bad, worst = 0, 0, 1.0
        while trials < 500:
            g, seed = _instance(rng, 10, 40)
            tree = build_hierarchy(g, seed=seed, leaf_cutoff=4, eager=False)
            sg = SegGrid(g, tree, eps)
            diam = diameter(g)
            for _ in range(10):
                u, v = (int(x) for x in rng.integers(g.num_vertices, size=2))
                spread = float(rng.choice([0.05, 0.3, 1.0]))
                pq = (tuple(g.points[u] + rng.normal(0, spread, 2)), tuple(g.points[v] + rng.normal(0, spread, 2)))
                opt = min_segment_frechet(g, u, v, pq).distance
                val = segment_query_endpoints(sg, u, v, pq)
                trials += 1
                if not _ratio_ok(val, opt, eps, diam):
                    bad += 1
                if opt > 1e-9 * diam:
                    worst = max(worst, val / opt)
        ok &= bad == 0
        lines.append(f"eps={eps}: {trials} trials, violations={bad}, max ratio={worst:.4f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    report(2, ok, "; ".join(lines) + f", {elapsed:.1f}s")
    assert ok


@pytest.fixture(scope="module")
def curve_suite():
    """Criterion 3 suite: (graph, Q, oracle value, report) for 100 trials."""
    eps = 0.25
    rng = np.random.default_rng(303)
    t0 = time.perf_counter()
    rows = []
    for _ in range(100):
        g, seed = _instance(rng, 10, 40)
        idx = build_index(g, eps, seed=seed, eager=False)
        Q = random_curve(g, rng, int(rng.integers(2, 9)))
        opt = min_curve_frechet(g, Q).distance
        res = curve_report(idx, Q)
        rows.append((g, Q, opt, res, idx))
    return eps, rows, time.perf_counter() - t0


def test_criterion_3_curve_queries(report, curve_suite):
    eps, rows, elapsed = curve_suite
    bad, worst = 0, 1.0
    for g, Q, opt, res, _ in rows:
        tol = 1e-6 * diameter(g, Q)
        if not (opt - tol <= res.distance <= (1 + eps) * opt + tol):
            bad += 1
        if opt > tol:
            worst = max(worst, res.distance / opt)
    ok = bad == 0 and elapsed < 600 and len(rows) >= 100
    report(3, ok, f"{len(rows)} trials, violations={bad}, max ratio={worst:.4f}, {elapsed:.1f}s")
    assert ok


def test_criterion_4_reporting(report, curve_suite):
    eps, rows, _ = curve_suite
    bad, per_vertex = 0, 0.0
    c_bound = 16.0
    for g, Q, opt, res, idx in rows:
        tol = 1e-6 * diameter(g, Q)
        fd = polyline_frechet(g.embed(res.path), Q) if res.path else math.inf
        if not (g.is_walk(res.path) and fd <= (1 + eps) * opt + tol):
            bad += 1
        # lookups per walk vertex, in units of 1/eps of the segment structure
        per_vertex = max(per_vertex, res.diagnostics["report_lookups"] / len(res.path) * idx.eps_segment)
    ok = bad == 0 and per_vertex <= c_bound
    report(4, ok, f"{len(rows)} walks, invalid={bad}, max lookups/vertex = {per_vertex:.2f}/eps_seg "
                  f"(bound {c_bound:.0f}/eps_seg)")
    assert ok


def test_criterion_5_separators(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(505)
    bad, c_sep, sizes = 0, 0.0, []
    for i in range(100):
        target = int(rng.integers(20, 501))
        while True:
            if i % 2:
                side = max(2, int(round(math.sqrt(target / 3))))
                g = generate("perturbed-grid", {"rows": side, "cols": side, "perturbation": 0.3,
                                                "diagonals": 0.2}, seed=i)
            else:
                g = generate("theta-graph", {"n": max(5, target // 4), "cones": 6}, seed=i)
            if g.n <= 500:
                break
            target = int(target * 0.9)
        sizes.append(g.n)
        tau = max(1, lanky_check(g))
        tree = build_hierarchy(g, tau, seed=i, eager=False)
        for nd in tree.nodes:
            k = len(nd.vertices)
            for ch in nd.children:
                if len(tree.nodes[ch].vertices) > math.ceil(2 * k / 3):
                    bad += 1
        c_sep = max(c_sep, tree.separator_constant())
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and c_sep <= 8
    report(5, ok, f"100 instances, n up to {max(sizes)}, balance violations={bad}, fitted c_sep={c_sep:.3f}, "
                  f"{elapsed:.1f}s")
    assert ok


def test_criterion_6_clustering(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    bad = 0
    for trial in range(200):
        g, seed = _instance(rng, 10, 80)
        seq = gonzalez_sequence(g, seed=seed)
        D = np.array([dijkstra(g, v) for v in range(g.num_vertices)])
        radii = seq.radii
        if any(a < b for a, b in zip(radii, radii[1:])) or radii[-1] != 0:
            bad += 1
        eps = float(rng.choice([0.5, 0.25, 0.125]))
        lo, hi = g.coords.min(0), g.coords.max(0)
        sq = Square(tuple(rng.uniform(lo, hi)), float(rng.uniform(0.1, 3.0)))
        er = eps * sq.r
        i = seq.prefix_for(er)
        pre = seq.centers[:i]
        if pre and np.any(D[np.ix_(pre, pre)][~np.eye(len(pre), dtype=bool)] < er - 1e-12):
            bad += 1
        T = vertex_candidates(seq, PointIndex(g.coords, seq.index), sq, eps)
        for v in range(g.num_vertices):
            if sq.contains(g.points[v]) and (not T or min(D[v, z] for z in T) > er + 1e-12):
                bad += 1
    elapsed = time.perf_counter() - t0
    ok = bad == 0
    report(6, ok, f"200 trials, violations={bad}, {elapsed:.1f}s")
    assert ok


def test_criterion_7_troughs_and_points(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(707)
    stab_bad = cover_bad = 0
    for trial in range(100):
        g, seed = _instance(rng, 10, 80)
        seq = gonzalez_sequence(g, seed=seed)
        pidx = PointIndex(g.coords, seq.index)
        eps = float(rng.choice([0.5, 0.25, 0.125]))
        tr = build_trough_index(g, eps)
        lo, hi = g.coords.min(0), g.coords.max(0)
        sq = Square(tuple(rng.uniform(lo, hi)), float(rng.uniform(0.1, 3.0)))
        c, r = sq.center, sq.r
        brute = [e for e, (u, v) in enumerate(g.edges) if in_trough(g.points[u], g.points[v], eps, c[0], c[1], r)]
        if long_edges_near(tr, sq) != brute:
            stab_bad += 1
        for _ in range(20):
            x, y = rng.uniform(lo - 1, hi + 1)
            z = float(rng.uniform(0.01, 4.0))
            want = [e for e, (u, v) in enumerate(g.edges) if in_trough(g.points[u], g.points[v], eps, x, y, z)]
            if tr.stab(x, y, z) != want:
                stab_bad += 1
        cs = point_candidates(g, seq, pidx, tr, sq)
        cache: dict = {}

        def dist_from(s):
            if s not in cache:
                cache[s] = dijkstra(g, s)
            return cache[s]

        hits = 0
        for _ in range(2000):
            if hits == 50:
                break
            f = EdgePoint.on(g, int(rng.integers(g.num_edges)), float(rng.random()))
            if not sq.contains(f.position):
                continue
            hits += 1
            if min(edge_point_distance(g, f, zz, dist_from) for zz in cs.points) > eps * r * (1 + 1e-9):
                cover_bad += 1
    g = generate("perturbed-grid", {"rows": 8, "cols": 8, "perturbation": 0.3, "diagonals": 0.3}, seed=1)
    seq = gonzalez_sequence(g)
    pidx = PointIndex(g.coords, seq.index)
    sizes = [len(point_candidates(g, seq, pidx, build_trough_index(g, e), Square((3.5, 3.5), 1.0)))
             for e in (0.5, 0.25, 0.125, 0.0625)]
    growth = max(b / a for a, b in zip(sizes, sizes[1:]))
    elapsed = time.perf_counter() - t0
    ok = stab_bad == 0 and cover_bad == 0 and growth <= 8 * 2
    report(7, ok, f"100 trials, stab mismatches={stab_bad}, coverage misses={cover_bad}, "
                  f"|T| for eps halving={sizes} (max growth {growth:.2f}, bound 16), {elapsed:.1f}s")
    assert ok


def _slope(xs, ys):
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def test_criterion_8_scaling(report):
    t0 = time.perf_counter()
    ns, examined, sizes = [], [], []
    for target in (100, 200, 400, 800):
        side = int(round(math.sqrt(target / 3)))
        ex, sz, nn = [], [], []
        for seed in range(3):
            g = generate("perturbed-grid", {"rows": side, "cols": side, "perturbation": 0.3, "diagonals": 0.0},
                         seed=seed)
            tree = build_hierarchy(g, max(1, lanky_check(g)), seed=seed, eager=False)
            rng = np.random.default_rng(seed)
            counts = []
            for _ in range(200):
                u, v = (int(x) for x in rng.integers(g.num_vertices, size=2))
                a = lca(tree, tree.locator[u], tree.locator[v])
                counts.append(sum(len(tree.nodes[b].separator) for b in tree.ancestors(a)))
            ex.append(np.mean(counts))
            sz.append(tree.table_entries())
            nn.append(g.n)
        ns.append(np.mean(nn))
        examined.append(np.mean(ex))
        sizes.append(np.mean(sz))
    s_ex, s_sz = _slope(ns, examined), _slope(ns, sizes)
    elapsed = time.perf_counter() - t0
    ok = 0.3 <= s_ex <= 0.7 and 1.2 <= s_sz <= 1.8 and elapsed < 900
    report(8, ok, f"n={[int(x) for x in ns]}, examined-transit slope={s_ex:.3f} (target 0.5), "
                  f"index-size slope={s_sz:.3f} (target 1.5), {elapsed:.1f}s")
    assert ok


def test_criterion_9_oracle_self_consistency(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(909)
    mono_bad = 0
    for _ in range(500):
        g = small_graph(int(rng.integers(1 << 20)), n_max=30)
        Q = random_curve(g, rng, int(rng.integers(2, 5)))
        a, b = sorted(rng.uniform(0, 2.0, 2))
        if decide_curve(g, Q, a)[0] and not decide_curve(g, Q, b)[0]:
            mono_bad += 1
    enum_bad, exact_hits, instances = 0, 0, 0
    while instances < 12:
        g = small_graph(int(rng.integers(1 << 20)), n_max=20)
        if max(len(a) for a in g.adj) > 4:
            continue
        instances += 1
        Q = random_curve(g, rng, int(rng.integers(2, 6)))
        res = min_curve_frechet(g, Q)
        best, _ = enum_min_curve(g, Q, 8)
        if res.distance > best + 1e-9:
            enum_bad += 1
        if len(res.path) - 1 <= 8:
            exact_hits += 1
            if abs(res.distance - best) > 1e-9:
                enum_bad += 1
    elapsed = time.perf_counter() - t0
    ok = mono_bad == 0 and enum_bad == 0
    report(9, ok, f"500 delta pairs, monotonicity violations={mono_bad}; {instances} enumeration instances "
                  f"({exact_hits} with optimum inside the enumeration), mismatches={enum_bad}, {elapsed:.1f}s")
    assert ok
