"""Approximate curve-to-graph matching on top of the index.

A decision at distance ``delta`` builds one candidate layer per curve
vertex and searches a layered graph.  Its states are graph vertices, or
edge points together with a direction of travel.  Consecutive layers are
joined either along a common edge or through an exit vertex ``x`` and an
entry vertex ``y``.  Such an arc needs an endpoint-constrained segment
query between the points where ``x`` and ``y`` can first and last see the
curve segment.

With ``d1 = (1 + 1.5 * eps_c) * delta`` and the segment factor ``F``, the
decision is

* complete: a walk within ``delta`` of the curve makes it succeed, and
* sound: success comes with a walk certified within ``F * d1``.

Bisection on ``delta`` then brackets the optimum.  The remaining error
budget goes to the stopping rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .candidates import Square, point_candidates, vertex_candidates
from .geom import dist, free_interval, polyline_frechet
from .graph import GeometricGraph, dijkstra
from .oracle import INF, MatchResult
from .seggrid import _search, report_path

__all__ = ["QueryConfig", "CandidateLayer", "curve_decision", "curve_query", "curve_report"]


@dataclass
class QueryConfig:
    eps: Optional[float] = None
    tolerance: Optional[float] = None
    max_iterations: int = 60
    seed: int = 0

    def __post_init__(self):
        if self.eps is not None and not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.tolerance is not None and self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass
class CandidateLayer:
    index: int
    square: Square
    states: list = field(default_factory=list)


@dataclass
class Decision:
    ok: bool
    cost: float = INF
    states: list = field(default_factory=list)
    arcs: list = field(default_factory=list)
    layers: list = field(default_factory=list)
    segment_queries: int = 0


def _lerp(a, b, t: float):
    return (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))


def segment_factor(eps_s: float) -> float:
    return (1 + eps_s / 2) * (1 + 3 * eps_s / 16)


def _check_eps(index, cfg: QueryConfig) -> None:
    if cfg.eps is not None and abs(cfg.eps - index.eps) > 1e-15:
        raise ValueError(f"index was built for eps={index.eps}; got {cfg.eps}")


def _layers(index, Q: np.ndarray, delta: float, d1: float, slack: float) -> list[CandidateLayer]:
    g = index.g
    eps_c = index.eps_candidates
    m = len(Q)
    layers = []
    for i in range(m):
        sq = Square((float(Q[i][0]), float(Q[i][1])), delta)
        states = []
        if i in (0, m - 1):
            for w in vertex_candidates(index.gonzalez, index.points, sq, eps_c):
                if dist(g.points[w], sq.center) <= d1 + slack:
                    states.append(("v", w))
        else:
            cs = point_candidates(g, index.gonzalez, index.points, index.troughs, sq, eps_c)
            for ep in cs.points:
                if dist(ep.position, sq.center) > d1 + slack:
                    continue
                if ep.vertex is not None:
                    states.append(("v", ep.vertex))
                else:
                    states.append(("e", ep.edge, ep.t, 0))
                    states.append(("e", ep.edge, ep.t, 1))
        layers.append(CandidateLayer(i, sq, sorted(set(states))))
    return layers


def _position(g: GeometricGraph, st):
    if st[0] == "v":
        return g.points[st[1]]
    u, v = g.edges[st[1]]
    return _lerp(g.points[u], g.points[v], st[2])


def _exit(g: GeometricGraph, st) -> int:
    if st[0] == "v":
        return st[1]
    u, v = g.edges[st[1]]
    return v if st[3] == 0 else u


def _entry(g: GeometricGraph, st) -> int:
    if st[0] == "v":
        return st[1]
    u, v = g.edges[st[1]]
    return u if st[3] == 0 else v


def _ahead(a, b) -> bool:
    """Edge state ``b`` lies at or after ``a`` on the same directed edge."""
    if a[0] != "e" or b[0] != "e" or a[1] != b[1] or a[3] != b[3]:
        return False
    return b[2] >= a[2] if a[3] == 0 else b[2] <= a[2]


def curve_decision(index, Q, delta: float, cfg: Optional[QueryConfig] = None) -> Decision:
    """Layered search at distance ``delta``; see the module docstring for the guarantee."""
    cfg = cfg or QueryConfig()
    _check_eps(index, cfg)
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or len(Q) < 2:
        raise ValueError("query curve needs at least two points")
    g = index.g
    if g.num_vertices == 0 or delta < 0:
        return Decision(False)
    diam = _diameter(g, Q)
    slack = 1e-12 * diam
    eps_c = index.eps_candidates
    d1 = (1 + 1.5 * eps_c) * delta
    B = segment_factor(index.seggrid.eps) * d1
    sg = index.seggrid
    layers = _layers(index, Q, delta, d1, slack)
    m = len(Q)
    pts = g.points
    # reached state -> (bottleneck cost, predecessor state, arc description)
    reached = {st: (dist(pts[st[1]], tuple(Q[0])), None, None) for st in layers[0].states}
    history = [reached]
    queries = 0
    for i in range(m - 1):
        if not reached:
            break
        qa, qb = tuple(Q[i]), tuple(Q[i + 1])
        seg = (qa, qb)
        fi: dict = {}

        def interval(w):
            if w not in fi:
                fi[w] = free_interval(pts[w], seg, d1 + slack)
            return fi[w]

        # best way out through each exit vertex
        exits: dict[int, tuple] = {}
        for st, (cost, _, _) in reached.items():
            x = _exit(g, st)
            iv = interval(x)
            if iv is None:
                continue
            c = max(cost, dist(_position(g, st), qa), dist(pts[x], _lerp(qa, qb, iv[0])))
            if x not in exits or (c, st) < exits[x]:
                exits[x] = (c, st)
        order = sorted(exits.items(), key=lambda kv: (kv[1][0], kv[0]))
        nxt: dict = {}
        memo: dict = {}
        for st in layers[i + 1].states:
            pos = _position(g, st)
            end_cost = dist(pos, qb)
            best = None
            # along a common edge
            if st[0] == "e":
                for prev, (cost, _, _) in reached.items():
                    if _ahead(prev, st):
                        c = max(cost, dist(_position(g, prev), qa), end_cost)
                        if c <= B and (best is None or c < best[0]):
                            best = (c, prev, ("direct",))
            y = _entry(g, st)
            ivy = interval(y)
            if ivy is not None:
                ty = ivy[1]
                stub = max(dist(pts[y], _lerp(qa, qb, ty)), end_cost)
                for x, (cx, prev) in order:
                    if best is not None and max(cx, stub) >= best[0]:
                        break
                    tx = interval(x)[0]
                    if tx > ty:
                        continue
                    key = (x, y)
                    if key not in memo:
                        pa, pb = _lerp(qa, qb, tx), _lerp(qa, qb, ty)
                        if x == y:
                            memo[key] = max(dist(pts[x], pa), dist(pts[x], pb))
                        else:
                            queries += 1
                            w = _search(sg, x, y, (pa, pb), B)
                            memo[key] = INF if w is None else w.value
                    mid = memo[key]
                    c = max(cx, stub, mid)
                    if mid <= B and (best is None or c < best[0]):
                        best = (c, prev, ("via", x, y, tx, ty))
            if best is not None and best[0] <= B:
                nxt[st] = best
        reached = nxt
        history.append(reached)
    if len(history) < m or not history[-1]:
        return Decision(False, layers=layers, segment_queries=queries)
    last = min(history[-1].items(), key=lambda kv: (kv[1][0], kv[0]))
    states, arcs = [last[0]], []
    for i in range(m - 1, 0, -1):
        cost, prev, arc = history[i][states[-1]]
        arcs.append(arc)
        states.append(prev)
    states.reverse()
    arcs.reverse()
    return Decision(True, last[1][0], states, arcs, layers, queries)


def _diameter(g: GeometricGraph, Q: np.ndarray) -> float:
    pts = np.concatenate([g.coords, Q]) if g.num_vertices else Q
    return float(np.hypot(*(pts.max(0) - pts.min(0))))


def _stitch(index, Q: np.ndarray, dec: Decision) -> tuple[list[int], int]:
    g = index.g
    walk: list[int] = []
    lookups = 0

    def extend(part):
        for w in part:
            if not walk or walk[-1] != w:
                walk.append(w)

    first = dec.states[0]
    extend([_exit(g, first)])
    for i, arc in enumerate(dec.arcs):
        st = dec.states[i + 1]
        if arc[0] == "via":
            _, x, y, tx, ty = arc
            qa, qb = tuple(Q[i]), tuple(Q[i + 1])
            if x == y:
                extend([x])
            else:
                rep = report_path(index.seggrid, x, y, (_lerp(qa, qb, tx), _lerp(qa, qb, ty)))
                lookups += rep.diagnostics.get("lookups", 0)
                extend(rep.path)
            extend([_exit(g, st)] if st[0] == "v" else [_entry(g, st)])
        if st[0] == "e" and (i + 1 < len(dec.arcs) and dec.arcs[i + 1][0] == "via"):
            extend([_exit(g, st)])
    return walk, lookups


def _lower_bound(g: GeometricGraph, Q: np.ndarray) -> float:
    pts = g.coords
    ends = max(float(np.min(np.hypot(*(pts - Q[0]).T))), float(np.min(np.hypot(*(pts - Q[-1]).T))))
    if not g.num_edges:
        return max(ends, max(float(np.min(np.hypot(*(pts - q).T))) for q in Q))
    A = pts[[a for a, _ in g.edges]]
    Bp = pts[[b for _, b in g.edges]]
    d = Bp - A
    den = np.where((d * d).sum(1) > 0, (d * d).sum(1), 1.0)
    worst = 0.0
    for q in Q:
        t = np.clip(((q - A) * d).sum(1) / den, 0, 1)
        worst = max(worst, float(np.min(np.hypot(*(A + t[:, None] * d - q).T))))
    return max(ends, worst)


def _greedy(g: GeometricGraph, Q: np.ndarray) -> tuple[float, list[int]]:
    """Nearest vertices joined by shortest paths; exact Fréchet cost."""
    near = [int(np.argmin(np.hypot(*(g.coords - q).T))) for q in Q]
    walk = [near[0]]
    for a, b in zip(near, near[1:]):
        if a == b:
            continue
        d = dijkstra(g, a, targets={b})
        if d[b] == INF:
            return INF, []
        walk.extend(_shortest_path(g, a, b)[1:])
    return polyline_frechet(g.embed(walk), Q), walk


def _shortest_path(g: GeometricGraph, a: int, b: int) -> list[int]:
    import heapq

    dd = [INF] * g.num_vertices
    pr = [-1] * g.num_vertices
    dd[a] = 0.0
    heap = [(0.0, a)]
    while heap:
        d, w = heapq.heappop(heap)
        if d > dd[w]:
            continue
        if w == b:
            break
        for nb, eid in g.adj[w]:
            nd = d + g.lengths[eid]
            if nd < dd[nb] or (nd == dd[nb] and w < pr[nb]):
                dd[nb], pr[nb] = nd, w
                heapq.heappush(heap, (nd, nb))
    path = [b]
    while path[-1] != a:
        path.append(pr[path[-1]])
    return path[::-1]


def _optimize(index, Q: np.ndarray, cfg: QueryConfig):
    g = index.g
    diam = max(_diameter(g, Q), 1e-300)
    tol = cfg.tolerance if cfg.tolerance is not None else 1e-7 * diam
    eps_b = index.eps_bisection
    lo = _lower_bound(g, Q)
    best, walk = _greedy(g, Q)
    best_dec = None
    steps = 0
    hi = best

    def attempt(delta):
        nonlocal best, best_dec, steps
        steps += 1
        dec = curve_decision(index, Q, delta, cfg)
        if dec.ok and dec.cost < best:
            best, best_dec = dec.cost, dec
        return dec.ok

    if lo < tol and best > tol:
        if attempt(tol):
            hi = tol
        else:
            lo = tol
    if hi == INF:
        # disconnected greedy choice; grow until the decision succeeds
        delta = max(lo, tol)
        while steps < cfg.max_iterations and not attempt(delta):
            lo, delta = delta, 2 * delta
        hi = delta
    while steps < cfg.max_iterations and best > (1 + eps_b) * lo and hi - lo > tol and hi > (1 + eps_b) * lo:
        delta = math.sqrt(lo * hi) if lo > 0 else 0.5 * hi
        if attempt(delta):
            hi = delta
        else:
            lo = delta
    return best, walk, best_dec, {"bisection_steps": steps, "lower": lo, "upper_delta": hi}


def curve_query(index, Q, cfg: Optional[QueryConfig] = None) -> float:
    """Certified approximate ``min over walks`` of the Fréchet distance to ``Q``."""
    return curve_report(index, Q, cfg, with_walk=False).distance


def curve_report(index, Q, cfg: Optional[QueryConfig] = None, *, with_walk: bool = True) -> MatchResult:
    """Distance plus a walk realizing it, validated against ``Q``."""
    cfg = cfg or QueryConfig()
    _check_eps(index, cfg)
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[1] != 2 or len(Q) < 2:
        raise ValueError("query curve needs at least two 2-d points")
    g = index.g
    if g.num_vertices == 0:
        return MatchResult(INF, [], diagnostics={"valid": False})
    best, walk, dec, diag = _optimize(index, Q, cfg)
    if dec is not None:
        diag["source"] = "layered"
        if with_walk:
            walk, diag["report_lookups"] = _stitch(index, Q, dec)
    else:
        diag["source"] = "greedy"
        diag["report_lookups"] = 0
    res = MatchResult(best, walk if with_walk else [], diagnostics=diag)
    if with_walk:
        fd = polyline_frechet(g.embed(walk), Q) if walk else INF
        tol = 1e-9 * max(_diameter(g, Q), 1e-300)
        diag["validated_distance"] = fd
        diag["valid"] = bool(walk) and g.is_walk(walk) and fd <= best + tol
    return res
