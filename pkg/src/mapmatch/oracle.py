"""Exact map matching by free-space propagation over the whole graph.

This is the slow reference: every approximate structure in the package is
tested against it, and the index build uses it to fill its tables.  Walks
(repeated vertices allowed) form the path universe.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geom import Point, Segment, _pair_bisector_values, _vertex_segment_values, dist
from .graph import GeometricGraph

__all__ = [
    "MatchResult",
    "ReachLabel",
    "decide_segment",
    "min_segment_frechet",
    "decide_curve",
    "min_curve_frechet",
]

INF = math.inf


@dataclass
class MatchResult:
    distance: float
    path: list[int]
    alignment: Optional[list[Point]] = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"distance": self.distance, "path": list(self.path)}
        if self.alignment is not None:
            out["alignment"] = [list(p) for p in self.alignment]
        return out


@dataclass(frozen=True)
class ReachLabel:
    """Earliest reachable curve position ``segment + t`` at a vertex."""

    vertex: int
    segment: int
    t: float

    @property
    def position(self) -> float:
        return self.segment + self.t


def _intervals(W: np.ndarray, a, b, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Free intervals of every row of ``W`` on segment ab; empty -> lo > hi."""
    a = np.asarray(a, dtype=float)
    d = np.asarray(b, dtype=float) - a
    den = float(d @ d)
    rel = W - a
    if den == 0.0:
        ok = np.hypot(*rel.T) <= delta
        return np.where(ok, 0.0, INF), np.where(ok, 1.0, -INF)
    tc = rel @ d / den
    cross = rel[:, 0] * d[1] - rel[:, 1] * d[0]
    perp2 = cross * cross / den
    rem = delta * delta - np.maximum(perp2, 0.0)
    half = np.sqrt(np.maximum(rem, 0.0) / den)
    lo = np.maximum(tc - half, 0.0)
    hi = np.minimum(tc + half, 1.0)
    bad = (rem < 0) | (lo > hi)
    return np.where(bad, INF, lo), np.where(bad, -INF, hi)


def _slack(g: GeometricGraph, pts, slack: float) -> float:
    arr = np.asarray(pts, dtype=float).reshape(-1, 2)
    if g.num_vertices:
        arr = np.concatenate([arr, g.coords])
    return slack * max(float(np.hypot(*(arr.max(0) - arr.min(0)))), 1e-300)


def _check_ids(g: GeometricGraph, *ids: int) -> None:
    for w in ids:
        if not 0 <= w < g.num_vertices:
            raise IndexError(f"vertex id {w} out of range")


# -- segment queries ---------------------------------------------------------


def _segment_search(g: GeometricGraph, u: int, pq: Segment, delta: float):
    """Earliest labels from ``u`` against ``pq``; returns (label, hi, pred)."""
    lo_arr, hi_arr = _intervals(g.coords, pq[0], pq[1], delta)
    lo_l, hi_l = lo_arr.tolist(), hi_arr.tolist()
    label = [INF] * g.num_vertices
    pred = [-1] * g.num_vertices
    if lo_l[u] != 0.0:
        return label, hi_l, pred
    label[u] = 0.0
    heap = [(0.0, u)]
    done = [False] * g.num_vertices
    adj = g.adj
    while heap:
        t, w = heapq.heappop(heap)
        if done[w]:
            continue
        done[w] = True
        for nb, _ in adj[w]:
            if done[nb]:
                continue
            lo_nb = lo_l[nb]
            nt = t if t > lo_nb else lo_nb
            if nt > hi_l[nb]:
                continue
            if nt < label[nb] or (nt == label[nb] and w < pred[nb]):
                label[nb] = nt
                pred[nb] = w
                heapq.heappush(heap, (nt, nb))
    return label, hi_l, pred


def _segment_accepts(label, hi, v: int) -> bool:
    return label[v] < INF and hi[v] == 1.0


def decide_segment(g: GeometricGraph, u: int, v: int, pq: Segment, delta: float, *,
                   slack: float = 1e-12) -> bool:
    """True iff some walk from ``u`` to ``v`` is within Fréchet distance ``delta`` of ``pq``."""
    _check_ids(g, u, v)
    if delta < 0:
        return False
    label, hi, _ = _segment_search(g, u, pq, delta + _slack(g, pq, slack))
    return _segment_accepts(label, hi, v)


def _trace(pred, v: int) -> list[int]:
    path = [v]
    while pred[path[-1]] != -1:
        path.append(pred[path[-1]])
    return path[::-1]


def _segment_candidates(g: GeometricGraph, u: int, v: int, pq: Segment, lower: float):
    W = g.coords
    P = np.array([pq[0]], dtype=float)
    Qp = np.array([pq[1]], dtype=float)
    cheap = np.concatenate([
        [lower],
        np.hypot(*(W - P).T),
        np.hypot(*(W - Qp).T),
        _vertex_segment_values(W, P, Qp),
    ])
    cheap = np.unique(cheap[cheap >= lower])
    return cheap, W, P, Qp


def _search_sorted(values: np.ndarray, feasible) -> Optional[int]:
    if len(values) == 0 or not feasible(float(values[-1])):
        return None
    lo, hi = 0, len(values) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(float(values[mid])):
            hi = mid
        else:
            lo = mid + 1
    return lo


def min_segment_frechet(g: GeometricGraph, u: int, v: int, pq: Segment, *,
                        slack: float = 1e-12) -> MatchResult:
    """Exact ``min over walks u ~> v`` of the Fréchet distance to ``pq``.

    Binary search over critical values: vertex-to-endpoint and
    vertex-to-segment distances bracket the optimum, then bisector events of
    vertex pairs inside the bracket pin it down.
    """
    _check_ids(g, u, v)
    pq = (tuple(map(float, pq[0])), tuple(map(float, pq[1])))
    eta = _slack(g, pq, slack)
    stats = {"decisions": 0}

    def feasible(d: float) -> bool:
        stats["decisions"] += 1
        label, hi, _ = _segment_search(g, u, pq, d + eta)
        return _segment_accepts(label, hi, v)

    lower = max(dist(g.points[u], pq[0]), dist(g.points[v], pq[1]))
    cheap, W, P, Qp = _segment_candidates(g, u, v, pq, lower)
    k = _search_sorted(cheap, feasible)
    if k is None:
        return MatchResult(INF, [], diagnostics=stats)
    top = float(cheap[k])
    bottom = float(cheap[k - 1]) if k > 0 else lower
    if k > 0:
        # optimum lies in (bottom, top]; only bisector events can sit inside
        # an event at value d has both vertices within d of the segment
        near = W[_vertex_segment_values(W, P, Qp) <= top]
        bis = _pair_bisector_values(near, P, Qp)
        bis = np.unique(bis[(bis > bottom) & (bis < top)])
        j = _search_sorted(bis, feasible)
        if j is not None:
            top = float(bis[j])
    label, hi, pred = _segment_search(g, u, pq, top + eta)
    return MatchResult(top, _trace(pred, v), diagnostics=stats)


# -- curve queries -------------------------------------------------------------


def _curve_search(g: GeometricGraph, Q: np.ndarray, delta: float):
    """Free-space propagation of a graph against curve ``Q`` at ``delta``.

    Vertical states L[j][w]: earliest parameter on curve segment j at which
    the walk can sit at vertex w.  Horizontal states H[j][(a, b)]: earliest
    position along directed edge a->b while the curve sits at vertex Q_j.
    """
    nv = g.num_vertices
    m = len(Q)
    adj = g.adj
    directed = [(a, b) for a, b in g.edges] + [(b, a) for a, b in g.edges]
    pts = g.coords
    L, H, predL, predH = [], [{} for _ in range(m)], [], [{} for _ in range(m)]
    # horizontal free intervals of Q_j on every edge (as a->b; reversed by symmetry)
    hfree = []
    for j in range(m):
        if g.num_edges:
            A = pts[[a for a, _ in g.edges]]
            B = pts[[b for _, b in g.edges]]
            d = B - A
            den = (d * d).sum(1)
            rel = Q[j] - A
            with np.errstate(divide="ignore", invalid="ignore"):
                tc = np.where(den > 0, (rel * d).sum(1) / np.where(den > 0, den, 1), 0.0)
            cross = rel[:, 0] * d[:, 1] - rel[:, 1] * d[:, 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                perp2 = np.where(den > 0, cross * cross / np.where(den > 0, den, 1), (rel * rel).sum(1))
            rem = delta * delta - perp2
            with np.errstate(divide="ignore", invalid="ignore"):
                half = np.where(den > 0, np.sqrt(np.maximum(rem, 0) / np.where(den > 0, den, 1)), 1.0)
            lo = np.maximum(tc - half, 0.0)
            hi = np.minimum(tc + half, 1.0)
            bad = (rem < 0) | (lo > hi)
            hfree.append((np.where(bad, INF, lo).tolist(), np.where(bad, -INF, hi).tolist()))
        else:
            hfree.append(([], []))

    def hint(j: int, a: int, b: int):
        eid = g.edge_id(a, b)
        lo, hi = hfree[j][0][eid], hfree[j][1][eid]
        if lo > hi:
            return None
        if a > b:
            return 1.0 - hi, 1.0 - lo
        return lo, hi

    start = [w for w in range(nv) if dist(g.points[w], Q[0]) <= delta]
    hi_prev: list = []
    for j in range(m - 1):
        lo_a, hi_a = _intervals(pts, Q[j], Q[j + 1], delta)
        lo_l, hi_l = lo_a.tolist(), hi_a.tolist()
        lab = [INF] * nv
        pr: list = [None] * nv
        heap = []

        def offer(w, t, p):
            if t < lab[w] or (t == lab[w] and _key(p) < _key(pr[w])):
                lab[w] = t
                pr[w] = p
                heapq.heappush(heap, (t, w))

        if j == 0:
            for w in start:
                if lo_l[w] == 0.0:
                    offer(w, 0.0, ("start",))
        else:
            prev = L[j - 1]
            for w in range(nv):
                if prev[w] < INF and hi_prev[w] == 1.0 and lo_l[w] == 0.0:
                    offer(w, 0.0, ("corner", w))
        for (a, b), x0 in H[j].items():
            if lo_l[b] <= hi_l[b]:
                offer(b, lo_l[b], ("bottom", a, b))
        done = [False] * nv
        while heap:
            t, w = heapq.heappop(heap)
            if done[w] or t > lab[w]:
                continue
            done[w] = True
            for nb, _ in adj[w]:
                if done[nb]:
                    continue
                nt = max(t, lo_l[nb])
                if nt <= hi_l[nb]:
                    offer(nb, nt, ("left", w))
        L.append(lab)
        predL.append(pr)
        hi_prev = hi_l
        # tops of cells: horizontal states at Q_{j+1}
        nxt, nprd = H[j + 1], predH[j + 1]
        for a, b in directed:
            best, why = INF, None
            iv = hint(j + 1, a, b)
            if iv is None:
                continue
            c, d = iv
            if lab[a] < INF:
                best, why = c, ("fromleft", a)
            x0 = H[j].get((a, b))
            if x0 is not None:
                x = max(x0, c)
                if x <= d and x < best:
                    best, why = x, ("fromh",)
            if why is not None:
                nxt[(a, b)] = best
                nprd[(a, b)] = why
    # acceptance at the last curve vertex
    ends = []
    lastL = L[m - 2]
    for w in range(nv):
        if lastL[w] < INF and hi_prev[w] == 1.0:
            ends.append(("L", w))
    for (a, b), x0 in sorted(H[m - 1].items()):
        iv = hint(m - 1, a, b)
        if iv is not None and iv[1] == 1.0:
            ends.append(("H", a, b))
    return L, H, predL, predH, ends


def _key(p) -> tuple:
    if p is None:
        return (INF,)
    order = {"start": 0, "corner": 1, "bottom": 2, "left": 3}
    return (order[p[0]],) + tuple(p[1:])


def _curve_trace(g: GeometricGraph, Q: np.ndarray, L, H, predL, predH, end):
    """Walk and per-curve-vertex alignment from the predecessor records."""
    m = len(Q)
    rev: list[int] = []
    align: list[Optional[Point]] = [None] * m
    if end[0] == "L":
        state = ("L", m - 2, end[1])
        rev.append(end[1])
        align[m - 1] = g.points[end[1]]
    else:
        _, a, b = end
        rev.append(b)
        x = H[m - 1][(a, b)]
        align[m - 1] = _lerp(g.points[a], g.points[b], x)
        state = ("H", m - 1, a, b)
    while True:
        if state[0] == "L":
            _, j, w = state
            p = predL[j][w]
            if p[0] == "start":
                rev.append(w)
                align[0] = g.points[w]
                break
            if p[0] == "corner":
                align[j] = g.points[w]
                state = ("L", j - 1, w)
            elif p[0] == "left":
                rev.append(w)
                state = ("L", j, p[1])
            else:
                _, a, b = p
                rev.append(b)
                state = ("H", j, a, b)
        else:
            _, j, a, b = state
            align[j] = _lerp(g.points[a], g.points[b], H[j][(a, b)])
            rev.append(b)
            p = predH[j][(a, b)]
            if p[0] == "fromleft":
                state = ("L", j - 1, a)
            else:
                state = ("H", j - 1, a, b)
    walk: list[int] = []
    for w in reversed(rev):
        if not walk or walk[-1] != w:
            walk.append(w)
    return walk, align


def _lerp(a, b, t: float) -> Point:
    return (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))


def _as_curve(Q) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[1] != 2 or len(Q) < 2:
        raise ValueError("query curve needs at least two 2-d points")
    return Q


def decide_curve(g: GeometricGraph, Q, delta: float, *, slack: float = 1e-12):
    """Decide whether some walk is within Fréchet distance ``delta`` of ``Q``.

    Returns ``(ok, walk)`` where ``walk`` is a witness (empty when ``ok`` is
    false).
    """
    Q = _as_curve(Q)
    if g.num_vertices == 0 or delta < 0:
        return False, []
    L, H, pL, pH, ends = _curve_search(g, Q, delta + _slack(g, Q, slack))
    if not ends:
        return False, []
    walk, _ = _curve_trace(g, Q, L, H, pL, pH, ends[0])
    return True, walk


def _curve_candidates(g: GeometricGraph, Q: np.ndarray):
    W = g.coords
    E = np.array(g.edges, dtype=int).reshape(-1, 2)
    A, B = W[E[:, 0]], W[E[:, 1]]
    cheap = [
        np.hypot(*(W[:, None, :] - Q[None, :, :]).transpose(2, 0, 1)).ravel(),
        _vertex_segment_values(W, Q[:-1], Q[1:]),
    ]
    if len(E):
        cheap.append(_vertex_segment_values(Q, A, B))
    fine = [_pair_bisector_values(W, Q[:-1], Q[1:])]
    if len(E):
        fine.append(_pair_bisector_values(Q, A, B))
    return np.unique(np.concatenate(cheap)), fine


def min_curve_frechet(g: GeometricGraph, Q, *, slack: float = 1e-12) -> MatchResult:
    """Exact ``min over walks`` of the Fréchet distance to curve ``Q``, with walk and alignment."""
    Q = _as_curve(Q)
    if g.num_vertices == 0:
        return MatchResult(INF, [])
    eta = _slack(g, Q, slack)
    stats = {"decisions": 0}

    def feasible(d: float) -> bool:
        stats["decisions"] += 1
        return bool(_curve_search(g, Q, d + eta)[4])

    cheap, fine = _curve_candidates(g, Q)
    k = _search_sorted(cheap, feasible)
    if k is None:
        # only possible for an edgeless graph that cannot follow Q
        return MatchResult(INF, [], diagnostics=stats)
    top = float(cheap[k])
    if k > 0:
        bottom = float(cheap[k - 1])
        bis = np.concatenate([f[(f > bottom) & (f < top)] for f in fine])
        bis = np.unique(bis)
        j = _search_sorted(bis, feasible)
        if j is not None:
            top = float(bis[j])
    L, H, pL, pH, ends = _curve_search(g, Q, top + eta)
    walk, align = _curve_trace(g, Q, L, H, pL, pH, ends[0])
    return MatchResult(top, walk, align, diagnostics=stats)
