"""Candidate generation: Gonzalez ordering under the graph metric, square
queries on it, long-edge retrieval through troughs, and edge-point
candidate sets that cover every graph point inside a query square.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geom import Point, dist, point_segment_distance
from .graph import EdgePoint, GeometricGraph, dijkstra

__all__ = [
    "GonzalezSequence",
    "PointIndex",
    "TroughIndex",
    "CandidateSet",
    "Square",
    "gonzalez_sequence",
    "vertex_candidates",
    "build_trough_index",
    "in_trough",
    "long_edges_near",
    "point_candidates",
    "edge_point_distance",
]

INF = math.inf


@dataclass(frozen=True)
class Square:
    """Axis-parallel square with the given center and half side ``r``."""

    center: Point
    r: float

    def contains(self, w, slack: float = 0.0) -> bool:
        return (abs(w[0] - self.center[0]) <= self.r + slack
                and abs(w[1] - self.center[1]) <= self.r + slack)

    def scaled(self, factor: float) -> "Square":
        return Square(self.center, self.r * factor)


@dataclass
class GonzalezSequence:
    centers: list[int]
    radii: list[float]
    index: list[int]  # 1-based insertion index per vertex

    def __len__(self) -> int:
        return len(self.centers)

    def prefix_for(self, threshold: float) -> int:
        """Largest ``i`` with ``r_i >= threshold`` (0 if none); radii are non-increasing."""
        lo, hi = 0, len(self.radii)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.radii[mid] >= threshold:
                lo = mid + 1
            else:
                hi = mid
        return lo


def gonzalez_sequence(g: GeometricGraph, seed: int = 0, *, start: Optional[int] = None) -> GonzalezSequence:
    """Farthest-point ordering of all vertices under shortest-path distance.

    The first center is drawn from ``seed`` unless ``start`` is given.
    Each new center triggers a pruned Dijkstra that only lowers
    nearest-center labels.  Ties go to the smallest vertex id.
    """
    n = g.num_vertices
    if n == 0:
        return GonzalezSequence([], [], [])
    rng = np.random.default_rng(seed)
    label = [INF] * n
    index = [0] * n
    centers, radii = [], []
    c = int(rng.integers(n)) if start is None else int(start)
    for i in range(1, n + 1):
        centers.append(c)
        index[c] = i
        label[c] = 0.0
        heap = [(0.0, c)]
        while heap:
            d, w = heapq.heappop(heap)
            if d > label[w]:
                continue
            for nb, eid in g.adj[w]:
                nd = d + g.lengths[eid]
                if nd < label[nb]:
                    label[nb] = nd
                    heapq.heappush(heap, (nd, nb))
        far = max(range(n), key=lambda w: (label[w], -w))
        radii.append(label[far])
        c = far
    return GonzalezSequence(centers, radii, index)


class PointIndex:
    """2-d tree over vertices; every node keeps the smallest insertion index below it."""

    def __init__(self, coords: np.ndarray, rank):
        self.coords = np.asarray(coords, dtype=float)
        self.rank = np.asarray(rank, dtype=np.int64)
        # node arrays: point id, split axis, left, right, min rank, bbox
        self.pid: list[int] = []
        self.axis: list[int] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.minrank: list[int] = []
        self.bbox: list[tuple] = []
        self.root = self._build(list(range(len(self.coords))), 0) if len(self.coords) else -1

    def _build(self, ids: list[int], depth: int) -> int:
        if not ids:
            return -1
        ax = depth % 2
        ids.sort(key=lambda i: (self.coords[i, ax], i))
        mid = len(ids) // 2
        node = len(self.pid)
        self.pid.append(ids[mid])
        self.axis.append(ax)
        self.left.append(-1)
        self.right.append(-1)
        pts = self.coords[ids]
        self.bbox.append((*pts.min(0), *pts.max(0)))
        self.minrank.append(int(self.rank[ids].min()))
        l = self._build(ids[:mid], depth + 1)
        r = self._build(ids[mid + 1:], depth + 1)
        self.left[node], self.right[node] = l, r
        return node

    def query(self, sq: Square, max_rank: int) -> list[int]:
        """Vertex ids inside ``sq`` with insertion index ``<= max_rank``."""
        out: list[int] = []
        x0, y0 = sq.center[0] - sq.r, sq.center[1] - sq.r
        x1, y1 = sq.center[0] + sq.r, sq.center[1] + sq.r
        stack = [self.root] if self.root >= 0 else []
        while stack:
            nd = stack.pop()
            if self.minrank[nd] > max_rank:
                continue
            bx0, by0, bx1, by1 = self.bbox[nd]
            if bx0 > x1 or bx1 < x0 or by0 > y1 or by1 < y0:
                continue
            p = self.pid[nd]
            px, py = self.coords[p]
            if self.rank[p] <= max_rank and x0 <= px <= x1 and y0 <= py <= y1:
                out.append(p)
            for ch in (self.left[nd], self.right[nd]):
                if ch >= 0:
                    stack.append(ch)
        return sorted(out)


def vertex_candidates(seq: GonzalezSequence, index: PointIndex, sq: Square, eps: float) -> list[int]:
    """Centers covering every vertex of ``sq`` within graph distance ``eps * r``.

    ``sq.r`` is the half side.  Returns ``{c_1}`` when the first radius
    already beats ``eps * r``, otherwise the first ``i + 1`` centers inside
    the concentric square of twice the side, where ``r_i >= eps * r > r_{i+1}``.
    """
    if not len(seq):
        return []
    thr = eps * sq.r
    if seq.radii[0] < thr:
        return [seq.centers[0]]
    i = seq.prefix_for(thr)
    return index.query(sq.scaled(2.0), min(i + 1, len(seq)))


# -- troughs -------------------------------------------------------------------


def in_trough(a: Point, b: Point, eps: float, x: float, y: float, z: float) -> bool:
    """Membership of ``(x, y, z)`` in the trough of segment ab."""
    length = dist(a, b)
    return point_segment_distance((x, y), a, b) <= 4 * z <= 8 * length / eps


class TroughIndex:
    """Troughs hashed into cubic cells, one cell size per trough size class.

    A trough with bounding-box extent in ``(2^(k-1), 2^k]`` is registered in
    every cell of side ``2^k`` it overlaps (at most 8), so a stab inspects
    one cell per occupied size class.
    """

    def __init__(self, g: GeometricGraph, eps: float):
        if not 0 < eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        self.g = g
        self.eps = eps
        self.cells: dict[int, dict[tuple[int, int, int], list[int]]] = {}
        pts = g.points
        for eid, (u, v) in enumerate(g.edges):
            length = g.lengths[eid]
            if length == 0:
                continue
            reach = 8 * length / eps
            lo = (min(pts[u][0], pts[v][0]) - reach, min(pts[u][1], pts[v][1]) - reach, 0.0)
            hi = (max(pts[u][0], pts[v][0]) + reach, max(pts[u][1], pts[v][1]) + reach, 2 * length / eps)
            ext = max(h - l for h, l in zip(hi, lo))
            k = math.ceil(math.log2(ext))
            side = 2.0 ** k
            table = self.cells.setdefault(k, {})
            ranges = [range(math.floor(l / side), math.floor(h / side) + 1) for l, h in zip(lo, hi)]
            for i in ranges[0]:
                for j in ranges[1]:
                    for kk in ranges[2]:
                        table.setdefault((i, j, kk), []).append(eid)

    def node_count(self) -> int:
        return sum(len(t) for t in self.cells.values())

    def max_list(self) -> int:
        return max((len(v) for t in self.cells.values() for v in t.values()), default=0)

    def stab(self, x: float, y: float, z: float) -> list[int]:
        out = []
        pts = self.g.points
        for k, table in self.cells.items():
            side = 2.0 ** k
            for eid in table.get((math.floor(x / side), math.floor(y / side), math.floor(z / side)), ()):
                u, v = self.g.edges[eid]
                if in_trough(pts[u], pts[v], self.eps, x, y, z):
                    out.append(eid)
        return sorted(out)


def build_trough_index(g: GeometricGraph, eps: float) -> TroughIndex:
    return TroughIndex(g, eps)


def long_edges_near(index: TroughIndex, sq: Square, eps: Optional[float] = None) -> list[int]:
    """Edges whose trough contains ``(center, r)``.

    Contains every edge of length at least ``eps * r`` meeting the doubled
    square and only edges of length at least ``eps * r / 2`` within ``4r``
    of the center.
    """
    if eps is not None and abs(eps - index.eps) > 1e-15:
        raise ValueError(f"trough index was built for eps={index.eps}")
    return index.stab(sq.center[0], sq.center[1], sq.r)


# -- edge-point candidates -------------------------------------------------------


@dataclass
class CandidateSet:
    points: list[EdgePoint] = field(default_factory=list)
    provenance: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.points)

    def count(self, kind: str) -> int:
        return sum(1 for p in self.provenance if p == kind)


def _clip(a: Point, b: Point, sq: Square) -> Optional[tuple[float, float]]:
    """Parameter range of segment ab inside the square (Liang-Barsky)."""
    t0, t1 = 0.0, 1.0
    dx, dy = b[0] - a[0], b[1] - a[1]
    for p, q in ((-dx, a[0] - (sq.center[0] - sq.r)), (dx, (sq.center[0] + sq.r) - a[0]),
                 (-dy, a[1] - (sq.center[1] - sq.r)), (dy, (sq.center[1] + sq.r) - a[1])):
        if p == 0:
            if q < 0:
                return None
            continue
        t = q / p
        if p < 0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
        if t0 > t1:
            return None
    return t0, t1


def point_candidates(g: GeometricGraph, seq: GonzalezSequence, pindex: PointIndex, troughs: TroughIndex,
                     sq: Square, eps: Optional[float] = None) -> CandidateSet:
    """Edge points covering ``F`` inside ``sq`` within graph distance ``eps * r``.

    T1 are Gonzalez centers at accuracy ``eps / 2`` for the square grown by
    ``eps * r`` (so short edges poking out of the square are covered through
    their endpoints); T2 are the clipped ends plus a per-edge lattice of
    spacing ``eps * r`` on the long edges clipped to the doubled square.
    """
    eps = troughs.eps if eps is None else eps
    r = sq.r
    out = CandidateSet()
    seen: set = set()
    grown = Square(sq.center, r * (1 + eps))
    for w in vertex_candidates(seq, pindex, grown, eps / 2 / (1 + eps)):
        out.points.append(EdgePoint.at_vertex(g, w))
        out.provenance.append("T1")
        seen.add(("v", w))
    big = sq.scaled(2.0)
    for eid in long_edges_near(troughs, sq):
        u, v = g.edges[eid]
        span = _clip(g.points[u], g.points[v], big)
        if span is None:
            continue
        t0, t1 = span
        # lattice anchored at the edge start, shared by every square of this radius
        step = eps * r / g.lengths[eid] if r > 0 else 1.0
        ts = [t0] + [k * step for k in range(math.ceil(t0 / step), math.floor(t1 / step) + 1)] + [t1]
        for t in ts:
            t = min(max(t, 0.0), 1.0)
            if t <= 0.0 or t >= 1.0:
                w = u if t <= 0.0 else v
                key = ("v", w)
                ep = EdgePoint.at_vertex(g, w)
            else:
                key = ("e", eid, t)
                ep = EdgePoint.on(g, eid, t)
            if key in seen:
                continue
            seen.add(key)
            out.points.append(ep)
            out.provenance.append("T2")
    return out


def edge_point_distance(g: GeometricGraph, a: EdgePoint, b: EdgePoint, dist_from=None) -> float:
    """Graph distance between two points of the embedded graph.

    Leave ``a`` through either endpoint of its edge, travel the graph,
    enter ``b`` through either endpoint; points on a common edge may also
    move along it directly.  ``dist_from`` may supply a cached single-source
    distance function ``vertex -> list``.
    """
    def ends(p: EdgePoint):
        if p.vertex is not None:
            return [(p.vertex, 0.0)]
        u, v = g.edges[p.edge]
        L = g.lengths[p.edge]
        return [(u, p.t * L), (v, (1 - p.t) * L)]

    best = INF
    if a.vertex is None and b.vertex is None and a.edge == b.edge:
        best = abs(a.t - b.t) * g.lengths[a.edge]
    get = dist_from or (lambda s: dijkstra(g, s))
    for x, dx in ends(a):
        dd = get(x)
        for y, dy in ends(b):
            best = min(best, dx + dd[y] + dy)
    return best
