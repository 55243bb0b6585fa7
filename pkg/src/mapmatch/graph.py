"""Geometric graphs: model, JSON I/O, graph metric, realism estimators, generators."""

from __future__ import annotations

import heapq
import json
import logging
import math
import re
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .geom import Point, dist

log = logging.getLogger(__name__)

__all__ = [
    "GeometricGraph",
    "EdgePoint",
    "RealismReport",
    "GraphFormatError",
    "load_graph",
    "dumps_graph",
    "save_graph",
    "load_curve",
    "dumps_curve",
    "graph_distance",
    "dijkstra",
    "estimate_density",
    "estimate_stretch",
    "lanky_check",
    "realism_report",
    "generate",
]


class GraphFormatError(ValueError):
    """Malformed graph or curve input; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class GeometricGraph:
    """Undirected straight-line graph in the plane.

    Edges are stored once with ``u < v``; ``adj[w]`` lists ``(neighbor,
    edge_id)`` pairs sorted by neighbor id.  Instances are treated as
    immutable.
    """

    def __init__(self, vertices, edges: Iterable[tuple[int, int]] = ()):
        pts = np.asarray(vertices, dtype=float).reshape(-1, 2)
        if not np.all(np.isfinite(pts)):
            raise GraphFormatError("vertex coordinates must be finite")
        self.coords = pts
        self.points: list[Point] = [(float(x), float(y)) for x, y in pts]
        nv = len(pts)
        seen = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if not (0 <= u < nv and 0 <= v < nv):
                raise GraphFormatError(f"edge ({u}, {v}) references a missing vertex")
            if u == v:
                raise GraphFormatError(f"self-loop at vertex {u}")
            seen.add((min(u, v), max(u, v)))
        self.edges: list[tuple[int, int]] = sorted(seen)
        self.lengths = [dist(self.points[u], self.points[v]) for u, v in self.edges]
        adj: list[list[tuple[int, int]]] = [[] for _ in range(nv)]
        for eid, (u, v) in enumerate(self.edges):
            adj[u].append((v, eid))
            adj[v].append((u, eid))
        self.adj = [sorted(a) for a in adj]
        self._edge_index = {e: i for i, e in enumerate(self.edges)}

    @property
    def num_vertices(self) -> int:
        return len(self.points)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def n(self) -> int:
        """Complexity ``|V| + |E|``."""
        return self.num_vertices + self.num_edges

    def edge_id(self, u: int, v: int) -> int:
        return self._edge_index[(min(u, v), max(u, v))]

    def has_edge(self, u: int, v: int) -> bool:
        return (min(u, v), max(u, v)) in self._edge_index

    def is_walk(self, walk) -> bool:
        return len(walk) >= 1 and all(self.has_edge(a, b) for a, b in zip(walk, walk[1:]))

    def embed(self, walk) -> np.ndarray:
        return self.coords[np.asarray(walk, dtype=int)]

    def diameter(self) -> float:
        if self.num_vertices == 0:
            return 0.0
        span = self.coords.max(0) - self.coords.min(0)
        return float(math.hypot(*span))

    def degree(self, w: int) -> int:
        return len(self.adj[w])

    def subgraph_adjacency(self, vertex_set) -> dict[int, list[int]]:
        vs = set(vertex_set)
        return {w: [x for x, _ in self.adj[w] if x in vs] for w in vs}

    def components(self) -> list[list[int]]:
        seen = [False] * self.num_vertices
        out = []
        for s in range(self.num_vertices):
            if seen[s]:
                continue
            comp, stack = [], [s]
            seen[s] = True
            while stack:
                w = stack.pop()
                comp.append(w)
                for x, _ in self.adj[w]:
                    if not seen[x]:
                        seen[x] = True
                        stack.append(x)
            out.append(sorted(comp))
        return out

    def __eq__(self, other):
        return (
            isinstance(other, GeometricGraph)
            and self.points == other.points
            and self.edges == other.edges
        )

    def __repr__(self):
        return f"GeometricGraph(|V|={self.num_vertices}, |E|={self.num_edges})"


@dataclass(frozen=True)
class EdgePoint:
    """A point on edge ``edge`` at parameter ``t`` from ``edges[edge][0]``."""

    edge: int
    t: float
    position: Point

    @classmethod
    def on(cls, g: GeometricGraph, edge: int, t: float) -> "EdgePoint":
        u, v = g.edges[edge]
        a, b = g.points[u], g.points[v]
        return cls(edge, t, (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])))

    @classmethod
    def at_vertex(cls, g: GeometricGraph, w: int) -> "EdgePoint":
        # vertices are encoded with edge = -1 - w
        return cls(-1 - w, 0.0, g.points[w])

    @property
    def vertex(self) -> Optional[int]:
        return -1 - self.edge if self.edge < 0 else None


@dataclass(frozen=True)
class RealismReport:
    lambda_hat: int
    t_hat: float
    tau_hat: int
    max_degree: int
    density_mode: str = "exact"

    def to_dict(self) -> dict:
        t = self.t_hat if math.isfinite(self.t_hat) else None
        return {
            "lambda_hat": self.lambda_hat,
            "t_hat": t,
            "tau_hat": self.tau_hat,
            "max_degree": self.max_degree,
            "density_mode": self.density_mode,
        }


# ---------------------------------------------------------------- file I/O

_EDGE_RE = re.compile(r"\[\s*(-?\d+)\s*,\s*(-?\d+)\s*\]")


def _read_text(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def _edge_line(text: str, index: int) -> Optional[int]:
    pos = text.find('"edges"')
    if pos < 0:
        return None
    for i, m in enumerate(_EDGE_RE.finditer(text, pos)):
        if i == index:
            return text.count("\n", 0, m.start()) + 1
    return None


def load_graph(source) -> GeometricGraph:
    """Parse ``{"vertices": [[x, y], ...], "edges": [[u, v], ...]}``.

    ``source`` may be bytes, text, or a readable stream.  Duplicate edges are
    merged; malformed content raises :class:`GraphFormatError`.
    """
    text = _read_text(source)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(exc.msg, exc.lineno) from None
    if not isinstance(doc, dict) or "vertices" not in doc or "edges" not in doc:
        raise GraphFormatError('expected an object with "vertices" and "edges"', 1)
    verts = doc["vertices"]
    for i, p in enumerate(verts):
        if not (isinstance(p, list) and len(p) == 2 and all(isinstance(c, (int, float)) for c in p)):
            raise GraphFormatError(f"vertex {i} is not an [x, y] pair")
        if not all(math.isfinite(c) for c in p):
            raise GraphFormatError(f"vertex {i} has a non-finite coordinate")
    nv = len(verts)
    edges = []
    for i, e in enumerate(doc["edges"]):
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(c, int) for c in e)):
            raise GraphFormatError(f"edge {i} is not a [u, v] pair of ids", _edge_line(text, i))
        u, v = e
        if not (0 <= u < nv and 0 <= v < nv):
            raise GraphFormatError(f"edge {i} ({u}, {v}) references a missing vertex", _edge_line(text, i))
        if u == v:
            raise GraphFormatError(f"edge {i} is a self-loop at vertex {u}", _edge_line(text, i))
        edges.append((u, v))
    return GeometricGraph(np.array(verts, dtype=float).reshape(-1, 2), edges)


def dumps_graph(g: GeometricGraph) -> str:
    doc = {"vertices": [list(p) for p in g.points], "edges": [list(e) for e in g.edges]}
    return json.dumps(doc)


def save_graph(g: GeometricGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_graph(g))


def load_curve(source) -> np.ndarray:
    """Parse ``{"points": [[x, y], ...]}`` into a ``(m, 2)`` array."""
    text = _read_text(source)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphFormatError(exc.msg, exc.lineno) from None
    pts = doc.get("points") if isinstance(doc, dict) else None
    if not isinstance(pts, list) or not pts:
        raise GraphFormatError('expected an object with a non-empty "points" list', 1)
    try:
        arr = np.array(pts, dtype=float)
    except (TypeError, ValueError):
        raise GraphFormatError("points must be [x, y] pairs") from None
    if arr.ndim != 2 or arr.shape[1] != 2 or not np.all(np.isfinite(arr)):
        raise GraphFormatError("points must be finite [x, y] pairs")
    return arr


def dumps_curve(points) -> str:
    return json.dumps({"points": [[float(x), float(y)] for x, y in np.asarray(points)]})


# ------------------------------------------------------------ graph metric


def dijkstra(g: GeometricGraph, source: int, targets=None) -> list[float]:
    """Single-source shortest-path distances (``inf`` when unreachable)."""
    distv = [math.inf] * g.num_vertices
    distv[source] = 0.0
    heap = [(0.0, source)]
    remaining = set(targets) if targets is not None else None
    lengths, adj = g.lengths, g.adj
    while heap:
        d, w = heapq.heappop(heap)
        if d > distv[w]:
            continue
        if remaining is not None:
            remaining.discard(w)
            if not remaining:
                break
        for x, eid in adj[w]:
            nd = d + lengths[eid]
            if nd < distv[x]:
                distv[x] = nd
                heapq.heappush(heap, (nd, x))
    return distv


def graph_distance(g: GeometricGraph, u: int, v: int) -> float:
    """Shortest-path distance ``d_P(u, v)``; ``inf`` across components."""
    for w in (u, v):
        if not 0 <= w < g.num_vertices:
            raise IndexError(f"vertex id {w} out of range")
    if u == v:
        return 0.0
    return dijkstra(g, u, targets=[v])[v]


# -------------------------------------------------------- realism measures


def _count_near(segs: np.ndarray, centers: np.ndarray, radius: float, tol: float) -> np.ndarray:
    # number of segments within `radius` of each center
    a, b = segs[:, 0], segs[:, 1]
    d = b - a
    den = (d**2).sum(-1)
    rel = centers[:, None, :] - a[None]
    t = np.clip((rel * d[None]).sum(-1) / np.where(den > 0, den, 1.0), 0.0, 1.0)
    proj = a[None] + t[..., None] * d[None]
    dd = np.hypot(*(proj - centers[:, None, :]).transpose(2, 0, 1))
    return (dd <= radius + tol).sum(1)


def _line_line_pairs(P0, P1, R0, R1) -> np.ndarray:
    d1, d2 = P1 - P0, R1 - R0
    w = R0 - P0
    den = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (w[:, 0] * d2[:, 1] - w[:, 1] * d2[:, 0]) / den
        s = (w[:, 0] * d1[:, 1] - w[:, 1] * d1[:, 0]) / den
    ok = np.isfinite(t) & (t >= -1e-12) & (t <= 1 + 1e-12) & (s >= -1e-12) & (s <= 1 + 1e-12)
    return (P0[ok] + t[ok, None] * d1[ok])


def _circle_line_pairs(C, r: float, P0, P1) -> np.ndarray:
    d = P1 - P0
    f = P0 - C
    a = (d**2).sum(-1)
    b = 2 * (f * d).sum(-1)
    c = (f**2).sum(-1) - r * r
    disc = b * b - 4 * a * c
    out = []
    with np.errstate(divide="ignore", invalid="ignore"):
        sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
        for sign in (-1.0, 1.0):
            t = (-b + sign * sq) / (2 * a)
            ok = np.isfinite(t) & (t >= -1e-12) & (t <= 1 + 1e-12)
            out.append((P0 + t[:, None] * d)[ok])
    return np.concatenate(out)


def _circle_circle_pairs(C1, C2, r: float) -> np.ndarray:
    diff = C2 - C1
    d = np.hypot(*diff.T)
    ok = (d > 0) & (d <= 2 * r)
    c1, diff, d = C1[ok], diff[ok], d[ok]
    h = np.sqrt(np.maximum(r * r - d * d / 4, 0.0))
    perp = np.stack([-diff[:, 1], diff[:, 0]], 1) / d[:, None]
    mid = c1 + diff / 2
    return np.concatenate([mid + h[:, None] * perp, mid - h[:, None] * perp])


def _segment_distance_matrix(segs: np.ndarray) -> np.ndarray:
    a, b = segs[:, 0], segs[:, 1]

    def pt_seg(P, A, B):
        d = B - A
        den = (d**2).sum(-1)
        rel = P[:, None, :] - A[None]
        t = np.clip((rel * d[None]).sum(-1) / np.where(den > 0, den, 1.0), 0.0, 1.0)
        return np.hypot(*(A[None] + t[..., None] * d[None] - P[:, None, :]).transpose(2, 0, 1))

    D = np.minimum.reduce([pt_seg(a, a, b), pt_seg(b, a, b), pt_seg(a, a, b).T, pt_seg(b, a, b).T])

    def orient(P, Q, R):
        return (Q[..., 0] - P[..., 0]) * (R[..., 1] - P[..., 1]) - (Q[..., 1] - P[..., 1]) * (R[..., 0] - P[..., 0])

    A1, B1 = a[:, None], b[:, None]
    A2, B2 = a[None], b[None]
    cross = (np.sign(orient(A1, B1, A2)) * np.sign(orient(A1, B1, B2)) < 0) & (
        np.sign(orient(A2, B2, A1)) * np.sign(orient(A2, B2, B1)) < 0
    )
    D[cross] = 0.0
    return D


def _exact_density(g: GeometricGraph) -> int:
    # For a fixed radius r the maximum is attained at a vertex of the
    # arrangement of r-neighbourhoods of eligible edges (or anywhere inside a
    # lone neighbourhood); r only matters at the values |e| / 2.
    segs_all = np.array([[g.points[u], g.points[v]] for u, v in g.edges], dtype=float)
    lengths = np.array(g.lengths)
    tol = 1e-9 * max(g.diameter(), 1.0)
    dmat = _segment_distance_matrix(segs_all)
    best = 0
    for r in np.unique(lengths / 2):
        if r <= 0:
            continue
        elig = np.flatnonzero(lengths >= 2 * r)
        near = dmat[np.ix_(elig, elig)] <= 2 * r + tol
        if int(near.sum(1).max()) <= best:
            continue
        segs = segs_all[elig]
        a, b = segs[:, 0], segs[:, 1]
        d = b - a
        ln = np.hypot(*d.T)
        nrm = np.zeros_like(d)
        nz = ln > 0
        nrm[nz] = np.stack([-d[nz, 1], d[nz, 0]], 1) / ln[nz, None] * r
        pts = [a]
        i, j = np.nonzero(np.triu(near, 1))
        for si, sj in ((i, j), (j, i)):
            for s1 in (1.0, -1.0):
                P0, P1 = a[si] + s1 * nrm[si], b[si] + s1 * nrm[si]
                for s2 in (1.0, -1.0):
                    pts.append(_line_line_pairs(P0, P1, a[sj] + s2 * nrm[sj], b[sj] + s2 * nrm[sj]))
                for C in (a[sj], b[sj]):
                    pts.append(_circle_line_pairs(C, r, P0, P1))
        for C1 in (a[i], b[i]):
            for C2 in (a[j], b[j]):
                pts.append(_circle_circle_pairs(C1, C2, r))
        pts = np.concatenate(pts)
        for chunk in np.array_split(pts, len(pts) // 4000 + 1):
            if len(chunk):
                best = max(best, int(_count_near(segs, chunk, r, tol).max()))
    return best


def estimate_density(g: GeometricGraph, mode: str = "exact", *, samples: int = 2000, seed: int = 0,
                     cutoff: int = 2000) -> int:
    """Low-density parameter: max edges of length >= 2r meeting a radius-r disk.

    ``exact`` enumerates the radii ``|e|/2`` and, per radius, every vertex of
    the arrangement of edge neighbourhoods; ``sampled`` evaluates random
    disks and gives a lower bound.
    """
    if g.num_edges == 0:
        return 0
    if mode == "exact":
        if g.num_edges > cutoff:
            raise ValueError(f"exact density rejected for |E| = {g.num_edges} > {cutoff}")
        return _exact_density(g)
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    segs = np.array([[g.points[u], g.points[v]] for u, v in g.edges], dtype=float)
    lengths = np.array(g.lengths)
    best = 0
    radii = lengths / 2
    for _ in range(samples):
        r = float(rng.choice(radii))
        e = int(rng.integers(g.num_edges))
        c = segs[e, 0] + rng.random() * (segs[e, 1] - segs[e, 0]) + rng.normal(scale=r, size=2)
        elig = lengths >= 2 * r
        best = max(best, int(_count_near(segs[elig], c[None], r, 0.0)[0]))
    return best


def lanky_check(g: GeometricGraph, vertices=None) -> int:
    """Lankiness: max edges of length >= r cut by a radius-r disk at a vertex.

    An edge is cut when exactly one endpoint lies in the closed disk.  The
    count is piecewise constant in r, so it is evaluated at every critical
    radius and between consecutive ones.
    """
    if g.num_edges == 0:
        return 0
    ends = np.array(g.edges)
    lengths = np.array(g.lengths)
    best = 0
    for v in range(g.num_vertices) if vertices is None else vertices:
        dv = np.hypot(*(g.coords - g.coords[v]).T)
        crit = np.unique(np.concatenate([dv, lengths]))
        crit = crit[crit > 0]
        if len(crit) == 0:
            continue
        mids = (crit[:-1] + crit[1:]) / 2
        radii = np.concatenate([crit, mids, [crit[0] / 2]])
        du, dw = dv[ends[:, 0]], dv[ends[:, 1]]
        inside_u = du[None, :] <= radii[:, None]
        inside_w = dw[None, :] <= radii[:, None]
        elig = lengths[None, :] >= radii[:, None]
        cnt = ((inside_u ^ inside_w) & elig).sum(1)
        best = max(best, int(cnt.max()))
    return best


def estimate_stretch(g: GeometricGraph, pairs: Optional[int] = None, *, seed: int = 0,
                     cutoff: int = 300) -> float:
    """Spanner stretch: max ``d_P(u, v) / |u - v|`` over vertex pairs.

    All pairs are used when ``pairs`` is None and ``|V| <= cutoff``;
    otherwise ``pairs`` random source vertices are expanded fully.
    """
    nv = g.num_vertices
    if nv < 2:
        return 1.0
    if pairs is None and nv <= cutoff:
        sources = range(nv)
    else:
        rng = np.random.default_rng(seed)
        sources = sorted(set(rng.integers(nv, size=pairs or 64).tolist()))
    best = 1.0
    for s in sources:
        d = np.array(dijkstra(g, s))
        eu = np.hypot(*(g.coords - g.coords[s]).T)
        mask = eu > 0
        mask[s] = False
        if not np.all(np.isfinite(d[mask])):
            log.warning("graph is disconnected; stretch is infinite")
            return math.inf
        if mask.any():
            best = max(best, float((d[mask] / eu[mask]).max()))
    return best


def realism_report(g: GeometricGraph, density_mode: str = "exact", seed: int = 0) -> RealismReport:
    mode = density_mode
    if mode == "exact" and g.num_edges > 150:
        mode = "sampled"
    return RealismReport(
        lambda_hat=estimate_density(g, mode, seed=seed),
        t_hat=estimate_stretch(g, seed=seed),
        tau_hat=lanky_check(g),
        max_degree=max((g.degree(w) for w in range(g.num_vertices)), default=0),
        density_mode=mode,
    )


# -------------------------------------------------------------- generators


def _perturbed_grid(rows: int, cols: int, spacing: float = 1.0, perturbation: float = 0.0,
                    diagonals: float = 0.0, rng=None) -> GeometricGraph:
    if rows < 1 or cols < 1 or spacing <= 0 or not 0 <= perturbation < 0.5:
        raise ValueError("perturbed-grid needs rows, cols >= 1, spacing > 0, 0 <= perturbation < 0.5")
    pts = []
    for i in range(rows):
        for j in range(cols):
            dx, dy = rng.uniform(-perturbation, perturbation, 2) if perturbation else (0.0, 0.0)
            pts.append(((j + dx) * spacing, (i + dy) * spacing))
    edges = []
    vid = lambda i, j: i * cols + j  # noqa: E731
    for i in range(rows):
        for j in range(cols):
            if j + 1 < cols:
                edges.append((vid(i, j), vid(i, j + 1)))
            if i + 1 < rows:
                edges.append((vid(i, j), vid(i + 1, j)))
            if diagonals and i + 1 < rows and j + 1 < cols and rng.random() < diagonals:
                if rng.random() < 0.5:
                    edges.append((vid(i, j), vid(i + 1, j + 1)))
                else:
                    edges.append((vid(i, j + 1), vid(i + 1, j)))
    return GeometricGraph(pts, edges)


def theta_edges(points: np.ndarray, cones: int) -> list[tuple[int, int]]:
    """Directed theta-graph edges ``(source, target)``, at most one per cone."""
    out = []
    width = 2 * math.pi / cones
    for i, p in enumerate(points):
        rel = points - p
        ang = np.mod(np.arctan2(rel[:, 1], rel[:, 0]), 2 * math.pi)
        cone = np.minimum((ang // width).astype(int), cones - 1)
        for c in range(cones):
            bis = (c + 0.5) * width
            axis = np.array([math.cos(bis), math.sin(bis)])
            mask = cone == c
            mask[i] = False
            if not mask.any():
                continue
            idx = np.flatnonzero(mask)
            proj = rel[idx] @ axis
            out.append((i, int(idx[np.lexsort((idx, proj))[0]])))
    return out


def _theta_graph(n: int, cones: int = 8, extent: float = 10.0, rng=None) -> GeometricGraph:
    if n < 1 or cones < 2 or extent <= 0:
        raise ValueError("theta-graph needs n >= 1, cones >= 2, extent > 0")
    pts = rng.uniform(0, extent, size=(n, 2))
    return GeometricGraph(pts, theta_edges(pts, cones))


def generate(kind: str, params: Optional[dict] = None, seed: int = 0, *, with_report: bool = False):
    """Synthesize a test graph; deterministic for a fixed seed.

    ``perturbed-grid`` takes ``rows``, ``cols``, ``spacing``, ``perturbation``
    (fraction of spacing, < 0.5) and ``diagonals`` (probability per cell);
    ``theta-graph`` takes ``n``, ``cones`` and ``extent``.
    """
    params = dict(params or {})
    rng = np.random.default_rng(seed)
    if kind == "perturbed-grid":
        g = _perturbed_grid(rng=rng, **params)
    elif kind == "theta-graph":
        g = _theta_graph(rng=rng, **params)
    else:
        raise ValueError(f"unknown generator {kind!r}")
    if with_report:
        return g, realism_report(g, seed=seed)
    return g
