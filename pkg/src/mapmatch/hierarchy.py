"""Balanced-separator hierarchy with transit tables and the 3-approximate straight query."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geom import point_segment_distance
from .graph import GeometricGraph
from .oracle import min_segment_frechet

__all__ = [
    "SeparatorNode",
    "SeparatorTree",
    "find_separator",
    "build_hierarchy",
    "straight_query",
    "lca",
]

INF = math.inf


@dataclass
class SeparatorNode:
    id: int
    vertices: list[int]
    separator: list[int]
    children: tuple[int, ...] = ()
    parent: Optional[int] = None
    depth: int = 0
    vpos: dict = field(default_factory=dict, repr=False)
    spos: dict = field(default_factory=dict, repr=False)
    table: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def _index(self) -> None:
        self.vpos = {w: i for i, w in enumerate(self.vertices)}
        self.spos = {s: i for i, s in enumerate(self.separator)}
        self.table = np.full((len(self.vertices), len(self.separator)), np.nan)


def find_separator(g: GeometricGraph, vertex_set, tau: float = 1.0, seed: int = 0, *,
                   leaf_cutoff: int = 8, tries: int = 8) -> list[int]:
    """Ball-growing balanced separator of the subgraph induced by ``vertex_set``.

    For several random centers the vertices are swept in order of distance;
    at every split position the endpoints of the cut edges on one side form
    a separator.  Among the splits leaving both sides with at most
    ``ceil(2k/3)`` vertices the smallest separator wins.
    """
    return _split(g, vertex_set, seed, leaf_cutoff, tries)[0]


def _split(g: GeometricGraph, vertex_set, seed: int, leaf_cutoff: int, tries: int = 8):
    verts = sorted(set(int(w) for w in vertex_set))
    k = len(verts)
    if k <= leaf_cutoff:
        raise ValueError(f"{k} vertices is within the leaf cutoff; make a leaf")
    cap = math.ceil(2 * k / 3)
    local = {w: i for i, w in enumerate(verts)}
    E = np.array([(local[a], local[b]) for a, b in g.edges if a in local and b in local],
                 dtype=np.int64).reshape(-1, 2)
    pts = g.coords[verts]
    rng = np.random.default_rng(seed)
    best = None
    for attempt in range(tries):
        c = pts[rng.integers(k)] if attempt % 2 == 0 else rng.uniform(pts.min(0), pts.max(0))
        order = np.lexsort((np.arange(k), np.hypot(*(pts - c).T)))
        pos = np.empty(k, dtype=np.int64)
        pos[order] = np.arange(k)
        pe = pos[E] if len(E) else E
        lo_end = np.where(pe[:, 0] < pe[:, 1], E[:, 0], E[:, 1]) if len(E) else E[:, 0]
        hi_end = np.where(pe[:, 0] < pe[:, 1], E[:, 1], E[:, 0]) if len(E) else E[:, 0]
        plo, phi = pos[lo_end], pos[hi_end]
        for i in range(1, k):
            cut = (plo < i) & (phi >= i)
            for side, ends in ((0, lo_end[cut]), (1, hi_end[cut])):
                S = np.unique(ends)
                a_size = i - (len(S) if side == 0 else 0)
                b_size = (k - i) - (len(S) if side == 1 else 0)
                if a_size > cap or b_size > cap:
                    continue
                key = (len(S), (a_size == 0) + (b_size == 0), attempt, i, side)
                if best is None or key < best[0]:
                    best = (key, S, order[:i], order[i:])
    _, S, inside, outside = best
    sset = set(S.tolist())
    sides = [sorted(verts[j] for j in part if j not in sset) for part in (inside, outside)]
    return sorted(verts[j] for j in sset), [p for p in sides if p]


class SeparatorTree:
    """Separator hierarchy plus transit tables ``D[u, s]`` for ``(u, s)`` in ``V_i x S_i``.

    Table entries are the exact best walk-to-segment distance of the full
    graph and are computed on first use unless the tree was built eagerly.
    """

    def __init__(self, g: GeometricGraph, nodes: list[SeparatorNode], locator: list[int],
                 tau: float, leaf_cutoff: int, seed: int):
        self.g = g
        self.nodes = nodes
        self.locator = locator
        self.tau = tau
        self.leaf_cutoff = leaf_cutoff
        self.seed = seed
        comp = [-1] * g.num_vertices
        for ci, cverts in enumerate(g.components()):
            for w in cverts:
                comp[w] = ci
        self.component = comp
        self.oracle_calls = 0
        self.last_examined = 0
        self._paths: dict = {}

    @property
    def root(self) -> int:
        return 0

    def depth(self) -> int:
        return max(n.depth for n in self.nodes) if self.nodes else 0

    def ancestors(self, i: int) -> list[int]:
        out = []
        while i is not None:
            out.append(i)
            i = self.nodes[i].parent
        return out

    def is_transit_pair(self, u: int, s: int) -> bool:
        """``(u, s)`` is stored iff the node holding ``s`` contains ``u``."""
        return self.locator[s] in self.ancestors(self.locator[u])

    def transit_distance(self, u: int, s: int) -> float:
        node = self.nodes[self.locator[s]]
        i, j = node.vpos.get(u), node.spos[s]
        if i is None:
            raise KeyError(f"({u}, {s}) is not a transit pair")
        val = node.table[i, j]
        if np.isnan(val):
            val = self._compute(u, s)
            node.table[i, j] = val
        return float(val)

    def transit_walk(self, u: int, s: int) -> list[int]:
        """An optimal walk for the stored pair (recomputed, then cached)."""
        key = (u, s)
        if u == s:
            return [u]
        if key not in self._paths:
            res = min_segment_frechet(self.g, u, s, (self.g.points[u], self.g.points[s]))
            self.oracle_calls += 1
            self._paths[key] = res.path
        return self._paths[key]

    def _compute(self, u: int, s: int) -> float:
        if u == s:
            return 0.0
        if self.component[u] != self.component[s]:
            return INF
        self.oracle_calls += 1
        res = min_segment_frechet(self.g, u, s, (self.g.points[u], self.g.points[s]))
        self._paths[(u, s)] = res.path
        return res.distance

    def fill_tables(self, workers: int = 1) -> None:
        jobs = [(u, s) for node in self.nodes for s in node.separator for u in node.vertices]
        if workers > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(workers) as ex:
                list(ex.map(lambda us: self.transit_distance(*us), jobs))
        else:
            for u, s in jobs:
                self.transit_distance(u, s)

    def table_entries(self) -> int:
        return sum(len(n.vertices) * len(n.separator) for n in self.nodes)

    def separator_constant(self, tau: Optional[float] = None) -> float:
        """Smallest ``c`` with ``|S_i| <= c * tau * sqrt(|V_i|)`` at every internal node."""
        tau = self.tau if tau is None else tau
        vals = [len(n.separator) / (max(tau, 1.0) * math.sqrt(len(n.vertices)))
                for n in self.nodes if not n.is_leaf]
        return max(vals, default=0.0)


def build_hierarchy(g: GeometricGraph, tau: float = 1.0, leaf_cutoff: int = 8, seed: int = 0, *,
                    eager: bool = True, workers: int = 1) -> SeparatorTree:
    """Top-down recursive decomposition; leaves keep every vertex as separator."""
    nodes: list[SeparatorNode] = []
    locator = [-1] * g.num_vertices
    stack = [(list(range(g.num_vertices)), None, 0)]
    while stack:
        verts, parent, depth = stack.pop()
        nid = len(nodes)
        if len(verts) <= leaf_cutoff:
            sep = list(verts)
            parts: list[list[int]] = []
        else:
            sep, parts = _split(g, verts, seed * 1_000_003 + nid, leaf_cutoff)
        node = SeparatorNode(nid, sorted(verts), sorted(sep), parent=parent, depth=depth)
        node._index()
        nodes.append(node)
        if parent is not None:
            nodes[parent].children = nodes[parent].children + (nid,)
        for s in sep:
            locator[s] = nid
        for part in reversed(parts):
            stack.append((part, nid, depth + 1))
    tree = SeparatorTree(g, nodes, locator, tau, leaf_cutoff, seed)
    if eager:
        tree.fill_tables(workers)
    return tree


def lca(tree: SeparatorTree, i: int, j: int) -> int:
    ni, nj = tree.nodes[i], tree.nodes[j]
    while ni.depth > nj.depth:
        ni = tree.nodes[ni.parent]
    while nj.depth > ni.depth:
        nj = tree.nodes[nj.parent]
    while ni.id != nj.id:
        ni, nj = tree.nodes[ni.parent], tree.nodes[nj.parent]
    return ni.id


def straight_query(tree: SeparatorTree, u: int, v: int, *, with_witness: bool = False):
    """3-approximation of the best walk from ``u`` to ``v`` against segment ``uv``.

    Every separator vertex ``s`` on the way from the lowest common ancestor
    to the root is tried with ``max(D[u, s], D[v, s]) + dist(s, uv)``.
    """
    g = tree.g
    for w in (u, v):
        if not 0 <= w < g.num_vertices:
            raise IndexError(f"unknown vertex {w}")
    tree.last_examined = 0
    if tree.component[u] != tree.component[v]:
        return (INF, None) if with_witness else INF
    pu, pv = g.points[u], g.points[v]
    best, arg = INF, None
    for a in tree.ancestors(lca(tree, tree.locator[u], tree.locator[v])):
        for s in tree.nodes[a].separator:
            tree.last_examined += 1
            val = max(tree.transit_distance(u, s), tree.transit_distance(v, s))
            val += point_segment_distance(g.points[s], pu, pv)
            if val < best or (val == best and arg is not None and s < arg):
                best, arg = val, s
    return (best, arg) if with_witness else best
