"""The full matching index and its binary file format.

File layout (all integers little endian)::

    b"MMIX" | u32 version | u32 section count
    per section: 4-byte tag | u64 payload length | u32 crc32 | payload

Sections: ``HEAD`` (JSON parameters), ``GRPH`` (graph JSON), ``HIER``
(node table and transit tables), ``PATH`` (cached transit walks), ``SGRD``
(grid tables with entries keyed by lattice offsets from the grid center),
``GONZ`` (center order and radii), ``TRGH`` (trough cells).
"""

from __future__ import annotations

import io
import json
import logging
import math
import struct
import time
import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .candidates import GonzalezSequence, PointIndex, TroughIndex, gonzalez_sequence
from .graph import GeometricGraph, dumps_graph, lanky_check, load_graph
from .hierarchy import SeparatorNode, SeparatorTree, build_hierarchy
from .seggrid import GridPairEntry, PairGridTable, SegGrid

__all__ = ["MapMatchIndex", "IndexFormatError", "VersionMismatch", "build_index", "save_index",
           "load_index", "MAGIC", "VERSION"]

log = logging.getLogger(__name__)

MAGIC = b"MMIX"
VERSION = 1


class IndexFormatError(ValueError):
    """Corrupt or unreadable index file."""


class VersionMismatch(IndexFormatError):
    pass


@dataclass
class MapMatchIndex:
    g: GeometricGraph
    eps: float
    tau: float
    leaf_cutoff: int
    seed: int
    tree: SeparatorTree
    seggrid: SegGrid
    gonzalez: GonzalezSequence
    points: PointIndex
    troughs: TroughIndex
    report: dict = field(default_factory=dict)

    # the user eps is split between the sub-structures; see curvequery
    @property
    def eps_segment(self) -> float:
        return self.eps / 4

    @property
    def eps_candidates(self) -> float:
        return self.eps / 6

    @property
    def eps_bisection(self) -> float:
        return self.eps / 4

    def budget(self) -> dict:
        return {"segment": self.eps_segment, "candidates": self.eps_candidates,
                "bisection": self.eps_bisection}


def build_index(g: GeometricGraph, eps: float = 0.25, tau: Optional[float] = None, leaf_cutoff: int = 8,
                seed: int = 0, *, eager: bool = True, workers: int = 1) -> MapMatchIndex:
    """Build every structure; ``tau`` defaults to the measured lankiness."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    t0 = time.perf_counter()
    if tau is None:
        tau = float(max(1, lanky_check(g))) if g.num_edges else 1.0
    if g.num_vertices > 16 and tau >= math.sqrt(g.num_vertices):
        # separators stop being sublinear; still build, just say so
        log.warning("tau=%g is large for %d vertices; expect big separators", tau, g.num_vertices)
    tree = build_hierarchy(g, tau, leaf_cutoff, seed, eager=eager, workers=workers)
    t1 = time.perf_counter()
    sg = SegGrid(g, tree, eps / 4)
    seq = gonzalez_sequence(g, seed)
    pidx = PointIndex(g.coords, seq.index) if g.num_vertices else PointIndex(np.zeros((0, 2)), [])
    tr = TroughIndex(g, eps / 6)
    t2 = time.perf_counter()
    idx = MapMatchIndex(g, eps, tau, leaf_cutoff, seed, tree, sg, seq, pidx, tr)
    idx.report = {
        "vertices": g.num_vertices,
        "edges": g.num_edges,
        "n": g.n,
        "tree_nodes": len(tree.nodes),
        "tree_depth": tree.depth(),
        "transit_pairs": tree.table_entries(),
        "c_sep": tree.separator_constant(),
        "trough_cells": tr.node_count(),
        "trough_max_list": tr.max_list(),
        "eps_budget": idx.budget(),
        "timings": {"hierarchy": t1 - t0, "other": t2 - t1},
    }
    return idx


# -- serialization ---------------------------------------------------------------


def _section(tag: bytes, payload: bytes) -> bytes:
    return tag + struct.pack("<QI", len(payload), zlib.crc32(payload)) + payload


def _u32s(xs) -> bytes:
    return np.asarray(list(xs), dtype="<u4").tobytes()


def _f64s(xs) -> bytes:
    return np.asarray(xs, dtype="<f8").tobytes()


def _pack_hierarchy(tree: SeparatorTree) -> bytes:
    out = io.BytesIO()
    out.write(struct.pack("<I", len(tree.nodes)))
    for nd in tree.nodes:
        parent = -1 if nd.parent is None else nd.parent
        out.write(struct.pack("<iiIII", parent, nd.depth, len(nd.vertices), len(nd.separator), len(nd.children)))
        out.write(_u32s(nd.vertices))
        out.write(_u32s(nd.separator))
        out.write(_u32s(nd.children))
        out.write(_f64s(nd.table.ravel()))
    out.write(_u32s(tree.locator))
    return out.getvalue()


def _pack_paths(tree: SeparatorTree) -> bytes:
    out = io.BytesIO()
    items = sorted(tree._paths.items())
    out.write(struct.pack("<I", len(items)))
    for (a, b), walk in items:
        out.write(struct.pack("<III", a, b, len(walk)))
        out.write(_u32s(walk))
    return out.getvalue()


def _pack_seggrid(sg: SegGrid) -> bytes:
    out = io.BytesIO()
    out.write(struct.pack("<d", sg.eps))
    tables = sorted(sg.tables.items())
    out.write(struct.pack("<I", len(tables)))
    for (a, b), t in tables:
        out.write(struct.pack("<IIdI", a, b, t.delta, len(t.entries)))
        for (ka, kb), e in sorted(t.entries.items()):
            out.write(struct.pack("<qqqqdI", ka[0], ka[1], kb[0], kb[1], e.distance, len(e.walk)))
            out.write(_u32s(e.walk))
    return out.getvalue()


def _pack_gonzalez(seq: GonzalezSequence) -> bytes:
    return struct.pack("<I", len(seq)) + _u32s(seq.centers) + _f64s(seq.radii)


def _pack_troughs(tr: TroughIndex) -> bytes:
    out = io.BytesIO()
    out.write(struct.pack("<dI", tr.eps, len(tr.cells)))
    for k in sorted(tr.cells):
        cells = tr.cells[k]
        out.write(struct.pack("<iI", k, len(cells)))
        for key in sorted(cells):
            out.write(struct.pack("<qqqI", *key, len(cells[key])))
            out.write(_u32s(cells[key]))
    return out.getvalue()


def dumps_index(idx: MapMatchIndex) -> bytes:
    head = {
        "eps": idx.eps,
        "tau": idx.tau,
        "leaf_cutoff": idx.leaf_cutoff,
        "seed": idx.seed,
        "c_sep": idx.report.get("c_sep"),
        "eps_budget": idx.budget(),
        "optimizer": "bisection over a certified bracket",
    }
    sections = [
        (b"HEAD", json.dumps(head, sort_keys=True).encode()),
        (b"GRPH", dumps_graph(idx.g).encode()),
        (b"HIER", _pack_hierarchy(idx.tree)),
        (b"PATH", _pack_paths(idx.tree)),
        (b"SGRD", _pack_seggrid(idx.seggrid)),
        (b"GONZ", _pack_gonzalez(idx.gonzalez)),
        (b"TRGH", _pack_troughs(idx.troughs)),
    ]
    body = b"".join(_section(t, p) for t, p in sections)
    return MAGIC + struct.pack("<II", VERSION, len(sections)) + body


def save_index(idx: MapMatchIndex, path) -> int:
    data = dumps_index(idx)
    with open(path, "wb") as fh:
        fh.write(data)
    return len(data)


class _Reader:
    def __init__(self, data: bytes, name: str):
        self.data, self.pos, self.name = data, 0, name

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise IndexFormatError(f"section {self.name} truncated")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def u32s(self, k: int) -> list[int]:
        return np.frombuffer(self.take(4 * k), dtype="<u4").astype(int).tolist()

    def f64s(self, k: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * k), dtype="<f8").copy()


def _read_sections(data: bytes) -> dict[str, bytes]:
    if data[:4] != MAGIC:
        raise IndexFormatError("not an index file (bad magic)")
    rd = _Reader(data, "header")
    rd.take(4)
    version, count = rd.unpack("<II")
    if version != VERSION:
        raise VersionMismatch(f"index version {version}, expected {VERSION}")
    out = {}
    for _ in range(count):
        tag = rd.take(4).decode("ascii", "replace")
        length, crc = rd.unpack("<QI")
        payload = rd.take(length)
        if zlib.crc32(payload) != crc:
            raise IndexFormatError(f"checksum mismatch in section {tag}")
        out[tag] = payload
    return out


def loads_index(data: bytes) -> MapMatchIndex:
    sec = _read_sections(data)
    for tag in ("HEAD", "GRPH", "HIER", "PATH", "SGRD", "GONZ", "TRGH"):
        if tag not in sec:
            raise IndexFormatError(f"missing section {tag}")
    head = json.loads(sec["HEAD"])
    g = load_graph(sec["GRPH"])
    rd = _Reader(sec["HIER"], "HIER")
    (count,) = rd.unpack("<I")
    nodes = []
    for nid in range(count):
        parent, depth, nv, ns, nc = rd.unpack("<iiIII")
        verts, sep, kids = rd.u32s(nv), rd.u32s(ns), rd.u32s(nc)
        nd = SeparatorNode(nid, verts, sep, tuple(kids), None if parent < 0 else parent, depth)
        nd._index()
        nd.table = rd.f64s(nv * ns).reshape(nv, ns)
        nodes.append(nd)
    locator = rd.u32s(g.num_vertices)
    tree = SeparatorTree(g, nodes, locator, head["tau"], head["leaf_cutoff"], head["seed"])
    rd = _Reader(sec["PATH"], "PATH")
    (count,) = rd.unpack("<I")
    for _ in range(count):
        a, b, k = rd.unpack("<III")
        tree._paths[(a, b)] = rd.u32s(k)
    rd = _Reader(sec["SGRD"], "SGRD")
    (seps,) = rd.unpack("<d")
    sg = SegGrid(g, tree, seps)
    (count,) = rd.unpack("<I")
    for _ in range(count):
        a, b, delta, k = rd.unpack("<IIdI")
        t = PairGridTable(sg, a, b, delta)
        for _ in range(k):
            ka0, ka1, kb0, kb1, d, wl = rd.unpack("<qqqqdI")
            walk = tuple(rd.u32s(wl))
            t.entries[((ka0, ka1), (kb0, kb1))] = GridPairEntry(d, walk[1] if len(walk) > 1 else walk[0], walk)
        sg.tables[(a, b)] = t
    rd = _Reader(sec["GONZ"], "GONZ")
    (k,) = rd.unpack("<I")
    centers = rd.u32s(k)
    radii = rd.f64s(k).tolist()
    index = [0] * g.num_vertices
    for i, c in enumerate(centers):
        index[c] = i + 1
    seq = GonzalezSequence(centers, radii, index)
    pidx = PointIndex(g.coords, seq.index) if g.num_vertices else PointIndex(np.zeros((0, 2)), [])
    rd = _Reader(sec["TRGH"], "TRGH")
    teps, nclass = rd.unpack("<dI")
    tr = TroughIndex.__new__(TroughIndex)
    tr.g, tr.eps, tr.cells = g, teps, {}
    for _ in range(nclass):
        kk, ncell = rd.unpack("<iI")
        cells = tr.cells.setdefault(kk, {})
        for _ in range(ncell):
            i, j, z, ln = rd.unpack("<qqqI")
            cells[(i, j, z)] = rd.u32s(ln)
    idx = MapMatchIndex(g, head["eps"], head["tau"], head["leaf_cutoff"], head["seed"], tree, sg, seq, pidx, tr)
    idx.report = {"c_sep": head.get("c_sep"), "eps_budget": head.get("eps_budget")}
    return idx


def load_index(path) -> MapMatchIndex:
    with open(path, "rb") as fh:
        return loads_index(fh.read())
