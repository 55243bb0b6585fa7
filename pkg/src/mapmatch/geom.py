"""Planar primitives: point/segment math, Fréchet distances, exponential grids.

Points are plain ``(x, y)`` float tuples, segments are pairs of points and
polylines are sequences of points (or ``(k, 2)`` arrays).  Free-space
intervals are ``(lo, hi)`` tuples with ``None`` standing for the empty set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

Point = tuple[float, float]
Segment = tuple[Point, Point]
ParamInterval = Optional[tuple[float, float]]

__all__ = [
    "Point",
    "Segment",
    "ParamInterval",
    "ExpGrid",
    "OUT_OF_RANGE",
    "dist",
    "lerp",
    "point_segment_distance",
    "segment_frechet",
    "free_interval",
    "frechet_decide",
    "frechet_critical_values",
    "polyline_frechet",
    "build_exp_grid",
    "snap_to_grid",
]


def dist(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def lerp(a: Point, b: Point, t: float) -> Point:
    return (a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]))


def point_segment_distance(w: Point, a: Point, b: Point) -> float:
    """Euclidean distance from ``w`` to the closed segment ``ab``."""
    dx, dy = b[0] - a[0], b[1] - a[1]
    den = dx * dx + dy * dy
    if den == 0.0:
        return dist(w, a)
    t = ((w[0] - a[0]) * dx + (w[1] - a[1]) * dy) / den
    t = min(1.0, max(0.0, t))
    return math.hypot(a[0] + t * dx - w[0], a[1] + t * dy - w[1])


def segment_frechet(s1: Segment, s2: Segment) -> float:
    """Fréchet distance between two directed segments.

    For two segments the linear matching is optimal, so the distance is the
    larger of the start-to-start and end-to-end distances.

    >>> segment_frechet(((0, 0), (1, 0)), ((0, 1), (1, 1)))
    1.0
    """
    return max(dist(s1[0], s2[0]), dist(s1[1], s2[1]))


def free_interval(w: Point, s: Segment, delta: float) -> ParamInterval:
    """Parameters ``t`` in [0, 1] with ``|w - s(t)| <= delta``.

    Returns ``None`` when no such parameter exists.  A degenerate segment
    yields either the full interval or ``None``.
    """
    (ax, ay), (bx, by) = s
    dx, dy = bx - ax, by - ay
    den = dx * dx + dy * dy
    if den == 0.0:
        return (0.0, 1.0) if math.hypot(w[0] - ax, w[1] - ay) <= delta else None
    tc = ((w[0] - ax) * dx + (w[1] - ay) * dy) / den
    cross = (w[0] - ax) * dy - (w[1] - ay) * dx
    rem = delta * delta - cross * cross / den
    if rem < 0.0:
        return None
    half = math.sqrt(rem / den)
    lo, hi = max(0.0, tc - half), min(1.0, tc + half)
    if lo > hi:
        return None
    return (lo, hi)


def _as_array(curve) -> np.ndarray:
    arr = np.asarray(curve, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) == 0:
        raise ValueError("polyline must be a non-empty sequence of 2-d points")
    return arr


def frechet_decide(a, b, delta: float) -> bool:
    """Alt–Godau decision: is the Fréchet distance of ``a`` and ``b`` <= delta?

    Cell ``(i, j)`` of the free-space diagram spans segment ``i`` of ``a``
    and segment ``j`` of ``b``; only the lower end of each reachable
    boundary interval is propagated since the free space is convex per cell.
    """
    A, B = _as_array(a), _as_array(b)
    P, Q = len(A), len(B)
    if P == 1 or Q == 1:
        one, other = (A, B) if P == 1 else (B, A)
        return bool(np.max(np.hypot(*(other - one[0]).T)) <= delta)
    if dist(A[0], B[0]) > delta or dist(A[-1], B[-1]) > delta:
        return False
    pa = [(float(x), float(y)) for x, y in A]
    pb = [(float(x), float(y)) for x, y in B]
    # left[i][j]: point a_i against segment b_j; bottom[i][j]: b_j against a_i
    left = [[free_interval(pa[i], (pb[j], pb[j + 1]), delta) for j in range(Q - 1)] for i in range(P)]
    bottom = [[free_interval(pb[j], (pa[i], pa[i + 1]), delta) for j in range(Q)] for i in range(P - 1)]

    reach_l = [[None] * (Q - 1) for _ in range(P)]
    reach_b = [[None] * Q for _ in range(P - 1)]
    ok = True
    for j in range(Q - 1):
        iv = left[0][j]
        if ok and iv is not None and iv[0] == 0.0:
            reach_l[0][j] = 0.0
            ok = iv[1] == 1.0
        else:
            ok = False
    ok = True
    for i in range(P - 1):
        iv = bottom[i][0]
        if ok and iv is not None and iv[0] == 0.0:
            reach_b[i][0] = 0.0
            ok = iv[1] == 1.0
        else:
            ok = False

    for i in range(P - 1):
        for j in range(Q - 1):
            lo_l, lo_b = reach_l[i][j], reach_b[i][j]
            if lo_l is None and lo_b is None:
                continue
            iv = left[i + 1][j]
            if iv is not None:
                if lo_b is not None:
                    reach_l[i + 1][j] = iv[0]
                elif lo_l <= iv[1]:
                    reach_l[i + 1][j] = max(lo_l, iv[0])
            iv = bottom[i][j + 1]
            if iv is not None:
                if lo_l is not None:
                    reach_b[i][j + 1] = iv[0]
                elif lo_b <= iv[1]:
                    reach_b[i][j + 1] = max(lo_b, iv[0])
    last_l = reach_l[P - 1][Q - 2]
    last_b = reach_b[P - 2][Q - 1]
    return (last_l is not None and left[P - 1][Q - 2][1] == 1.0) or (
        last_b is not None and bottom[P - 2][Q - 1][1] == 1.0
    )


def _pair_bisector_values(V: np.ndarray, S0: np.ndarray, S1: np.ndarray) -> np.ndarray:
    # For every vertex pair k < l of V and every segment (S0[j], S1[j]): the
    # distance to the point of the segment equidistant from both vertices.
    k, l = np.triu_indices(len(V), 1)
    if len(k) == 0 or len(S0) == 0:
        return np.empty(0)
    ak, al = V[k][:, None, :], V[l][:, None, :]
    d = (S1 - S0)[None, :, :]
    diff = al - ak
    num = (al**2).sum(-1) - (ak**2).sum(-1) - 2.0 * (S0[None, :, :] * diff).sum(-1)
    den = 2.0 * (d * diff).sum(-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num / den
    ok = np.isfinite(t) & (t >= 0.0) & (t <= 1.0)
    t = np.where(ok, t, 0.0)
    pts = S0[None, :, :] + t[..., None] * d
    vals = np.hypot(*(pts - ak).transpose(2, 0, 1))
    return vals[ok]


def _vertex_segment_values(V: np.ndarray, S0: np.ndarray, S1: np.ndarray) -> np.ndarray:
    if len(S0) == 0 or len(V) == 0:
        return np.empty(0)
    d = S1 - S0
    den = (d**2).sum(-1)
    rel = V[:, None, :] - S0[None, :, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(den > 0, (rel * d[None]).sum(-1) / np.where(den > 0, den, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = S0[None] + t[..., None] * d[None]
    return np.hypot(*(proj - V[:, None, :]).transpose(2, 0, 1)).ravel()


def frechet_critical_values(a, b) -> np.ndarray:
    """Sorted candidate values containing the Fréchet distance of ``a`` and ``b``.

    Endpoint distances, vertex-to-segment distances in both directions and
    the bisector events for vertex pairs of one curve against segments of
    the other.
    """
    A, B = _as_array(a), _as_array(b)
    parts = [
        np.array([dist(A[0], B[0]), dist(A[-1], B[-1])]),
        np.hypot(*(A[:, None, :] - B[None, :, :]).transpose(2, 0, 1)).ravel(),
        _vertex_segment_values(A, B[:-1], B[1:]),
        _vertex_segment_values(B, A[:-1], A[1:]),
        _pair_bisector_values(A, B[:-1], B[1:]),
        _pair_bisector_values(B, A[:-1], A[1:]),
    ]
    return np.unique(np.concatenate(parts))


def _diameter(*curves: np.ndarray) -> float:
    pts = np.concatenate(curves)
    return float(np.hypot(*(pts.max(0) - pts.min(0))))


def polyline_frechet(a, b, *, exact: bool = True, rel_tol: float = 1e-9, slack: float = 1e-12) -> float:
    """Fréchet distance between two polylines.

    With ``exact=True`` (default) a binary search over the critical values
    returns the distance up to floating point.  Otherwise the value is
    bracketed and bisected to ``rel_tol`` times the instance diameter; the
    upper end of the bracket is returned.

    >>> polyline_frechet([(0, 0), (2, 0)], [(0, 0), (1, 1), (2, 0)])
    1.0
    """
    A, B = _as_array(a), _as_array(b)
    if len(A) == 1 or len(B) == 1:
        one, other = (A, B) if len(A) == 1 else (B, A)
        return float(np.max(np.hypot(*(other - one[0]).T)))
    diam = max(_diameter(A, B), 1e-300)
    eta = slack * diam
    lower = max(dist(A[0], B[0]), dist(A[-1], B[-1]))
    big = (len(A) * (len(A) - 1) // 2) * (len(B) - 1) + (len(B) * (len(B) - 1) // 2) * (len(A) - 1)
    if exact and big <= 4_000_000:
        cand = frechet_critical_values(A, B)
        cand = cand[cand >= lower]
        if len(cand) and frechet_decide(A, B, float(cand[-1]) + eta):
            lo, hi = 0, len(cand) - 1
            while lo < hi:
                mid = (lo + hi) // 2
                if frechet_decide(A, B, float(cand[mid]) + eta):
                    hi = mid
                else:
                    lo = mid + 1
            return float(cand[lo])
    lo_v, hi_v = lower, lower + diam
    while hi_v - lo_v > rel_tol * diam:
        mid = 0.5 * (lo_v + hi_v)
        if frechet_decide(A, B, mid + eta):
            hi_v = mid
        else:
            lo_v = mid
    return hi_v


OUT_OF_RANGE = None
"""Marker returned by :func:`snap_to_grid` for points beyond ``r_max``."""

_OFFSETS = np.array([(i, j) for i in range(-4, 5) for j in range(-4, 5)], dtype=np.int64)


@dataclass(frozen=True)
class ExpGrid:
    """Exponential grid around ``center``.

    Ring ``j`` covers radii ``[r_min 2^j, r_min 2^(j+1)]`` with lattice
    spacing ``eps r_min 2^j / 8``.  Grid points are addressed by integer keys
    on the finest lattice (spacing ``h0``); the center has key ``(0, 0)``.
    """

    center: Point
    r_min: float
    r_max: float
    eps: float
    n_rings: int
    h0: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "h0", self.eps * self.r_min / 8.0)

    def spacing(self, ring: int) -> float:
        return self.h0 * (1 << ring)

    def band(self, ring: int) -> tuple[float, float]:
        r = self.r_min * (1 << ring)
        h = self.spacing(ring)
        return (r - 2.0 * h, min(2.0 * r + 2.0 * h, self.r_max))

    def position(self, key: tuple[int, int]) -> Point:
        return (self.center[0] + key[0] * self.h0, self.center[1] + key[1] * self.h0)

    def ring_keys(self, ring: int) -> np.ndarray:
        lo, hi = self.band(ring)
        step = 1 << ring
        n = int(math.ceil(hi / self.spacing(ring))) + 1
        ii, jj = np.meshgrid(np.arange(-n, n + 1), np.arange(-n, n + 1), indexing="ij")
        rad = np.hypot(ii, jj) * self.spacing(ring)
        keep = (rad >= lo) & (rad <= hi)
        return np.stack([ii[keep], jj[keep]], axis=1) * step

    @property
    def points(self) -> np.ndarray:
        """All grid point positions (materialized on demand; can be large)."""
        keys = {(0, 0)}
        for ring in range(self.n_rings):
            keys.update(map(tuple, self.ring_keys(ring).tolist()))
        arr = np.array(sorted(keys), dtype=float)
        return np.asarray(self.center) + arr * self.h0

    def count_estimate(self) -> int:
        # annulus area over cell area, per ring
        return 1 + int(self.n_rings * 3.0 * math.pi * 64.0 / self.eps**2)


def build_exp_grid(center: Point, base: float, eps: float) -> ExpGrid:
    """Exponential grid with ``r_min = eps base / 4`` and ``r_max = 4 base / eps``.

    >>> g = build_exp_grid((0.0, 0.0), 1.0, 0.5)
    >>> g.r_min, g.r_max, g.n_rings
    (0.125, 8.0, 7)
    """
    if not base > 0:
        raise ValueError(f"grid base must be positive, got {base}")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    r_min = eps * base / 4.0
    r_max = 4.0 * base / eps
    n_rings = int(math.ceil(math.log2(r_max / r_min) - 1e-12)) + 1
    return ExpGrid((float(center[0]), float(center[1])), r_min, r_max, eps, n_rings)


def snap_key(g: ExpGrid, w: Point):
    """Key of the grid point nearest to ``w``; ``OUT_OF_RANGE`` beyond ``r_max``."""
    rx, ry = w[0] - g.center[0], w[1] - g.center[1]
    rho = math.hypot(rx, ry)
    if rho < g.r_min:
        return (0, 0)
    if rho > g.r_max:
        return OUT_OF_RANGE
    ring = min(int(math.floor(math.log2(rho / g.r_min))), g.n_rings - 1)
    best, best_d = (0, 0), rho
    for k in (ring - 1, ring, ring + 1):
        if k < 0 or k >= g.n_rings:
            continue
        h = g.spacing(k)
        base = np.array([round(rx / h), round(ry / h)], dtype=np.int64)
        cells = base + _OFFSETS
        rad = np.hypot(cells[:, 0], cells[:, 1]) * h
        lo, hi = g.band(k)
        ok = (rad >= lo) & (rad <= hi)
        if not ok.any():
            continue
        cells = cells[ok]
        d = np.hypot(cells[:, 0] * h - rx, cells[:, 1] * h - ry)
        i = int(np.argmin(d))
        if d[i] < best_d:
            step = 1 << k
            best, best_d = (int(cells[i, 0]) * step, int(cells[i, 1]) * step), float(d[i])
    return best


def snap_to_grid(g: ExpGrid, w: Point):
    """Nearest grid point to ``w``.

    Points closer than ``r_min`` snap to the center; points farther than
    ``r_max`` give :data:`OUT_OF_RANGE`.
    """
    key = snap_key(g, w)
    if key is OUT_OF_RANGE:
        return OUT_OF_RANGE
    return g.position(key)
