"""Approximate map matching under the Fréchet distance.

Typical use::

    from mapmatch import generate, build_index, curve_report
    g = generate("perturbed-grid", {"rows": 6, "cols": 6, "perturbation": 0.2}, seed=1)
    idx = build_index(g, eps=0.25)
    res = curve_report(idx, [(0.1, 0.2), (3.0, 2.1), (4.9, 5.2)])
"""

from .candidates import (
    CandidateSet,
    GonzalezSequence,
    PointIndex,
    Square,
    TroughIndex,
    build_trough_index,
    gonzalez_sequence,
    long_edges_near,
    point_candidates,
    vertex_candidates,
)
from .curvequery import QueryConfig, curve_decision, curve_query, curve_report
from .geom import (
    ExpGrid,
    build_exp_grid,
    dist,
    free_interval,
    frechet_decide,
    point_segment_distance,
    polyline_frechet,
    segment_frechet,
    snap_to_grid,
)
from .graph import (
    EdgePoint,
    GeometricGraph,
    GraphFormatError,
    RealismReport,
    estimate_density,
    estimate_stretch,
    generate,
    lanky_check,
    load_curve,
    load_graph,
    realism_report,
    save_graph,
)
from .hierarchy import SeparatorTree, build_hierarchy, find_separator, straight_query
from .index import IndexFormatError, MapMatchIndex, VersionMismatch, build_index, load_index, save_index
from .oracle import MatchResult, decide_curve, decide_segment, min_curve_frechet, min_segment_frechet
from .seggrid import SegGrid, build_pair_grids, report_path, segment_query_endpoints

__version__ = "0.1.0"

__all__ = [
    "CandidateSet",
    "EdgePoint",
    "ExpGrid",
    "GeometricGraph",
    "GonzalezSequence",
    "GraphFormatError",
    "IndexFormatError",
    "MapMatchIndex",
    "MatchResult",
    "PointIndex",
    "QueryConfig",
    "RealismReport",
    "SegGrid",
    "SeparatorTree",
    "Square",
    "TroughIndex",
    "VersionMismatch",
    "build_exp_grid",
    "build_hierarchy",
    "build_index",
    "build_pair_grids",
    "build_trough_index",
    "curve_decision",
    "curve_query",
    "curve_report",
    "decide_curve",
    "decide_segment",
    "dist",
    "estimate_density",
    "estimate_stretch",
    "find_separator",
    "frechet_decide",
    "free_interval",
    "generate",
    "gonzalez_sequence",
    "lanky_check",
    "load_curve",
    "load_graph",
    "load_index",
    "long_edges_near",
    "min_curve_frechet",
    "min_segment_frechet",
    "point_candidates",
    "point_segment_distance",
    "polyline_frechet",
    "realism_report",
    "report_path",
    "save_graph",
    "save_index",
    "segment_frechet",
    "segment_query_endpoints",
    "snap_to_grid",
    "straight_query",
    "vertex_candidates",
]
