"""``mapmatch`` command line.

Exit codes: 0 success, 2 bad input, 3 unreadable or mismatched index,
4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from typing import Optional

import numpy as np

from .curvequery import QueryConfig, curve_query, curve_report
from .geom import polyline_frechet
from .graph import GraphFormatError, generate, load_curve, load_graph, realism_report, save_graph
from .index import IndexFormatError, build_index, load_index, save_index
from .oracle import min_curve_frechet, min_segment_frechet

EXIT_INPUT, EXIT_INDEX, EXIT_INVARIANT = 2, 3, 4


class InvariantViolation(RuntimeError):
    pass


def _num(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return _num(float(obj))
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(doc, out=None) -> None:
    text = json.dumps(_clean(doc), sort_keys=True)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _threads() -> int:
    raw = os.environ.get("MAPMATCH_THREADS")
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"MAPMATCH_THREADS must be an integer, got {raw!r}") from None


def _read_graph(path):
    with open(path, "rb") as fh:
        return load_graph(fh.read())


def _read_curve(path):
    with open(path, "rb") as fh:
        return load_curve(fh.read())


def _read_walk(text: str) -> list[int]:
    if os.path.exists(text):
        with open(text, encoding="utf-8") as fh:
            text = fh.read()
    text = text.strip()
    if text.startswith("[") or text.startswith("{"):
        doc = json.loads(text)
        ids = doc.get("path") if isinstance(doc, dict) else doc
    else:
        ids = text.replace(",", " ").split()
    try:
        return [int(v) for v in ids]
    except (TypeError, ValueError):
        raise ValueError("path must be a list of vertex ids") from None


def _geojson(g, walk, Q) -> dict:
    feats = [{"type": "Feature", "properties": {"role": "query"},
              "geometry": {"type": "LineString", "coordinates": [list(map(float, q)) for q in Q]}}]
    if walk:
        feats.append({"type": "Feature", "properties": {"role": "match", "vertices": list(walk)},
                      "geometry": {"type": "LineString", "coordinates": [list(g.points[w]) for w in walk]}})
    return {"type": "FeatureCollection", "features": feats}


# -- commands -----------------------------------------------------------------


def cmd_build(args) -> int:
    g = _read_graph(args.graph)
    idx = build_index(g, args.eps, args.tau, args.leaf_cutoff, args.seed, eager=not args.lazy,
                      workers=_threads())
    t = time.perf_counter()
    size = save_index(idx, args.out)
    rep = dict(idx.report)
    rep["timings"]["write"] = time.perf_counter() - t
    rep.update({"index_bytes": size, "out": args.out, "eps": args.eps, "tau": idx.tau, "seed": args.seed})
    _emit(rep)
    return 0


def _query_doc(idx, Q, report: bool, cfg: QueryConfig) -> dict:
    if not report:
        return {"distance": curve_query(idx, Q, cfg)}
    res = curve_report(idx, Q, cfg)
    diag = dict(res.diagnostics)
    valid = bool(diag.pop("valid", False))
    if res.distance < math.inf and not valid:
        raise InvariantViolation(f"reported walk fails validation: {diag}")
    return {"distance": res.distance, "path": res.path, "valid": valid, "diagnostics": diag}


def cmd_query(args) -> int:
    idx = load_index(args.index)
    Q = _read_curve(args.curve)
    cfg = QueryConfig(tolerance=args.tolerance, seed=args.seed)
    doc = _query_doc(idx, Q, args.report or bool(args.geojson), cfg)
    if args.geojson:
        _emit(_geojson(idx.g, doc.get("path", []), Q), args.geojson)
    if not args.report:
        doc = {"distance": doc["distance"]}
    _emit(doc)
    return 0


def cmd_oracle(args) -> int:
    g = _read_graph(args.graph)
    Q = _read_curve(args.curve)
    if args.validate is not None:
        walk = _read_walk(args.validate)
        ok = g.is_walk(walk)
        d = polyline_frechet(g.embed(walk), Q) if ok else math.inf
        doc = {"distance": d, "path": walk, "valid": ok}
        if args.expect is not None:
            tol = 1e-9 * max(1.0, abs(args.expect))
            doc["valid"] = ok and d <= args.expect + tol
        _emit(doc)
        return 0
    if args.segment:
        u, v = args.segment
        res = min_segment_frechet(g, u, v, (tuple(Q[0]), tuple(Q[-1])))
    else:
        res = min_curve_frechet(g, Q)
    doc = res.to_dict()
    doc["valid"] = bool(res.path) and g.is_walk(res.path)
    doc["diagnostics"] = res.diagnostics
    _emit(doc)
    return 0


def cmd_stats(args) -> int:
    g = _read_graph(args.graph)
    rep = realism_report(g, args.density_mode, args.seed).to_dict()
    rep.update({"vertices": g.num_vertices, "edges": g.num_edges})
    _emit(rep)
    return 0


def _parse_params(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ValueError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k] = int(v)
        except ValueError:
            out[k] = float(v)
    return out


def _walk_curves(g, count: int, m: int, noise: float, seed: int) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    curves = []
    for _ in range(count):
        w = [int(rng.integers(g.num_vertices))]
        for _ in range(m - 1):
            nbrs = g.adj[w[-1]]
            w.append(nbrs[int(rng.integers(len(nbrs)))][0] if nbrs else w[-1])
        curves.append(g.coords[w] + rng.normal(0.0, noise, (m, 2)))
    return curves


def cmd_gen(args) -> int:
    params = _parse_params(args.param)
    if args.kind == "curve":
        g = _read_graph(args.graph) if args.graph else None
        if g is None:
            raise ValueError("gen curve needs --graph")
        Q = _walk_curves(g, 1, int(params.get("m", 4)), float(params.get("noise", 0.1)), args.seed)[0]
        _emit({"points": Q.tolist()}, args.out)
        return 0
    g = generate(args.kind, params, args.seed)
    if args.out:
        save_graph(g, args.out)
    else:
        print(json.dumps({"vertices": [list(p) for p in g.points], "edges": [list(e) for e in g.edges]}))
    return 0


def cmd_bench(args) -> int:
    idx = load_index(args.index)
    g = idx.g
    if args.workload:
        with open(args.workload, encoding="utf-8") as fh:
            doc = json.load(fh)
        curves = [np.asarray(c, dtype=float) for c in doc["curves"]]
    else:
        curves = _walk_curves(g, args.curves, args.m, args.noise, args.seed)
    rows = []
    oracle_t = cold_t = warm_t = 0.0
    for Q in curves:
        t = time.perf_counter()
        o = min_curve_frechet(g, Q).distance
        t1 = time.perf_counter()
        r = curve_query(idx, Q)
        t2 = time.perf_counter()
        curve_query(idx, Q)
        t3 = time.perf_counter()
        oracle_t += t1 - t
        cold_t += t2 - t1
        warm_t += t3 - t2
        rows.append({"m": len(Q), "oracle": o, "index": r, "ratio": r / o if o > 0 else None,
                     "oracle_s": t1 - t, "index_cold_s": t2 - t1, "index_warm_s": t3 - t2})
    summary = {
        "queries": len(curves),
        "n": g.n,
        "oracle_s": oracle_t,
        "index_cold_s": cold_t,
        "index_warm_s": warm_t,
        "speedup_cold": oracle_t / cold_t if cold_t > 0 else None,
        "speedup": oracle_t / warm_t if warm_t > 0 else None,
    }
    _emit({"summary": summary, "rows": rows if args.rows else []})
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mapmatch", description="Fréchet map matching on geometric graphs.")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build and save an index")
    b.add_argument("graph")
    b.add_argument("--eps", type=float, default=0.25)
    b.add_argument("--tau", type=float, default=None)
    b.add_argument("--leaf-cutoff", type=int, default=8)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.add_argument("--lazy", action="store_true", help="fill transit tables on first use")
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("query", help="match a curve against an index")
    q.add_argument("index")
    q.add_argument("curve")
    q.add_argument("--report", action="store_true", help="also return the matched walk")
    q.add_argument("--geojson", metavar="FILE", help="write query and match as GeoJSON")
    q.add_argument("--tolerance", type=float, default=None)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_query)

    o = sub.add_parser("oracle", help="exact reference computation")
    o.add_argument("graph")
    o.add_argument("curve")
    o.add_argument("--segment", nargs=2, type=int, metavar=("U", "V"),
                   help="best walk from U to V against the segment joining the curve ends")
    o.add_argument("--validate", metavar="PATH", help="Fréchet distance of a given walk (ids or file)")
    o.add_argument("--expect", type=float, default=None, help="with --validate: required upper bound")
    o.set_defaults(func=cmd_oracle)

    s = sub.add_parser("stats", help="realism estimates of a graph")
    s.add_argument("graph")
    s.add_argument("--density-mode", choices=("exact", "sampled"), default="exact")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_stats)

    gn = sub.add_parser("gen", help="generate a graph or a noisy curve")
    gn.add_argument("kind", choices=("perturbed-grid", "theta-graph", "curve"))
    gn.add_argument("--param", action="append", metavar="KEY=VALUE")
    gn.add_argument("--graph", help="graph to walk on (kind=curve)")
    gn.add_argument("--seed", type=int, default=0)
    gn.add_argument("--out")
    gn.set_defaults(func=cmd_gen)

    be = sub.add_parser("bench", help="index vs. oracle wall time")
    be.add_argument("index")
    be.add_argument("--workload", help='JSON file {"curves": [[[x, y], ...], ...]}')
    be.add_argument("--curves", type=int, default=10)
    be.add_argument("--m", type=int, default=4)
    be.add_argument("--noise", type=float, default=0.15)
    be.add_argument("--seed", type=int, default=0)
    be.add_argument("--rows", action="store_true", help="include per-query rows")
    be.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IndexFormatError as exc:
        print(f"mapmatch: {exc}", file=sys.stderr)
        return EXIT_INDEX
    except InvariantViolation as exc:
        print(f"mapmatch: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (GraphFormatError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"mapmatch: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
