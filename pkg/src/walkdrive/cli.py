"""``walkdrive`` command line: solve, generate, validate, export, bench."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .bench import BenchConfig, aggregate, markdown_table, records_csv, run_bench
from .clustering import ClusterParams, load_or_cluster
from .encoding import solution_to_dict
from .geojson_export import ExportError, solution_geojson
from .instance import GeneratorParams, InstanceError, load_instance, save_instance, synthetic_document
from .search import IlsConfig, solve
from .validate import validate_solution

log = logging.getLogger("walkdrive")


def _radius(text: str) -> float:
    if text.lower() in ("inf", "infinity", "none"):
        return math.inf
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError("radius must be non-negative")
    return value


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _range(text: str) -> tuple[float, float]:
    lo, hi = (float(x) for x in text.split(","))
    return lo, hi


def _write_json(path: Path, doc: Any) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1) + "\n")


def _cluster_params(args: argparse.Namespace) -> ClusterParams:
    return ClusterParams(linkage=args.linkage, threshold=args.cut_minutes)


def _radius_field(r: float) -> float | None:
    return None if math.isinf(r) else r


def cmd_solve(args: argparse.Namespace) -> int:
    inst = load_instance(args.instance, days=args.days, start=args.start)
    config = IlsConfig(max_iter_no_improve=args.max_iter, time_limit=args.time_limit)
    began = datetime.now(timezone.utc)
    result = solve(inst, config, radius_km=args.radius_km, clustering=args.clustering,
                   cluster_params=_cluster_params(args), cache_dir=args.cache_dir)
    run = {
        "instance": inst.digest,
        "days": inst.horizon_days,
        "start": inst.sites[inst.start_site].id,
        "radius_km": _radius_field(args.radius_km),
        "clustering": args.clustering,
        "linkage": args.linkage,
        "cut_minutes": args.cut_minutes,
        "max_iter": args.max_iter,
        "time_limit": args.time_limit,
    }
    doc = solution_to_dict(result.solution, inst, meta={"run": run})
    report = validate_solution(inst, doc, result.space.assignment)
    _write_json(args.out, doc)
    stats = result.stats
    metrics = {
        "manifest": {**run, "instance_path": str(args.instance), "version": __version__,
                     "started": began.isoformat(), "finished": datetime.now(timezone.utc).isoformat()},
        "score": report.score, "violations": report.violations, "pois_routed": report.routed,
        "subtours": report.subtours, "iterations": stats.iterations, "improved_solutions": stats.improvements,
        "iterations_no_improve": stats.non_improving, "time_s": stats.elapsed, "stop_reason": stats.stop_reason,
        "valid": report.ok,
    }
    if args.metrics:
        _write_json(args.metrics, metrics)
    if args.geojson:
        _write_json(args.geojson, solution_geojson(inst, doc))
    print(f"{report.summary()} in {stats.elapsed:.2f}s ({stats.iterations} iterations, stop: {stats.stop_reason})")
    for e in report.errors:
        print(f"  {e}", file=sys.stderr)
    return 0 if report.ok else 1


def cmd_generate(args: argparse.Namespace) -> int:
    params = GeneratorParams(days=args.days, c_max=args.c_max,
                             **({"lat_range": args.lat_range} if args.lat_range else {}),
                             **({"lon_range": args.lon_range} if args.lon_range else {}))
    doc = synthetic_document(args.pois, args.seed, params)
    path = save_instance(doc, args.out)
    print(f"wrote {path} ({args.pois} PoIs, {args.days} days)")
    return 0


def _load_for_solution(args: argparse.Namespace) -> tuple[Any, dict, dict]:
    doc = json.loads(Path(args.solution).read_text())
    run = doc.get("meta", {}).get("run", {})
    days = args.days or run.get("days") or len(doc.get("days", [])) or None
    start = args.start if args.start is not None else run.get("start")
    inst = load_instance(args.instance, days=days, start=start)
    return inst, doc, run


def cmd_validate(args: argparse.Namespace) -> int:
    inst, doc, run = _load_for_solution(args)
    assignment = None
    clustering = args.clustering if args.clustering is not None else run.get("clustering", False)
    if clustering:
        radius = args.radius_km if args.radius_km is not None else (run.get("radius_km") or math.inf)
        params = ClusterParams(linkage=run.get("linkage", "complete"), threshold=run.get("cut_minutes"))
        _, assignment = load_or_cluster(inst, radius, params, args.cache_dir)
    report = validate_solution(inst, doc, assignment)
    print(report.summary())
    for e in report.errors:
        print(f"  {e}")
    return 0 if report.ok else 1


def cmd_export(args: argparse.Namespace) -> int:
    inst, doc, _ = _load_for_solution(args)
    try:
        fc = solution_geojson(inst, doc)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _write_json(args.out, fc)
    print(f"wrote {args.out} ({len(fc['features'])} features)")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    paths: list[Path] = []
    for p in args.instances:
        p = Path(p)
        paths.extend(sorted(p.glob("*.json")) if p.is_dir() else [p])
    if not paths:
        print("error: no instance files found", file=sys.stderr)
        return 2
    configs = [BenchConfig(m, r, c) for m in args.days for r in args.radius_km for c in args.clustering]
    ils = IlsConfig(max_iter_no_improve=args.max_iter, time_limit=args.time_limit)
    t0 = time.perf_counter()
    records, skipped = run_bench(paths, configs, starts=args.starts, ils=ils, cache_dir=args.cache_dir)
    rows = aggregate(records)
    table = markdown_table(rows)
    if args.csv:
        args.csv.parent.mkdir(parents=True, exist_ok=True)
        args.csv.write_text(records_csv(records))
    if args.markdown:
        args.markdown.parent.mkdir(parents=True, exist_ok=True)
        args.markdown.write_text(table)
    print(table, end="")
    for s in skipped:
        print(f"skipped {s}", file=sys.stderr)
    print(f"{len(records)} runs in {time.perf_counter() - t0:.1f}s")
    return 0 if records and all(r.valid for r in records) else 1


def _csv_of(kind):
    def parse(text: str):
        return [kind(x) for x in text.split(",") if x]
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="walkdrive", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def search_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--time-limit", type=float, default=60.0, help="seconds (default 60)")
        p.add_argument("--max-iter", type=int, default=150, help="iterations without improvement (default 150)")
        p.add_argument("--cache-dir", type=Path, default=None, help="where cluster labels are cached")

    p = sub.add_parser("solve", help="plan itineraries for an instance")
    p.add_argument("--instance", type=Path, required=True)
    p.add_argument("--days", type=int, default=None, help="number of itineraries (default: instance value)")
    p.add_argument("--start", type=int, default=None, help="start site id")
    p.add_argument("--radius-km", type=_radius, default=math.inf)
    p.add_argument("--clustering", type=_on_off, default=False, metavar="{on,off}")
    p.add_argument("--linkage", choices=("complete", "average"), default="complete")
    p.add_argument("--cut-minutes", type=float, default=None, help="dendrogram cut (default: max walking time)")
    p.add_argument("-o", "--out", type=Path, default=Path("solution.json"))
    p.add_argument("--metrics", type=Path, default=None)
    p.add_argument("--geojson", type=Path, default=None)
    search_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("generate", help="write a synthetic instance")
    p.add_argument("--pois", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--days", type=int, default=7)
    p.add_argument("--c-max", type=float, default=720.0)
    p.add_argument("--lat-range", type=_range, default=None, metavar="LO,HI")
    p.add_argument("--lon-range", type=_range, default=None, metavar="LO,HI")
    p.add_argument("-o", "--out", type=Path, required=True)
    p.set_defaults(func=cmd_generate)

    for name, func, helptext in (("validate", cmd_validate, "check a solution against an instance"),
                                 ("export", cmd_export, "write a solution as GeoJSON")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--instance", type=Path, required=True)
        p.add_argument("--solution", type=Path, required=True)
        p.add_argument("--days", type=int, default=None)
        p.add_argument("--start", type=int, default=None)
        if name == "validate":
            p.add_argument("--radius-km", type=_radius, default=None)
            p.add_argument("--clustering", type=_on_off, default=None, metavar="{on,off}")
            p.add_argument("--cache-dir", type=Path, default=None)
        else:
            p.add_argument("-o", "--out", type=Path, required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("bench", help="run a grid of configurations and tabulate metrics")
    p.add_argument("instances", nargs="+", help="instance files or directories")
    p.add_argument("--days", type=_csv_of(int), default=[1, 3])
    p.add_argument("--radius-km", type=_csv_of(_radius), default=[10.0, 20.0, 50.0, math.inf])
    p.add_argument("--clustering", type=_csv_of(_on_off), default=[True, False])
    p.add_argument("--starts", type=_csv_of(int), default=None, help="start site ids (default: instance start)")
    p.add_argument("--csv", type=Path, default=None)
    p.add_argument("--markdown", type=Path, default=None)
    search_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InstanceError, FileNotFoundError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
