"""Benchmark sweeps with per-run metrics and aggregated tables."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from statistics import fmean
from typing import Iterable, Sequence

from .encoding import solution_to_dict
from .instance import Instance, InstanceError, load_instance
from .search import IlsConfig, SearchStats, solve
from .validate import ValidationReport, validate_solution

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BenchConfig:
    days: int
    radius_km: float
    clustering: bool

    @property
    def label(self) -> str:
        r = "inf" if math.isinf(self.radius_km) else f"{self.radius_km:g}"
        return f"m={self.days} r={r} clustering={'on' if self.clustering else 'off'}"


@dataclass
class BenchRecord:
    instance: str
    start: int
    days: int
    radius_km: float
    clustering: bool
    score: float
    dev_pct: float
    time_s: float
    pois_routed: int
    subtour_count: int
    improved_solutions: int
    iterations: int
    iterations_no_improve: int
    drive_share: float
    walk_share: float
    visit_share: float
    wait_share: float
    valid: bool
    violations: int


def shares(report: ValidationReport, days: int, c_max: float) -> dict[str, float]:
    """Drive, walk, visit and wait minutes as percentages of ``days * c_max``."""
    horizon = days * c_max
    return {
        "drive_share": 100.0 * report.drive_minutes / horizon,
        "walk_share": 100.0 * report.walk_minutes / horizon,
        "visit_share": 100.0 * report.visit_minutes / horizon,
        "wait_share": 100.0 * report.wait_minutes / horizon,
    }


def dev_pct(score: float, best: float) -> float:
    return 0.0 if best <= 0 else 100.0 * (best - score) / best


def make_record(name: str, instance: Instance, cfg: BenchConfig, report: ValidationReport,
                stats: SearchStats) -> BenchRecord:
    return BenchRecord(
        instance=name, start=instance.sites[instance.start_site].id, days=cfg.days,
        radius_km=cfg.radius_km, clustering=cfg.clustering, score=report.score, dev_pct=0.0,
        time_s=stats.elapsed, pois_routed=report.routed, subtour_count=report.subtours,
        improved_solutions=stats.improvements, iterations=stats.iterations,
        iterations_no_improve=stats.non_improving, valid=report.ok, violations=report.violations,
        **shares(report, cfg.days, instance.c_max),
    )


def fill_dev(records: list[BenchRecord]) -> None:
    """DEV against the best score per (instance, days, start) over all configs."""
    best: dict[tuple, float] = {}
    for r in records:
        key = (r.instance, r.days, r.start)
        best[key] = max(best.get(key, 0.0), r.score)
    for r in records:
        r.dev_pct = dev_pct(r.score, best[(r.instance, r.days, r.start)])


def run_bench(
    paths: Iterable[str | Path],
    configs: Sequence[BenchConfig],
    *,
    starts: Sequence[int] | None = None,
    ils: IlsConfig | None = None,
    cache_dir: str | Path | None = None,
) -> tuple[list[BenchRecord], list[str]]:
    """Solve every (instance, start, config) cell; returns records and skipped files."""
    records: list[BenchRecord] = []
    skipped: list[str] = []
    for path in paths:
        path = Path(path)
        try:
            base = load_instance(path, days=1)
        except (OSError, InstanceError, ValueError, KeyError) as exc:
            log.warning("skipping %s: %s", path, exc)
            skipped.append(f"{path}: {exc}")
            continue
        for start in starts or [base.sites[base.start_site].id]:
            for cfg in configs:
                inst = load_instance(path, days=cfg.days, start=start)
                result = solve(inst, ils, radius_km=cfg.radius_km, clustering=cfg.clustering, cache_dir=cache_dir)
                doc = solution_to_dict(result.solution, inst)
                report = validate_solution(inst, doc, result.space.assignment)
                if not report.ok:
                    log.error("%s %s: invalid solution: %s", path.name, cfg.label, report.errors[:3])
                records.append(make_record(path.stem, inst, cfg, report, result.stats))
    fill_dev(records)
    return records, skipped


AGG_COLUMNS = ("dev_pct", "time_s", "pois_routed", "subtour_count", "improved_solutions", "iterations",
               "iterations_no_improve", "drive_share", "walk_share", "visit_share", "wait_share")


def aggregate(records: Sequence[BenchRecord]) -> list[dict]:
    """One row per (days, radius, clustering), averaged over instances and starts."""
    groups: dict[tuple, list[BenchRecord]] = {}
    for r in records:
        groups.setdefault((r.days, r.radius_km, r.clustering), []).append(r)
    rows = []
    for (m, radius, clustering), rs in sorted(groups.items()):
        row = {"m": m, "r": radius, "clustering": clustering, "runs": len(rs),
               "valid": all(r.valid for r in rs)}
        for col in AGG_COLUMNS:
            row[col] = fmean(getattr(r, col) for r in rs)
        rows.append(row)
    return rows


def records_csv(records: Sequence[BenchRecord]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=[f.name for f in fields(BenchRecord)])
    writer.writeheader()
    for r in records:
        writer.writerow(asdict(r))
    return buf.getvalue()


def markdown_table(rows: Sequence[dict]) -> str:
    head = ["m", "r", "clust.", "DEV [%]", "TIME [s]", "PoIs", "|S|", "SOL", "IT", "IT_f",
            "T^d [%]", "T^w [%]", "T [%]", "W [%]"]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for row in rows:
        r = "inf" if math.isinf(row["r"]) else f"{row['r']:g}"
        cells = [str(row["m"]), r, "on" if row["clustering"] else "off"]
        cells += [f"{row[c]:.2f}" for c in ("dev_pct", "time_s")]
        cells += [f"{row[c]:.1f}" for c in ("pois_routed", "subtour_count", "improved_solutions",
                                           "iterations", "iterations_no_improve")]
        cells += [f"{row[c]:.2f}" for c in ("drive_share", "walk_share", "visit_share", "wait_share")]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
