"""Standalone checker for solution documents.

Schedules are re-derived from the instance matrices with a plain forward
pass; no code from the solver's encoding or update modules is used, so an
agreement between the two is a real cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .clustering import ClusterAssignment, contiguity_violations
from .instance import Instance

TOL = 1e-9


@dataclass
class ValidationReport:
    errors: list[str] = field(default_factory=list)
    score: float = 0.0
    violations: int = 0
    duration: float = 0.0
    drive_minutes: float = 0.0
    walk_minutes: float = 0.0
    visit_minutes: float = 0.0
    wait_minutes: float = 0.0
    routed: int = 0
    subtours: int = 0

    @property
    def ok(self) -> bool:
        return not self.errors

    def summary(self) -> str:
        head = "PASS" if self.ok else f"FAIL ({len(self.errors)} problems)"
        return f"{head}: score {self.score:g}, violations {self.violations}, routed {self.routed}"


def _walk_ok(instance: Instance, a: int, b: int) -> bool:
    mob = instance.mobility
    tw = float(instance.matrices.walk[a, b])
    td = float(instance.matrices.drive[a, b])
    if tw > mob.max_walking_time:
        return False
    return td <= mob.min_driving_time or tw <= td


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= TOL * max(1.0, abs(b))


def validate_solution(
    instance: Instance,
    doc: dict[str, Any],
    assignment: ClusterAssignment | None = None,
) -> ValidationReport:
    rep = ValidationReport()
    err = rep.errors.append
    windows: dict[tuple[int, int, int], Any] = {}
    for p in instance.pois:
        if not p.is_dummy:
            windows[(instance.sites[p.location].id, p.day, p.window)] = p
    groups_seen: dict[int, str] = {}
    walk, drive = instance.matrices.walk, instance.matrices.drive
    days_seen = set()

    for day_doc in doc.get("days", []):
        d = day_doc.get("day")
        tag = f"day {d}"
        if not isinstance(d, int) or not 0 <= d < instance.horizon_days:
            err(f"{tag}: day index outside the horizon")
            continue
        if d in days_seen:
            err(f"{tag}: listed twice")
            continue
        days_seen.add(d)
        visits = day_doc.get("visits", [])
        if len(visits) < 2 or visits[0].get("kind") != "start" or visits[-1].get("kind") != "end":
            err(f"{tag}: itinerary must begin at the start dummy and finish at the end dummy")
            continue
        # Resolve every visit to (location, open, close, visit minutes, score).
        rows = []
        bad = False
        for n, v in enumerate(visits):
            if n in (0, len(visits) - 1):
                close = 0.0 if n == 0 else instance.c_max
                rows.append((instance.start_site, 0.0, close, 0.0, 0.0, None))
                continue
            key = (v.get("poi_id"), d, v.get("window", 0))
            poi = windows.get(key)
            if poi is None:
                err(f"{tag}: PoI {key[0]} window {key[2]} is not available on this day")
                bad = True
                continue
            if poi.group_id in groups_seen:
                err(f"max-n: group {poi.group_id} routed twice ({groups_seen[poi.group_id]} and {tag})")
            groups_seen[poi.group_id] = tag
            rows.append((poi.location, poi.open, poi.close, poi.visit_duration, poi.score, poi.group_id))
        if bad:
            continue
        modes = [v.get("mode_to_next") for v in visits]
        if modes[-1] is not None or any(m not in ("walk", "drive") for m in modes[:-1]):
            err(f"{tag}: every arc needs a walk/drive mode and the end dummy none")
            continue

        # Car position: the first visit of the current walking run.
        pivots, runs, run = [], [], 0
        for n in range(len(rows)):
            if n == 0 or modes[n - 1] != "walk":
                pivot = rows[n][0]
                starts_run = n < len(rows) - 1 and modes[n] == "walk"
                run = run + 1 if starts_run else run
                current = run if starts_run else None
            pivots.append(pivot)
            runs.append(current)
        rep.subtours += len({r for r in runs if r is not None})

        t = 0.0
        violated = 0
        for n, (loc, o, c, dur, score, _) in enumerate(rows):
            if n:
                prev = rows[n - 1][0]
                if modes[n - 1] == "walk":
                    leg = float(walk[prev, loc])
                    rep.walk_minutes += leg
                    violated += not _walk_ok(instance, prev, loc)
                else:
                    piv = pivots[n - 1]
                    back, ride = float(walk[prev, piv]), float(drive[piv, loc])
                    leg = back + ride
                    rep.walk_minutes += back
                    rep.drive_minutes += ride
                    violated += (not _walk_ok(instance, prev, piv)) or (piv != loc and _walk_ok(instance, piv, loc))
                t = t + rows[n - 1][3] + leg
            arrival = t
            start = max(arrival, o)
            rep.wait_minutes += start - arrival
            rep.visit_minutes += dur
            v = visits[n]
            for name, value in (("arrival", arrival), ("start", start), ("depart", start + dur)):
                if name in v and not _close(float(v[name]), value):
                    err(f"{tag}: visit {n} reports {name} {v[name]} but the schedule gives {value}")
            if start > c + TOL:
                err(f"{tag}: visit {n} starts at {start} after its window closes at {c}")
            t = start
            rep.score += score
        reported = [v.get("subtour") for v in visits]
        if "subtour" in visits[0] and reported != runs:
            err(f"{tag}: subtour labels {reported} differ from walking runs {runs}")
        if t > instance.c_max + TOL:
            err(f"{tag}: duration {t} exceeds c_max {instance.c_max}")
        if "violations" in day_doc and day_doc["violations"] != violated:
            err(f"{tag}: reports {day_doc['violations']} violated arcs, recount gives {violated}")
        rep.violations += violated
        rep.duration += t
        rep.routed += len(rows) - 2
        if assignment is not None:
            labels = [int(assignment.labels[r[0]]) for r in rows]
            if any(lab < 0 for lab in labels):
                err(f"{tag}: routes a PoI outside the candidate radius")
            for lab in contiguity_violations(labels, assignment.depot_label):
                err(f"{tag}: cluster {lab} is visited in more than one block")

    totals = doc.get("totals", {})
    if "score" in totals and not _close(float(totals["score"]), rep.score):
        err(f"totals: score {totals['score']} but routed PoIs sum to {rep.score}")
    if "violations" in totals and totals["violations"] != rep.violations:
        err(f"totals: {totals['violations']} violations reported, recount gives {rep.violations}")
    if "duration" in totals and not _close(float(totals["duration"]), rep.duration):
        err(f"totals: duration {totals['duration']} but itineraries sum to {rep.duration}")
    if doc.get("instance") not in (None, "", instance.digest):
        err(f"solution was produced for instance {doc['instance']}, not {instance.digest}")
    return rep
