"""Enriched itinerary encoding and the full-recompute schedule pass.

Each itinerary is a list of :class:`Visit` records, start dummy first and end
dummy last.  ``outbound_mode`` on a visit is the prescribed mode towards its
successor.  Maximal runs of two or more visits connected by walking arcs are
*subtours*: the car stays parked at the subtour's first PoI (the pivot), so a
drive leg leaving the subtour's last PoI walks back to the pivot first.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Any, Iterator

from .instance import Instance, Mode, PoI

# Sentinel travel time for arcs that break a mode preference under check=true.
BIG_M = 1e7


class InfeasibleScheduleError(ValueError):
    pass


@dataclass(slots=True)
class Visit:
    poi: int
    arrival: float = 0.0
    start: float = 0.0
    outbound_mode: Mode | None = None
    subtour: int | None = None
    wait: float = 0.0
    max_shift: float = 0.0
    sub_wait: float | None = None
    sub_max_shift: float | None = None
    max_decrease: float | None = None
    violated: bool = False
    # Travel time of the outbound arc, soft constraints relaxed.
    travel: float = 0.0


@dataclass(frozen=True, slots=True)
class Subtour:
    first: int
    last: int


@dataclass
class Itinerary:
    day: int
    visits: list[Visit]
    subtours: dict[int, Subtour] = field(default_factory=dict)
    violation_count: int = 0
    position: dict[int, int] = field(default_factory=dict)
    next_subtour_id: int = 1

    @classmethod
    def empty(cls, instance: Instance, day: int) -> "Itinerary":
        start = Visit(poi=instance.start_ids[day], outbound_mode=Mode.DRIVE)
        end = Visit(poi=instance.end_ids[day])
        itin = cls(day=day, visits=[start, end])
        return recompute_schedule(itin, instance)

    @classmethod
    def from_sequence(cls, instance: Instance, day: int, pois: list[int], modes: list[Mode]) -> "Itinerary":
        """Build from customer PoIs and the ``len(pois) + 1`` arc modes."""
        ids = [instance.start_ids[day], *pois, instance.end_ids[day]]
        if len(modes) != len(ids) - 1:
            raise ValueError("need one mode per arc")
        visits = [Visit(poi=p, outbound_mode=m) for p, m in zip(ids, [*modes, None])]
        return recompute_schedule(cls(day=day, visits=visits), instance)

    def __len__(self) -> int:
        return len(self.visits)

    def __iter__(self) -> Iterator[Visit]:
        return iter(self.visits)

    @property
    def size(self) -> int:
        """Number of routed PoIs, dummies excluded."""
        return len(self.visits) - 2

    @property
    def duration(self) -> float:
        return self.visits[-1].start

    def customer_pois(self) -> list[int]:
        return [v.poi for v in self.visits[1:-1]]

    def copy(self) -> "Itinerary":
        return Itinerary(
            day=self.day,
            visits=[copy.copy(v) for v in self.visits],
            subtours=dict(self.subtours),
            violation_count=self.violation_count,
            position=dict(self.position),
            next_subtour_id=self.next_subtour_id,
        )

    def reindex(self) -> None:
        self.position = {v.poi: n for n, v in enumerate(self.visits)}

    def pivot(self, pos: int) -> int:
        """PoI where the car is parked when leaving ``pos`` by car."""
        s = self.visits[pos].subtour
        return self.visits[pos].poi if s is None else self.subtours[s].first

    def run_bounds(self, pos: int) -> tuple[int, int]:
        """First and last position of the walking run through ``pos``."""
        visits = self.visits
        lo = pos
        while lo > 0 and visits[lo - 1].outbound_mode is Mode.WALK:
            lo -= 1
        hi = pos
        while hi < len(visits) - 1 and visits[hi].outbound_mode is Mode.WALK:
            hi += 1
        return lo, hi

    def relabel(self, lo: int, hi: int) -> None:
        """Re-register subtours for the run-aligned span ``lo..hi``."""
        visits = self.visits
        for v in visits[lo:hi + 1]:
            if v.subtour is not None:
                self.subtours.pop(v.subtour, None)
        p = lo
        while p <= hi:
            q = p
            while q < hi and visits[q].outbound_mode is Mode.WALK:
                q += 1
            if q > p:
                sid = self.next_subtour_id
                self.next_subtour_id += 1
                self.subtours[sid] = Subtour(visits[p].poi, visits[q].poi)
                for v in visits[p:q + 1]:
                    v.subtour = sid
            else:
                visits[p].subtour = None
                visits[p].sub_wait = visits[p].sub_max_shift = visits[p].max_decrease = None
            p = q + 1

    def normalized_subtours(self) -> list[int | None]:
        """Subtour labels renumbered 1, 2, ... in visiting order."""
        mapping: dict[int, int] = {}
        out: list[int | None] = []
        for v in self.visits:
            if v.subtour is None:
                out.append(None)
            else:
                out.append(mapping.setdefault(v.subtour, len(mapping) + 1))
        return out


@dataclass
class Solution:
    itineraries: list[Itinerary]
    routed_groups: set[int] = field(default_factory=set)
    total_score: float = 0.0

    @classmethod
    def empty(cls, instance: Instance) -> "Solution":
        return cls([Itinerary.empty(instance, d) for d in range(instance.horizon_days)])

    @property
    def violation_count(self) -> int:
        return sum(it.violation_count for it in self.itineraries)

    def copy(self) -> "Solution":
        return Solution([it.copy() for it in self.itineraries], set(self.routed_groups), self.total_score)

    def refresh_totals(self, instance: Instance) -> None:
        pois = [instance.pois[p] for it in self.itineraries for p in it.customer_pois()]
        self.routed_groups = {p.group_id for p in pois}
        self.total_score = float(sum(p.score for p in pois))

    def better_than(self, other: "Solution | None") -> bool:
        if other is None:
            return True
        if self.total_score != other.total_score:
            return self.total_score > other.total_score
        return self.violation_count < other.violation_count


# ---------------------------------------------------------------------------
# Travel times
# ---------------------------------------------------------------------------

def leg_time(instance: Instance, i_loc: int, k_loc: int, mode: Mode, pivot_loc: int, check: bool) -> tuple[float, bool]:
    """Travel time between locations; ``pivot_loc`` is ignored when walking."""
    walk = instance.matrices.walk
    pref = instance.walk_preferred
    if mode is Mode.WALK:
        bad = not pref[i_loc, k_loc]
        return (BIG_M if check and bad else float(walk[i_loc, k_loc])), bad
    bad_walk = not pref[i_loc, pivot_loc]
    # Reaching the car parked at the destination itself is not a drive.
    bad_drive = pivot_loc != k_loc and bool(pref[pivot_loc, k_loc])
    tw = BIG_M if check and bad_walk else float(walk[i_loc, pivot_loc])
    td = BIG_M if check and bad_drive else float(instance.matrices.drive[pivot_loc, k_loc])
    return tw + td, bad_walk or bad_drive


def travel_time(
    instance: Instance, i: int, k: int, mode: Mode, check: bool, p: int | None = None
) -> tuple[float, bool]:
    """``(t_ik, violated)`` between PoIs ``i`` and ``k``.

    For a drive leg ``p`` is the PoI where the car is parked (``i`` itself when
    ``i`` is outside any subtour).  Under ``check`` a leg that breaks the
    tourist's mode preference costs :data:`BIG_M` instead of its duration.
    """
    pois = instance.pois
    if mode is Mode.DRIVE:
        pivot = pois[i if p is None else p].location
    else:
        pivot = -1
    return leg_time(instance, pois[i].location, pois[k].location, mode, pivot, check)


def subtour_context(k: int, itinerary: Itinerary) -> tuple[int | None, int | None]:
    """``(q, b)``: last PoI of k's subtour (None outside one) and the PoI after it."""
    pos = itinerary.position[k]
    sid = itinerary.visits[pos].subtour
    q = None if sid is None else itinerary.subtours[sid].last
    q_pos = pos if q is None else itinerary.position[q]
    b = itinerary.visits[q_pos + 1].poi if q_pos + 1 < len(itinerary.visits) else None
    return q, b


# ---------------------------------------------------------------------------
# Per-visit recurrences
# ---------------------------------------------------------------------------

def refresh_leg(itinerary: Itinerary, instance: Instance, pos: int) -> None:
    v = itinerary.visits[pos]
    nxt = itinerary.visits[pos + 1]
    pois = instance.pois
    pivot = pois[itinerary.pivot(pos)].location if v.outbound_mode is Mode.DRIVE else -1
    v.travel, v.violated = leg_time(
        instance, pois[v.poi].location, pois[nxt.poi].location, v.outbound_mode, pivot, False
    )


def set_arrival(v: Visit, poi: PoI, arrival: float) -> None:
    v.arrival = arrival
    v.start = arrival if arrival >= poi.open else poi.open
    v.wait = poi.open - arrival if arrival < poi.open else 0.0


def backward_values(itinerary: Itinerary, instance: Instance, pos: int, with_subtour: bool = True) -> None:
    """Recompute MaxShift (and subtour-scoped slacks) at ``pos`` from ``pos + 1``."""
    visits = itinerary.visits
    v = visits[pos]
    poi = instance.pois[v.poi]
    slack = poi.close - v.start
    last = pos == len(visits) - 1
    if last:
        v.max_shift = instance.c_max - v.start if instance.c_max - v.start < slack else slack
    else:
        nxt = visits[pos + 1]
        chained = nxt.wait + nxt.max_shift
        v.max_shift = slack if slack < chained else chained
    if not with_subtour:
        return
    if v.subtour is None:
        v.sub_wait = v.sub_max_shift = v.max_decrease = None
        return
    decrease = v.arrival - poi.open if v.arrival > poi.open else 0.0
    if last or visits[pos + 1].subtour != v.subtour:
        v.sub_wait = v.wait
        v.sub_max_shift = slack
        v.max_decrease = decrease
    else:
        nxt = visits[pos + 1]
        v.sub_wait = nxt.sub_wait + v.wait
        chained = nxt.wait + nxt.sub_max_shift
        v.sub_max_shift = slack if slack < chained else chained
        v.max_decrease = nxt.max_decrease if nxt.max_decrease < decrease else decrease


def recompute_schedule(itinerary: Itinerary, instance: Instance, *, strict: bool = False) -> Itinerary:
    """Re-derive every annotation from visit order and arc modes, in place.

    Subtours are re-registered from the walking runs and renumbered 1, 2, ...
    With ``strict`` an :class:`InfeasibleScheduleError` lists any closed
    window or an itinerary longer than ``c_max``.
    """
    visits = itinerary.visits
    n = len(visits)
    itinerary.subtours = {}
    itinerary.next_subtour_id = 1
    for v in visits:
        v.subtour = None
    visits[-1].outbound_mode = None
    itinerary.relabel(0, n - 1)
    itinerary.reindex()
    pois = instance.pois

    set_arrival(visits[0], pois[visits[0].poi], 0.0)
    for pos in range(n - 1):
        refresh_leg(itinerary, instance, pos)
        v = visits[pos]
        set_arrival(visits[pos + 1], pois[visits[pos + 1].poi], v.start + pois[v.poi].visit_duration + v.travel)
    visits[-1].travel = 0.0
    visits[-1].violated = False
    for pos in range(n - 1, -1, -1):
        backward_values(itinerary, instance, pos)
    itinerary.violation_count = sum(1 for v in visits if v.violated)
    if strict:
        problems = hard_violations(itinerary, instance)
        if problems:
            raise InfeasibleScheduleError("; ".join(problems))
    return itinerary


def hard_violations(itinerary: Itinerary, instance: Instance) -> list[str]:
    problems = []
    for v in itinerary.visits:
        poi = instance.pois[v.poi]
        if v.start > poi.close:
            problems.append(f"day {itinerary.day}: PoI {v.poi} starts at {v.start} after closing {poi.close}")
    if itinerary.duration > instance.c_max:
        problems.append(f"day {itinerary.day}: duration {itinerary.duration} exceeds c_max {instance.c_max}")
    return problems


MODE_NAMES = {Mode.WALK: "walk", Mode.DRIVE: "drive", None: None}


def solution_to_dict(solution: Solution, instance: Instance, meta: dict[str, Any] | None = None) -> dict[str, Any]:
    days = []
    for it in solution.itineraries:
        labels = it.normalized_subtours()
        visits = []
        for v, label in zip(it.visits, labels):
            poi = instance.pois[v.poi]
            visits.append({
                "poi_id": None if poi.is_dummy else instance.sites[poi.location].id,
                "kind": poi.kind,
                "window": poi.window,
                "arrival": v.arrival,
                "start": v.start,
                "depart": v.start + poi.visit_duration,
                "mode_to_next": MODE_NAMES[v.outbound_mode],
                "subtour": label,
            })
        score = float(sum(instance.pois[p].score for p in it.customer_pois()))
        days.append({
            "day": it.day,
            "visits": visits,
            "score": score,
            "violations": it.violation_count,
            "duration": it.duration,
        })
    out: dict[str, Any] = {
        "instance": instance.digest,
        "days": days,
        "totals": {
            "score": solution.total_score,
            "violations": solution.violation_count,
            "duration": float(sum(it.duration for it in solution.itineraries)),
        },
    }
    if meta:
        out["meta"] = meta
    return out


def poi_lookup(instance: Instance) -> dict[tuple[int, int, int], int]:
    """Map ``(site id, day, window)`` to the PoI id."""
    return {
        (instance.sites[p.location].id, p.day, p.window): p.id
        for p in instance.pois if not p.is_dummy
    }


def _mode(name: str | None) -> Mode | None:
    return None if name is None else Mode(name)


def solution_from_dict(doc: dict[str, Any], instance: Instance) -> Solution:
    """Rebuild a solution from its JSON form; schedules are recomputed."""
    lookup = poi_lookup(instance)
    itineraries = [Itinerary.empty(instance, d) for d in range(instance.horizon_days)]
    for day_doc in doc["days"]:
        d = int(day_doc["day"])
        if not 0 <= d < instance.horizon_days:
            raise ValueError(f"day {d} outside the instance horizon")
        visits = day_doc["visits"]
        pois, modes = [], []
        for entry in visits[1:-1]:
            key = (int(entry["poi_id"]), d, int(entry.get("window", 0)))
            if key not in lookup:
                raise ValueError(f"unknown PoI {key[0]} (window {key[2]}) on day {d}")
            pois.append(lookup[key])
        modes = [_mode(e["mode_to_next"]) for e in visits[:-1]]
        itineraries[d] = Itinerary.from_sequence(instance, d, pois, modes)
    sol = Solution(itineraries)
    sol.refresh_totals(instance)
    return sol
