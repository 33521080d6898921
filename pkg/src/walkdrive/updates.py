"""Incremental schedule maintenance after an insertion or a block removal."""
from __future__ import annotations

from .encoding import Itinerary, Visit, backward_values, leg_time, refresh_leg, set_arrival
from .instance import Instance, Mode


def _propagate(itinerary: Itinerary, instance: Instance, first: int, changed_to: int, lo: int) -> None:
    """Forward from ``first`` then backward down to ``lo`` and beyond.

    Arrivals are recomputed at least through ``changed_to`` (the last visit
    whose inbound arc changed) and then until a start time is unchanged.
    """
    visits = itinerary.visits
    pois = instance.pois
    n = len(visits)
    p = first
    while p < n:
        prev = visits[p - 1]
        v = visits[p]
        old = v.start
        set_arrival(v, pois[v.poi], prev.start + pois[prev.poi].visit_duration + prev.travel)
        if p >= changed_to and v.start == old:
            break
        p += 1
    stop = min(p, n - 1)
    for q in range(stop, lo - 1, -1):
        backward_values(itinerary, instance, q)
    for q in range(lo - 1, -1, -1):
        old = visits[q].max_shift
        backward_values(itinerary, instance, q, with_subtour=False)
        if visits[q].max_shift == old:
            break


def _refresh_legs(itinerary: Itinerary, instance: Instance, lo: int, hi: int) -> None:
    visits = itinerary.visits
    for p in range(lo, min(hi, len(visits) - 2) + 1):
        before = visits[p].violated
        refresh_leg(itinerary, instance, p)
        itinerary.violation_count += int(visits[p].violated) - int(before)


def apply_insertion(itinerary: Itinerary, instance: Instance, j: int, pos: int, mode_in: Mode, mode_out: Mode) -> None:
    """Insert PoI ``j`` at ``visits[pos]`` (the check must have passed)."""
    visits = itinerary.visits
    # The old i->k arc disappears; its flag is dropped before re-pricing.
    if visits[pos - 1].violated:
        itinerary.violation_count -= 1
        visits[pos - 1].violated = False
    visits[pos - 1].outbound_mode = mode_in
    visits.insert(pos, Visit(poi=j, outbound_mode=mode_out))
    for p in range(pos, len(visits)):
        itinerary.position[visits[p].poi] = p
    lo = itinerary.run_bounds(pos - 1)[0]
    hi = itinerary.run_bounds(pos + 1)[1]
    itinerary.relabel(lo, hi)
    _refresh_legs(itinerary, instance, pos - 1, hi)
    _propagate(itinerary, instance, pos, hi + 1, lo)


def removal_block(itinerary: Itinerary, sigma: int, rho: int) -> tuple[int, int] | None:
    """Positions ``(first, last)`` of the ``rho`` customers starting after ``sigma``."""
    first = 1 + sigma
    last = min(first + rho - 1, len(itinerary.visits) - 2)
    return None if rho < 1 or first > last else (first, last)


def _clear(itinerary: Itinerary, instance: Instance) -> list[int]:
    removed = itinerary.customer_pois()
    fresh = Itinerary.empty(instance, itinerary.day)
    itinerary.visits = fresh.visits
    itinerary.subtours = fresh.subtours
    itinerary.position = fresh.position
    itinerary.violation_count = fresh.violation_count
    itinerary.next_subtour_id = fresh.next_subtour_id
    return removed


def apply_removal(itinerary: Itinerary, instance: Instance, sigma: int, rho: int) -> list[int]:
    """Remove ``rho`` consecutive PoIs after the first ``sigma``; return their ids.

    A block that cuts into a subtour takes the rest of it along: the left
    neighbour falls back to the first PoI of its subtour and the right one
    moves past the last PoI of its subtour, so no surviving visit changes its
    pivot.  If the reconnected schedule would break a window (possible only
    on non-metric data) the day is emptied instead.
    """
    block = removal_block(itinerary, sigma, rho)
    if block is None:
        return []
    visits = itinerary.visits
    n = len(visits)
    lo, hi = block
    s_i, s_k = visits[lo - 1].subtour, visits[hi + 1].subtour
    if s_i is not None and s_i == s_k:
        mode = Mode.WALK
    else:
        mode = Mode.DRIVE
        if s_i is not None and visits[lo].subtour == s_i:
            lo = itinerary.position[itinerary.subtours[s_i].first] + 1
        if s_k is not None and visits[hi].subtour == s_k:
            hi = min(n - 2, itinerary.position[itinerary.subtours[s_k].last])

    vi, vk = visits[lo - 1], visits[hi + 1]
    pois = instance.pois
    pi_, pk = pois[vi.poi], pois[vk.poi]
    # Drive legs leave from the pivot: unchanged, or i itself after widening.
    pivot = pois[itinerary.pivot(lo - 1)].location
    t_new, _ = leg_time(instance, pi_.location, pk.location, mode, pivot, False)
    shift_i = t_new - (vk.arrival - pi_.visit_duration - vi.start)
    if shift_i > vk.wait + vk.max_shift:
        return _clear(itinerary, instance)

    removed = [v.poi for v in visits[lo:hi + 1]]
    for v in visits[lo - 1:hi + 1]:
        if v.violated:
            itinerary.violation_count -= 1
    for v in visits[lo:hi + 1]:
        itinerary.position.pop(v.poi, None)
        if v.subtour is not None:
            itinerary.subtours.pop(v.subtour, None)
    del visits[lo:hi + 1]
    vi.outbound_mode = mode
    vi.violated = False
    for p in range(lo, len(visits)):
        itinerary.position[visits[p].poi] = p
    r_lo = itinerary.run_bounds(lo - 1)[0]
    r_hi = itinerary.run_bounds(lo)[1]
    itinerary.relabel(r_lo, r_hi)
    _refresh_legs(itinerary, instance, lo - 1, r_hi)
    _propagate(itinerary, instance, lo, r_hi + 1, r_lo)
    return removed
