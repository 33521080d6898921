"""Constant-time feasibility check for inserting a PoI between two visits."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .encoding import Itinerary, leg_time
from .instance import Instance, Mode

MODE_PAIRS: tuple[tuple[Mode, Mode], ...] = (
    (Mode.WALK, Mode.WALK),
    (Mode.WALK, Mode.DRIVE),
    (Mode.DRIVE, Mode.WALK),
    (Mode.DRIVE, Mode.DRIVE),
)


class InsertionKind(Enum):
    BASIC = "basic"
    ADVANCED = "advanced"
    SPECIAL = "special"


@dataclass(frozen=True, slots=True)
class InsertionCandidate:
    poi: int
    pos: int  # index in ``visits`` that the new PoI will occupy
    mode_in: Mode
    mode_out: Mode


@dataclass(frozen=True, slots=True)
class InsertionEvaluation:
    feasible: bool
    kind: InsertionKind
    shift_j: float
    arrival_j: float
    wait_j: float
    delta_k: float = 0.0
    shift_q: float = 0.0
    new_violations: int = 0
    reason: str = ""


def classify_insertion(current: Mode, mode_in: Mode, mode_out: Mode, k_in_subtour: bool) -> InsertionKind:
    """Which update rule applies, from the i->k mode and the two new arc modes."""
    if current is Mode.WALK and not k_in_subtour:
        raise AssertionError("a walking arc must end inside a subtour")
    if current is mode_out and (mode_out is Mode.DRIVE or mode_in is Mode.WALK):
        return InsertionKind.BASIC
    return InsertionKind.ADVANCED if k_in_subtour else InsertionKind.SPECIAL


def compute_shift_j(t_ij: float, wait_j: float, visit_j: float, t_jk: float, t_ik: float) -> float:
    return t_ij + wait_j + visit_j + t_jk - t_ik


def compute_delta_k(shift_j: float, wait_k: float, max_decrease_k: float) -> float:
    """Change of the start time at the end of k's subtour after a shift at k."""
    if shift_j >= 0:
        return shift_j - wait_k if shift_j > wait_k else 0.0
    return -(max_decrease_k if max_decrease_k < -shift_j else -shift_j)


def compute_shift_q(t_new_qb: float, delta_k: float, t_qb: float) -> float:
    return t_new_qb + delta_k - t_qb


def check_insertion(
    instance: Instance,
    itinerary: Itinerary,
    j: int,
    pos: int,
    mode_in: Mode,
    mode_out: Mode,
) -> InsertionEvaluation:
    """Evaluate inserting PoI ``j`` at ``visits[pos]`` (before the current occupant).

    Reads at most four visits: i, k, the last visit q of k's subtour and
    its successor b.  New arcs are priced with the mode preference enforced,
    so a feasible insertion never adds a violation.
    """
    visits = itinerary.visits
    vi = visits[pos - 1]
    vk = visits[pos]
    pois = instance.pois
    pi, pj, pk = pois[vi.poi], pois[j], pois[vk.poi]
    current = vi.outbound_mode
    kind = classify_insertion(current, mode_in, mode_out, vk.subtour is not None)

    i_loc, j_loc, k_loc = pi.location, pj.location, pk.location
    pivot_i = pois[itinerary.pivot(pos - 1)].location
    t_ij, _ = leg_time(instance, i_loc, j_loc, mode_in, pivot_i, True)
    drive_from = pivot_i if mode_in is Mode.WALK else j_loc
    t_jk, _ = leg_time(instance, j_loc, k_loc, mode_out, drive_from, True)
    ready = vi.start + pi.visit_duration + t_ij
    wait_j = pj.open - ready if ready < pj.open else 0.0
    shift_j = compute_shift_j(t_ij, wait_j, pj.visit_duration, t_jk, vi.travel)
    removed = 1 if vi.violated else 0

    if ready + wait_j > pj.close:
        return InsertionEvaluation(False, kind, shift_j, ready, wait_j, new_violations=-removed, reason="window j")

    if kind is InsertionKind.BASIC:
        ok = shift_j <= vk.wait + vk.max_shift
        return InsertionEvaluation(ok, kind, shift_j, ready, wait_j, new_violations=-removed,
                                   reason="" if ok else "shift k")

    if kind is InsertionKind.ADVANCED:
        q_pos = itinerary.position[itinerary.subtours[vk.subtour].last]
        if shift_j > vk.wait + vk.sub_max_shift:
            return InsertionEvaluation(False, kind, shift_j, ready, wait_j, new_violations=-removed,
                                       reason="shift subtour")
        delta = compute_delta_k(shift_j, vk.sub_wait, vk.max_decrease)
    else:
        q_pos = pos
        if shift_j > vk.wait + (pk.close - vk.start):
            return InsertionEvaluation(False, kind, shift_j, ready, wait_j, new_violations=-removed,
                                       reason="shift k")
        decrease = vk.arrival - pk.open if vk.arrival > pk.open else 0.0
        delta = compute_delta_k(shift_j, vk.wait, decrease)

    if q_pos + 1 >= len(visits):
        return InsertionEvaluation(True, kind, shift_j, ready, wait_j, delta, 0.0, -removed)
    vq = visits[q_pos]
    vb = visits[q_pos + 1]
    if mode_out is Mode.DRIVE:
        new_pivot = k_loc
    elif mode_in is Mode.WALK:
        new_pivot = pivot_i
    else:
        new_pivot = j_loc
    t_new, _ = leg_time(instance, pois[vq.poi].location, pois[vb.poi].location, vq.outbound_mode, new_pivot, True)
    shift_q = compute_shift_q(t_new, delta, vq.travel)
    removed += 1 if vq.violated else 0
    ok = shift_q <= vb.wait + vb.max_shift
    return InsertionEvaluation(ok, kind, shift_j, ready, wait_j, delta, shift_q, -removed,
                               "" if ok else "shift b")
