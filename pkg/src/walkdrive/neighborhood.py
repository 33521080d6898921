"""Batch evaluation of every insertion of many candidates into one itinerary.

This is the numpy counterpart of :func:`walkdrive.feasibility.check_insertion`
applied to each (candidate, position, mode pair).  Arithmetic is written in the
same order as the scalar check so both produce bit-identical shifts.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoding import BIG_M, Itinerary
from .feasibility import MODE_PAIRS
from .instance import Instance, Mode


@dataclass(frozen=True)
class PoiTable:
    location: np.ndarray
    visit: np.ndarray
    open: np.ndarray
    close: np.ndarray
    score: np.ndarray
    group: np.ndarray
    day: np.ndarray

    @classmethod
    def from_instance(cls, instance: Instance) -> "PoiTable":
        ps = instance.pois
        return cls(
            location=np.array([p.location for p in ps], dtype=np.intp),
            visit=np.array([p.visit_duration for p in ps], dtype=float),
            open=np.array([p.open for p in ps], dtype=float),
            close=np.array([p.close for p in ps], dtype=float),
            score=np.array([p.score for p in ps], dtype=float),
            group=np.array([p.group_id for p in ps], dtype=np.intp),
            day=np.array([p.day for p in ps], dtype=np.intp),
        )


@dataclass(frozen=True)
class BestInsertions:
    """Per candidate: the cheapest feasible insertion, if any."""

    poi: np.ndarray
    found: np.ndarray
    pos: np.ndarray
    pair: np.ndarray  # index into MODE_PAIRS
    shift: np.ndarray  # Shift_j + Shift_q
    violations: np.ndarray  # change in violated arcs (<= 0)

    @classmethod
    def none(cls, pois: np.ndarray) -> "BestInsertions":
        n = len(pois)
        return cls(pois, np.zeros(n, bool), np.zeros(n, np.intp), np.zeros(n, np.intp),
                   np.full(n, np.inf), np.zeros(n, np.intp))


def _walk(instance: Instance, a, b):
    return np.where(instance.walk_preferred[a, b], instance.matrices.walk[a, b], BIG_M)


def _drive(instance: Instance, a, b, p):
    pref = instance.walk_preferred
    tw = np.where(pref[a, p], instance.matrices.walk[a, p], BIG_M)
    td = np.where((p == b) | ~pref[p, b], instance.matrices.drive[p, b], BIG_M)
    return tw + td


def best_insertions(
    instance: Instance,
    table: PoiTable,
    itinerary: Itinerary,
    candidates: np.ndarray,
    allowed: np.ndarray | None = None,
) -> BestInsertions:
    """Evaluate all insertions of ``candidates`` (PoI ids) into ``itinerary``.

    ``allowed`` optionally masks (candidate, position) pairs, columns
    matching positions ``1 .. len(visits) - 1``.
    """
    candidates = np.asarray(candidates, dtype=np.intp)
    if len(candidates) == 0:
        return BestInsertions.none(candidates)
    visits = itinerary.visits
    n = len(visits)
    npos = n - 1
    vid = np.array([v.poi for v in visits], dtype=np.intp)
    loc = table.location[vid]
    start = np.array([v.start for v in visits])
    arrival = np.array([v.arrival for v in visits])
    wait = np.array([v.wait for v in visits])
    max_shift = np.array([v.max_shift for v in visits])
    travel = np.array([v.travel for v in visits])
    violated = np.array([v.violated for v in visits])
    in_sub = np.array([v.subtour is not None for v in visits])
    sub_wait = np.array([0.0 if v.sub_wait is None else v.sub_wait for v in visits])
    sub_ms = np.array([0.0 if v.sub_max_shift is None else v.sub_max_shift for v in visits])
    me = np.array([0.0 if v.max_decrease is None else v.max_decrease for v in visits])
    walking = np.array([v.outbound_mode is Mode.WALK for v in visits])
    pivot_loc = table.location[np.array([itinerary.pivot(p) for p in range(n)], dtype=np.intp)]
    last_pos = np.arange(n)
    for st in itinerary.subtours.values():
        a, b = itinerary.position[st.first], itinerary.position[st.last]
        last_pos[a:b + 1] = b

    # Position p means "between visits p-1 (i) and p (k)".
    ip = np.arange(npos)
    kp = ip + 1
    i_loc, k_loc, piv_i = loc[ip], loc[kp], pivot_loc[ip]
    z_i, t_i = start[ip], table.visit[vid[ip]]
    t_ik, viol_ik = travel[ip], violated[ip]
    cur_walk = walking[ip]
    k_sub = in_sub[kp]
    w_k, ms_k = wait[kp], max_shift[kp]
    slack_sub = w_k + sub_ms[kp]
    slack_special = w_k + (table.close[vid[kp]] - start[kp])
    a_k, o_k = arrival[kp], table.open[vid[kp]]
    dec_special = np.where(a_k > o_k, a_k - o_k, 0.0)
    q = np.where(k_sub, last_pos[kp], kp)
    has_b = q + 1 < n
    qb = np.minimum(q + 1, n - 1)
    q_loc, b_loc = loc[q], loc[qb]
    t_qb, viol_qb = travel[q], violated[q]
    b_slack = wait[qb] + max_shift[qb]

    j = candidates
    j_loc = table.location[j][:, None]
    t_j, o_j, c_j = table.visit[j][:, None], table.open[j][:, None], table.close[j][:, None]
    i_l, k_l, pv = i_loc[None, :], k_loc[None, :], piv_i[None, :]
    ready_base = (z_i + t_i)[None, :]

    walk_ij = _walk(instance, i_l, j_loc)
    drive_ij = _drive(instance, i_l, j_loc, pv)
    walk_jk = _walk(instance, j_loc, k_l)
    drive_jk_from_pivot = _drive(instance, j_loc, k_l, pv)
    drive_jk_from_j = _drive(instance, j_loc, k_l, j_loc)

    shape = (len(j), npos)
    best_shift = np.full(shape, np.inf)
    best_viol = np.zeros(shape, dtype=np.intp)
    best_pair = np.zeros(shape, dtype=np.intp)
    skip = cur_walk & ~k_sub  # unreachable case; never a valid slot
    base_ok = ~skip[None, :] if allowed is None else (allowed & ~skip[None, :])

    for idx, (m_in, m_out) in enumerate(MODE_PAIRS):
        t_ij = walk_ij if m_in is Mode.WALK else drive_ij
        if m_out is Mode.WALK:
            t_jk = walk_jk
        else:
            t_jk = drive_jk_from_pivot if m_in is Mode.WALK else drive_jk_from_j
        ready = ready_base + t_ij
        wait_j = np.where(ready < o_j, o_j - ready, 0.0)
        shift_j = t_ij + wait_j + t_j + t_jk - t_ik[None, :]
        ok = base_ok & (ready + wait_j <= c_j)

        out_walk = m_out is Mode.WALK
        basic = (cur_walk == out_walk) & (m_out is Mode.DRIVE or m_in is Mode.WALK)
        adv = ~basic & k_sub
        basic_ok = shift_j <= (w_k + ms_k)[None, :]
        adv_slack = np.where(adv, slack_sub, slack_special)[None, :]
        wait_for_delta = np.where(adv, sub_wait[kp], w_k)[None, :]
        dec_for_delta = np.where(adv, me[kp], dec_special)[None, :]
        shifted_ok = shift_j <= adv_slack
        delta = np.where(
            shift_j >= 0,
            np.where(shift_j > wait_for_delta, shift_j - wait_for_delta, 0.0),
            -np.where(dec_for_delta < -shift_j, dec_for_delta, -shift_j),
        )
        if m_out is Mode.DRIVE:
            new_pivot = k_l
        elif m_in is Mode.WALK:
            new_pivot = pv
        else:
            new_pivot = j_loc
        t_new = _drive(instance, q_loc[None, :], b_loc[None, :], new_pivot)
        shift_q = t_new + delta - t_qb[None, :]
        q_ok = ~has_b[None, :] | (shift_q <= b_slack[None, :])
        changes_q = (~basic & has_b)[None, :]
        feasible = ok & np.where(basic[None, :], basic_ok, shifted_ok & q_ok)
        total = np.where(changes_q, shift_j + shift_q, shift_j)
        viol = -(viol_ik.astype(np.intp))[None, :] - np.where(changes_q, viol_qb.astype(np.intp)[None, :], 0)

        cand_shift = np.where(feasible, total, np.inf)
        better = (cand_shift < best_shift) | ((cand_shift == best_shift) & feasible & (viol < best_viol))
        best_shift = np.where(better, cand_shift, best_shift)
        best_viol = np.where(better, viol, best_viol)
        best_pair = np.where(better, idx, best_pair)

    # Across positions: minimum shift, then fewest violations, then first position.
    row_min = best_shift.min(axis=1)
    found = np.isfinite(row_min)
    tie = best_shift == row_min[:, None]
    viol_key = np.where(tie, best_viol, np.iinfo(np.intp).max)
    tie &= viol_key == viol_key.min(axis=1)[:, None]
    col = np.argmax(tie, axis=1)
    rows = np.arange(len(j))
    return BestInsertions(
        poi=j,
        found=found,
        pos=col + 1,
        pair=best_pair[rows, col],
        shift=np.where(found, row_min, np.inf),
        violations=np.where(found, best_viol[rows, col], 0),
    )
