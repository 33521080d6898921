"""Iterated local search: best-ratio insertion plus adaptive block removal."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clustering import (
    ClusterAssignment,
    ClusterParams,
    ItineraryLabels,
    allowed_matrix,
    insertion_allowed,
    labels_for_route,
    load_or_cluster,
    radius_filter,
    update_labels,
)
from .encoding import Itinerary, Solution
from .feasibility import MODE_PAIRS, check_insertion
from .instance import Instance
from .neighborhood import BestInsertions, PoiTable, best_insertions
from .updates import _propagate, apply_insertion, apply_removal

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IlsConfig:
    max_iter_no_improve: int = 150
    time_limit: float = 60.0
    # Only used to generate synthetic instances; the search itself is deterministic.
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_iter_no_improve <= 0 or self.time_limit <= 0:
            raise ValueError("iteration and time limits must be positive")


@dataclass
class PerturbationState:
    rho: int = 1
    sigma: int = 1
    no_improve_count: int = 0


@dataclass
class SearchStats:
    iterations: int = 0
    improvements: int = 0
    non_improving: int = 0
    insertions: int = 0
    removals: int = 0
    elapsed: float = 0.0
    stop_reason: str = ""
    best_scores: list[float] = field(default_factory=list)
    candidate_counts: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class SearchSpace:
    """Candidate sites (radius filter) and the optional cluster gate."""

    site_mask: np.ndarray
    assignment: ClusterAssignment | None = None
    radius_km: float = math.inf

    @classmethod
    def build(
        cls,
        instance: Instance,
        radius_km: float = math.inf,
        clustering: bool = False,
        params: ClusterParams | None = None,
        cache_dir: str | Path | None = None,
    ) -> "SearchSpace":
        if clustering:
            sites, assignment = load_or_cluster(instance, radius_km, params, cache_dir)
        else:
            sites, assignment = radius_filter(instance, instance.start_latlon, radius_km), None
        mask = np.zeros(instance.n_sites, dtype=bool)
        mask[sites] = True
        return cls(mask, assignment, radius_km)


def insertion_ratio(score: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """Squared score per minute of extra time; free insertions rank first."""
    score, shift = np.asarray(score, dtype=float), np.asarray(shift, dtype=float)
    safe = np.where(shift > 0, shift, 1.0)
    return np.where(shift > 0, score * score / safe, np.inf)


class _Search:
    """Mutable solver state shared by the insertion and perturbation steps."""

    def __init__(self, instance: Instance, space: SearchSpace, deadline: float):
        self.instance = instance
        self.space = space
        self.deadline = deadline
        self.table = PoiTable.from_instance(instance)
        t = self.table
        _, self.group_index = np.unique(t.group, return_inverse=True)
        self.routed = np.zeros(self.group_index.max() + 1 if len(t.group) else 0, dtype=bool)
        usable = space.site_mask[t.location] & (t.score > 0) & (t.group >= 0)
        self.pools = [np.flatnonzero(usable & (t.day == d)) for d in range(instance.horizon_days)]
        self.solution = Solution.empty(instance)
        self.labels = self._fresh_labels()
        self.stats = SearchStats()

    def _fresh_labels(self) -> list[ItineraryLabels] | None:
        a = self.space.assignment
        if a is None:
            return None
        locs = self.table.location
        return [labels_for_route(a, (locs[p] for p in it.customer_pois())) for it in self.solution.itineraries]

    def _evaluate_day(self, day: int) -> BestInsertions:
        pool = self.pools[day]
        pool = pool[~self.routed[self.group_index[pool]]]
        itin = self.solution.itineraries[day]
        allowed = None
        if self.space.assignment is not None and len(pool):
            lab = self.space.assignment.labels
            vloc = self.table.location[[v.poi for v in itin.visits]]
            lv = lab[vloc]
            allowed = allowed_matrix(self.labels[day], lv[:-1], lv[1:], lab[self.table.location[pool]])
        self.stats.candidate_counts.append(len(pool))
        return best_insertions(self.instance, self.table, itin, pool, allowed)

    def insertion_phase(self) -> int:
        """Insert best-ratio PoIs until none fits; returns the number inserted."""
        inst, sol = self.instance, self.solution
        days = inst.horizon_days
        cache: list[BestInsertions | None] = [None] * days
        dirty = set(range(days))
        inserted = 0
        while True:
            for d in dirty:
                cache[d] = self._evaluate_day(d)
            dirty.clear()
            parts = []
            for d, best in enumerate(cache):
                keep = best.found & ~self.routed[self.group_index[best.poi]]
                if keep.any():
                    parts.append((d, best, keep))
            if not parts:
                break
            poi = np.concatenate([b.poi[k] for _, b, k in parts])
            shift = np.concatenate([b.shift[k] for _, b, k in parts])
            viol = np.concatenate([b.violations[k] for _, b, k in parts])
            pos = np.concatenate([b.pos[k] for _, b, k in parts])
            pair = np.concatenate([b.pair[k] for _, b, k in parts])
            day = np.concatenate([np.full(k.sum(), d) for d, _, k in parts])
            ratio = insertion_ratio(self.table.score[poi], shift)
            # Highest ratio, then fewest violations, then earliest (day, position), then id.
            pick = np.lexsort((poi, pos, day, viol, -ratio))[0]
            d, j, p = int(day[pick]), int(poi[pick]), int(pos[pick])
            m_in, m_out = MODE_PAIRS[int(pair[pick])]
            itin = sol.itineraries[d]
            ev = check_insertion(inst, itin, j, p, m_in, m_out)
            if not ev.feasible:
                raise RuntimeError(f"batch and scalar checks disagree for PoI {j} at {p} on day {d}")
            if self.labels is not None:
                lab = self.space.assignment
                around = (itin.visits[p - 1].poi, j, itin.visits[p].poi)
                l_i, l_j, l_k = (lab.label(inst.pois[x].location) for x in around)
                if not insertion_allowed(self.labels[d], l_i, l_j, l_k):
                    raise RuntimeError(f"cluster gate rejects the chosen insertion of PoI {j}")
            before = itin.violation_count
            apply_insertion(itin, inst, j, p, m_in, m_out)
            if itin.violation_count > before:
                raise RuntimeError("insertion increased the violation count")
            self.routed[self.group_index[j]] = True
            sol.routed_groups.add(inst.pois[j].group_id)
            sol.total_score += float(self.table.score[j])
            if self.labels is not None:
                update_labels(self.labels[d], self.space.assignment.label(inst.pois[j].location))
            inserted += 1
            dirty.add(d)
            if time.perf_counter() > self.deadline:
                break
        self.stats.insertions += inserted
        return inserted

    def perturb(self, state: PerturbationState) -> None:
        inst, sol = self.instance, self.solution
        for itin in sol.itineraries:
            removed = apply_removal(itin, inst, state.sigma, state.rho)
            finalize_after_perturbation(itin, inst)
            for j in removed:
                self.routed[self.group_index[j]] = False
                sol.routed_groups.discard(inst.pois[j].group_id)
                sol.total_score -= float(self.table.score[j])
            self.stats.removals += len(removed)
        self.labels = self._fresh_labels()


def finalize_after_perturbation(itinerary: Itinerary, instance: Instance) -> Itinerary:
    """Pull start times forward to the earliest the windows allow.

    The removal update already propagates negative shifts, so this is a
    guard that becomes a no-op on a consistent itinerary.
    """
    if len(itinerary.visits) > 1:
        _propagate(itinerary, instance, 1, 1, 0)
    return itinerary


def next_perturbation(state: PerturbationState, improved: bool, sizes: list[int]) -> PerturbationState:
    """Block length and start for the next perturbation."""
    if improved:
        state.rho = 1
        state.no_improve_count = 0
    else:
        state.no_improve_count += 1
    state.rho += 1
    smallest, biggest = min(sizes), max(sizes)
    if state.rho >= biggest:
        state.rho = max(1, smallest // 2)
    state.sigma = (state.sigma + state.rho) % max(1, smallest)
    return state


def ils_run(
    instance: Instance,
    config: IlsConfig | None = None,
    space: SearchSpace | None = None,
    *,
    started: float | None = None,
) -> tuple[Solution, SearchStats]:
    config = config or IlsConfig()
    started = time.perf_counter() if started is None else started
    space = space or SearchSpace.build(instance)
    search = _Search(instance, space, started + config.time_limit)
    state = PerturbationState()
    best: Solution | None = None
    stats = search.stats
    while True:
        search.insertion_phase()
        stats.iterations += 1
        improved = search.solution.better_than(best)
        if improved:
            best = search.solution.copy()
            stats.improvements += 1
        else:
            stats.non_improving += 1
        stats.best_scores.append(best.total_score)
        next_perturbation(state, improved, [it.size for it in search.solution.itineraries])
        elapsed = time.perf_counter() - started
        if state.no_improve_count > config.max_iter_no_improve:
            stats.stop_reason = "iterations"
            break
        if elapsed > config.time_limit:
            stats.stop_reason = "time"
            break
        search.perturb(state)
    stats.elapsed = time.perf_counter() - started
    best.refresh_totals(instance)
    log.info("ILS finished: score %.1f after %d iterations (%s)", best.total_score, stats.iterations,
             stats.stop_reason)
    return best, stats


def insertion_only(instance: Instance, space: SearchSpace | None = None) -> Solution:
    """One greedy insertion phase from the empty solution."""
    search = _Search(instance, space or SearchSpace.build(instance), math.inf)
    search.insertion_phase()
    return search.solution


@dataclass
class SolveResult:
    solution: Solution
    stats: SearchStats
    space: SearchSpace


def solve(
    instance: Instance,
    config: IlsConfig | None = None,
    *,
    radius_km: float = math.inf,
    clustering: bool = False,
    cluster_params: ClusterParams | None = None,
    cache_dir: str | Path | None = None,
) -> SolveResult:
    """Preprocess the search space and run the ILS inside one time budget."""
    started = time.perf_counter()
    space = SearchSpace.build(instance, radius_km, clustering, cluster_params, cache_dir)
    best, stats = ils_run(instance, config, space, started=started)
    return SolveResult(best, stats, space)
