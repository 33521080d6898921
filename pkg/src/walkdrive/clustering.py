"""Search-space reduction: radius filtering and walking-time clusters."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import squareform

from .instance import EARTH_RADIUS_KM, Instance

LINKAGES = ("complete", "average")


@dataclass(frozen=True)
class ClusterParams:
    linkage: str = "complete"
    # Dendrogram cut height in walking minutes; defaults to the max walking time.
    threshold: float | None = None
    n_clusters: int | None = None

    def __post_init__(self) -> None:
        if self.linkage not in LINKAGES:
            raise ValueError(f"linkage must be one of {LINKAGES}")
        if self.threshold is not None and self.n_clusters is not None:
            raise ValueError("give either a threshold or a cluster count, not both")


@dataclass(frozen=True)
class ClusterAssignment:
    """Cluster label per site (``-1`` for sites outside the candidate set)."""

    labels: np.ndarray
    depot_label: int

    def label(self, site: int) -> int:
        return int(self.labels[site])


@dataclass
class ItineraryLabels:
    depot_label: int
    used: set[int] = field(default_factory=set)

    def __post_init__(self) -> None:
        self.used.add(self.depot_label)

    def __len__(self) -> int:
        return len(self.used)

    def __contains__(self, label: int) -> bool:
        return label in self.used


def radius_filter(instance: Instance, start: tuple[float, float], r_km: float) -> np.ndarray:
    """Sorted site indices within ``r_km`` great-circle km of ``start``."""
    if math.isinf(r_km):
        return np.arange(instance.n_sites)
    if r_km < 0:
        raise ValueError("radius must be non-negative")
    lat1, lon1 = np.radians(start[0]), np.radians(start[1])
    lats = np.radians([s.lat for s in instance.sites])
    lons = np.radians([s.lon for s in instance.sites])
    h = np.sin((lats - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lats) * np.sin((lons - lon1) / 2) ** 2
    km = 2 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))
    return np.flatnonzero(km <= r_km)


def agglomerative_cluster(
    walk: np.ndarray,
    method: str = "complete",
    *,
    threshold: float | None = None,
    n_clusters: int | None = None,
) -> np.ndarray:
    """Labels ``0..c-1`` (numbered by first member) from a dendrogram cut.

    The walking matrix is symmetrised with the elementwise maximum.
    """
    walk = np.asarray(walk, dtype=float)
    n = len(walk)
    if n == 0:
        raise ValueError("cannot cluster an empty candidate set")
    if n == 1:
        return np.zeros(1, dtype=int)
    if (threshold is None) == (n_clusters is None):
        raise ValueError("give exactly one of threshold or n_clusters")
    sym = np.maximum(walk, walk.T)
    np.fill_diagonal(sym, 0.0)
    tree = linkage(squareform(sym, checks=False), method=method)
    if threshold is not None:
        raw = fcluster(tree, t=threshold, criterion="distance")
    else:
        raw = fcluster(tree, t=n_clusters, criterion="maxclust")
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse].astype(int)


def cluster_instance(instance: Instance, candidates: np.ndarray, params: ClusterParams) -> ClusterAssignment:
    sites = np.union1d(candidates, [instance.start_site]).astype(int)
    sub = instance.matrices.walk[np.ix_(sites, sites)]
    threshold = params.threshold
    if threshold is None and params.n_clusters is None:
        threshold = instance.mobility.max_walking_time
    local = agglomerative_cluster(sub, params.linkage, threshold=threshold, n_clusters=params.n_clusters)
    labels = np.full(instance.n_sites, -1, dtype=int)
    labels[sites] = local
    return ClusterAssignment(labels, int(labels[instance.start_site]))


def insertion_allowed(labels: ItineraryLabels, l_i: int, l_j: int, l_k: int) -> bool:
    """Cluster gate for inserting a PoI labelled ``l_j`` between ``l_i`` and ``l_k``."""
    if l_j in (l_i, l_k):
        return True
    if l_i == l_k == labels.depot_label and len(labels) == 1:
        return True
    return l_i != l_k and l_j not in labels


def allowed_matrix(labels: ItineraryLabels, l_i: np.ndarray, l_k: np.ndarray, l_j: np.ndarray) -> np.ndarray:
    """Vectorised :func:`insertion_allowed` over candidates x positions."""
    lj = l_j[:, None]
    same = (lj == l_i[None, :]) | (lj == l_k[None, :])
    empty = (l_i == l_k) & (l_i == labels.depot_label) & (len(labels) == 1)
    fresh = ~np.isin(l_j, list(labels.used))
    return same | empty[None, :] | ((l_i != l_k)[None, :] & fresh[:, None])


def update_labels(labels: ItineraryLabels, label: int) -> ItineraryLabels:
    labels.used.add(label)
    return labels


def labels_for_route(assignment: ClusterAssignment, sites: Iterable[int]) -> ItineraryLabels:
    out = ItineraryLabels(assignment.depot_label)
    out.used.update(assignment.label(s) for s in sites)
    return out


def contiguity_violations(route_labels: list[int], depot_label: int) -> list[int]:
    """Non-depot labels that appear in more than one block along a route."""
    seen: set[int] = set()
    bad: list[int] = []
    prev = None
    for lab in route_labels:
        if lab != prev:
            if lab in seen and lab != depot_label and lab not in bad:
                bad.append(lab)
            seen.add(lab)
        prev = lab
    return bad


# ---------------------------------------------------------------------------
# Sidecar cache
# ---------------------------------------------------------------------------

def cache_key(instance: Instance, start: int, r_km: float, params: ClusterParams) -> str:
    payload = json.dumps({
        "instance": instance.digest, "start": start, "radius_km": None if math.isinf(r_km) else r_km,
        "linkage": params.linkage, "threshold": params.threshold, "n_clusters": params.n_clusters,
        "max_walking": instance.mobility.max_walking_time,
    }, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def load_or_cluster(
    instance: Instance,
    r_km: float,
    params: ClusterParams | None = None,
    cache_dir: str | Path | None = None,
) -> tuple[np.ndarray, ClusterAssignment]:
    """Candidate sites and their clusters, reusing a cache file when present."""
    params = params or ClusterParams()
    candidates = radius_filter(instance, instance.start_latlon, r_km)
    key = cache_key(instance, instance.start_site, r_km, params)
    path = Path(cache_dir) / f"clusters-{key}.json" if cache_dir is not None else None
    if path is not None and path.exists():
        doc = json.loads(path.read_text())
        if doc.get("hash") == key and len(doc["labels"]) == instance.n_sites:
            labels = np.asarray(doc["labels"], dtype=int)
            return candidates, ClusterAssignment(labels, int(labels[instance.start_site]))
    assignment = cluster_instance(instance, candidates, params)
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        doc = {
            "hash": key,
            "labels": assignment.labels.tolist(),
            "params": {"linkage": params.linkage, "threshold": params.threshold,
                       "n_clusters": params.n_clusters, "radius_km": None if math.isinf(r_km) else r_km,
                       "start": instance.start_site},
        }
        path.write_text(json.dumps(doc))
    return candidates, assignment

