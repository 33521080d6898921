"""Problem instances: sites, travel-time matrices, time-window expansion.

A *site* is a physical location read from the instance file (an attraction,
or the tourist's lodging).  Every opening window of a site on a given day
becomes its own :class:`PoI` vertex; all vertices of one site share a
max-n group so at most one of them is ever routed.  Two further dummy
vertices per day model the tourist leaving and returning to the start site.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0
WALK_SPEED_KMH = 5.0
DEFAULT_C_MAX = 720.0
# Matrices above this many sites are written as .npy sidecars by default.
INLINE_MATRIX_LIMIT = 1500
# Floyd-Warshall is skipped on load above this size unless forced.
METRIC_CLOSURE_LIMIT = 1200


class InstanceError(ValueError):
    """Raised for malformed or inconsistent instance data."""


class Mode(str, Enum):
    WALK = "walk"
    DRIVE = "drive"


@dataclass(frozen=True)
class MobilityConfig:
    max_walking_time: float = 30.0
    min_driving_time: float = 6.0
    pickup_time: float = 5.0
    parking_time: float = 10.0

    def __post_init__(self) -> None:
        for name in ("max_walking_time", "min_driving_time", "pickup_time", "parking_time"):
            if getattr(self, name) < 0:
                raise InstanceError(f"mobility.{name} must be non-negative")

    def to_dict(self) -> dict[str, float]:
        return {
            "max_walking": self.max_walking_time,
            "min_driving": self.min_driving_time,
            "pickup": self.pickup_time,
            "parking": self.parking_time,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MobilityConfig":
        return cls(
            max_walking_time=float(d.get("max_walking", 30.0)),
            min_driving_time=float(d.get("min_driving", 6.0)),
            pickup_time=float(d.get("pickup", 5.0)),
            parking_time=float(d.get("parking", 10.0)),
        )


@dataclass(frozen=True)
class Site:
    """A raw location from the instance file, with its windows per day."""

    id: int
    lat: float
    lon: float
    score: float
    visit_minutes: float
    windows: tuple[tuple[tuple[float, float], ...], ...]
    group_id: int

    def windows_on(self, day: int) -> tuple[tuple[float, float], ...]:
        if not self.windows:
            return ()
        return self.windows[day % len(self.windows)]


@dataclass(frozen=True)
class PoI:
    """One vertex of the multigraph: a site restricted to a single window."""

    id: int
    group_id: int
    location: int
    lat: float
    lon: float
    score: float
    visit_duration: float
    open: float
    close: float
    day: int
    kind: str = "poi"  # "poi", "start" or "end"
    window: int = 0

    @property
    def is_dummy(self) -> bool:
        return self.kind != "poi"


@dataclass(frozen=True)
class TravelMatrices:
    walk: np.ndarray
    drive: np.ndarray


@dataclass(frozen=True)
class Instance:
    sites: tuple[Site, ...]
    pois: tuple[PoI, ...]
    matrices: TravelMatrices
    mobility: MobilityConfig
    horizon_days: int
    c_max: float
    start_site: int
    start_ids: tuple[int, ...]
    end_ids: tuple[int, ...]
    walk_preferred: np.ndarray = field(repr=False)
    digest: str = ""

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def day_availability(self) -> np.ndarray:
        """Boolean (site, day) table: True when the site has a window that day."""
        table = np.zeros((self.n_sites, self.horizon_days), dtype=bool)
        for p in self.pois:
            if not p.is_dummy:
                table[p.location, p.day] = True
        return table

    def customers(self, day: int | None = None) -> list[PoI]:
        return [p for p in self.pois if not p.is_dummy and (day is None or p.day == day)]

    @property
    def start_latlon(self) -> tuple[float, float]:
        s = self.sites[self.start_site]
        return (s.lat, s.lon)


# ---------------------------------------------------------------------------
# Geometry and matrix preprocessing
# ---------------------------------------------------------------------------

def haversine_km(p: Sequence[float], q: Sequence[float]) -> float:
    """Great-circle distance in km between two (lat, lon) points in degrees."""
    lat1, lon1 = math.radians(p[0]), math.radians(p[1])
    lat2, lon2 = math.radians(q[0]), math.radians(q[1])
    h = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def haversine_matrix(lats: np.ndarray, lons: np.ndarray) -> np.ndarray:
    lat = np.radians(np.asarray(lats, dtype=float))
    lon = np.radians(np.asarray(lons, dtype=float))
    dlat = lat[None, :] - lat[:, None]
    dlon = lon[None, :] - lon[:, None]
    h = np.sin(dlat / 2) ** 2 + np.cos(lat)[:, None] * np.cos(lat)[None, :] * np.sin(dlon / 2) ** 2
    d = 2 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))
    np.fill_diagonal(d, 0.0)
    return d


def enforce_triangle_inequality(matrix: np.ndarray) -> np.ndarray:
    """Metric closure by Floyd-Warshall; returns a new array."""
    out = np.array(matrix, dtype=float, copy=True)
    n = out.shape[0]
    for k in range(n):
        np.minimum(out, out[:, k, None] + out[None, k, :], out=out)
    return out


def is_metric(matrix: np.ndarray, tol: float = 0.0) -> bool:
    closed = enforce_triangle_inequality(matrix)
    return bool(np.all(np.asarray(matrix) - closed <= tol))


def apply_transfer_times(drive: np.ndarray, mobility: MobilityConfig) -> np.ndarray:
    """Fold pick-up and parking times into every off-diagonal drive arc."""
    out = np.array(drive, dtype=float, copy=True)
    out += mobility.pickup_time + mobility.parking_time
    np.fill_diagonal(out, 0.0)
    return out


def walk_preference_matrix(walk: np.ndarray, drive: np.ndarray, mobility: MobilityConfig) -> np.ndarray:
    """True where the tourist prefers walking from i to j."""
    too_far = walk > mobility.max_walking_time
    short_drive = drive <= mobility.min_driving_time
    return ~too_far & (short_drive | (walk <= drive))


def preferred_mode(instance: Instance, i: int, j: int) -> Mode:
    """Tourist's preferred mode between two PoIs (by PoI id)."""
    li, lj = instance.pois[i].location, instance.pois[j].location
    return Mode.WALK if instance.walk_preferred[li, lj] else Mode.DRIVE


def preferred_mode_for_times(t_walk: float, t_drive: float, mobility: MobilityConfig) -> Mode:
    if t_walk > mobility.max_walking_time:
        return Mode.DRIVE
    if t_drive <= mobility.min_driving_time:
        return Mode.WALK
    return Mode.WALK if t_walk <= t_drive else Mode.DRIVE


# ---------------------------------------------------------------------------
# Time-window expansion and instance assembly
# ---------------------------------------------------------------------------

def expand_time_windows(sites: Iterable[Site], days: int, first_id: int = 0) -> list[PoI]:
    """One PoI per (site, day, window); all PoIs of a site share its group."""
    out: list[PoI] = []
    next_id = first_id
    sites = list(sites)
    for day in range(days):
        for loc, s in enumerate(sites):
            for w, (o, c) in enumerate(s.windows_on(day)):
                out.append(PoI(
                    id=next_id, group_id=s.group_id, location=loc, lat=s.lat, lon=s.lon,
                    score=s.score, visit_duration=s.visit_minutes, open=o, close=c,
                    day=day, window=w,
                ))
                next_id += 1
    return out


def _digest(doc: dict[str, Any], walk: np.ndarray, drive: np.ndarray) -> str:
    h = hashlib.sha256()
    meta = {k: v for k, v in doc.items() if k not in ("walk_minutes", "drive_minutes")}
    h.update(json.dumps(meta, sort_keys=True).encode())
    h.update(np.ascontiguousarray(walk, dtype=float).tobytes())
    h.update(np.ascontiguousarray(drive, dtype=float).tobytes())
    return h.hexdigest()[:16]


def build_instance(
    sites: Sequence[Site],
    walk: np.ndarray,
    drive_raw: np.ndarray,
    mobility: MobilityConfig,
    days: int,
    c_max: float = DEFAULT_C_MAX,
    start_site: int = 0,
    *,
    metric_closure: bool = True,
    fold_transfers: bool = True,
    digest: str = "",
) -> Instance:
    """Assemble an :class:`Instance` from raw matrices (drive without transfers)."""
    n = len(sites)
    walk = np.asarray(walk, dtype=float)
    drive = np.asarray(drive_raw, dtype=float)
    for name, m in (("walk", walk), ("drive", drive)):
        if m.ndim != 2 or m.shape != (n, n):
            raise InstanceError(f"{name} matrix has shape {m.shape}, expected ({n}, {n})")
        if not np.all(np.isfinite(m)):
            raise InstanceError(f"{name} matrix contains non-finite values")
        if np.any(m < 0):
            raise InstanceError(f"{name} matrix contains negative times")
        if np.any(np.diag(m) != 0):
            raise InstanceError(f"{name} matrix has a non-zero diagonal")
    if days < 1:
        raise InstanceError("days must be >= 1")
    if c_max <= 0:
        raise InstanceError("c_max must be positive")
    if not 0 <= start_site < n:
        raise InstanceError("start site out of range")

    if metric_closure:
        walk = enforce_triangle_inequality(walk)
        drive = enforce_triangle_inequality(drive)
    if fold_transfers:
        drive = apply_transfer_times(drive, mobility)

    base = sites[start_site]
    dummies: list[PoI] = []
    for d in range(days):
        dummies.append(PoI(2 * d, -1, start_site, base.lat, base.lon, 0.0, 0.0, 0.0, 0.0, d, "start"))
        dummies.append(PoI(2 * d + 1, -1, start_site, base.lat, base.lon, 0.0, 0.0, 0.0, float(c_max), d, "end"))
    pois = dummies + expand_time_windows(sites, days, first_id=len(dummies))

    walk.setflags(write=False)
    drive.setflags(write=False)
    pref = walk_preference_matrix(walk, drive, mobility)
    pref.setflags(write=False)
    return Instance(
        sites=tuple(sites),
        pois=tuple(pois),
        matrices=TravelMatrices(walk=walk, drive=drive),
        mobility=mobility,
        horizon_days=days,
        c_max=float(c_max),
        start_site=start_site,
        start_ids=tuple(2 * d for d in range(days)),
        end_ids=tuple(2 * d + 1 for d in range(days)),
        walk_preferred=pref,
        digest=digest,
    )


def _is_pair(w: Any) -> bool:
    return isinstance(w, (list, tuple)) and len(w) == 2 and all(isinstance(x, (int, float)) for x in w)


def _parse_windows(raw: Any, site_id: int) -> tuple[tuple[tuple[float, float], ...], ...]:
    """Accept one window list shared by every day, or one list per day."""
    if not raw:
        return ()
    per_day = [raw] if all(_is_pair(w) for w in raw) else raw
    out = []
    for day_windows in per_day:
        ws = []
        for w in day_windows:
            if not _is_pair(w):
                raise InstanceError(f"site {site_id}: window {w!r} is not an [open, close] pair")
            o, c = float(w[0]), float(w[1])
            if o < 0 or c < 0:
                raise InstanceError(f"site {site_id}: negative time in window {w!r}")
            if o > c:
                raise InstanceError(f"site {site_id}: window opens at {o} after it closes at {c}")
            ws.append((o, c))
        out.append(tuple(ws))
    return tuple(out)


def _read_matrix(value: Any, base_dir: Path | None, name: str) -> np.ndarray:
    if isinstance(value, str):
        path = Path(value)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        return np.load(path, allow_pickle=False)
    if isinstance(value, np.ndarray):
        return value
    try:
        return np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InstanceError(f"{name}: matrix rows have inconsistent lengths") from exc


def parse_instance(
    doc: dict[str, Any],
    *,
    base_dir: Path | None = None,
    days: int | None = None,
    start: int | None = None,
    metric_closure: bool | None = None,
) -> Instance:
    """Validate an instance document (the JSON schema as a dict)."""
    try:
        raw_pois = doc["pois"]
        walk_v = doc["walk_minutes"]
        drive_v = doc["drive_minutes"]
    except KeyError as exc:
        raise InstanceError(f"missing key {exc.args[0]!r}") from exc

    sites = []
    seen: set[int] = set()
    for entry in raw_pois:
        sid = int(entry["id"])
        if sid in seen:
            raise InstanceError(f"duplicate poi id {sid}")
        seen.add(sid)
        score = float(entry.get("score", 0.0))
        visit = float(entry.get("visit_minutes", 0.0))
        if score < 0:
            raise InstanceError(f"site {sid}: negative score")
        if visit < 0:
            raise InstanceError(f"site {sid}: negative visit duration")
        sites.append(Site(
            id=sid, lat=float(entry.get("lat", 0.0)), lon=float(entry.get("lon", 0.0)),
            score=score, visit_minutes=visit,
            windows=_parse_windows(entry.get("windows"), sid),
            group_id=int(entry.get("group_id", sid)),
        ))
    if not sites:
        raise InstanceError("instance has no pois")

    walk = _read_matrix(walk_v, base_dir, "walk_minutes")
    drive = _read_matrix(drive_v, base_dir, "drive_minutes")
    n_days = int(days if days is not None else doc.get("days", 1))
    mobility = MobilityConfig.from_dict(doc.get("mobility", {}))
    start_id = start if start is not None else doc.get("start", sites[0].id)
    index = {s.id: k for k, s in enumerate(sites)}
    if start_id not in index:
        raise InstanceError(f"start poi {start_id} is not in the instance")
    if metric_closure is None:
        metric_closure = not doc.get("metric", False) or len(sites) <= METRIC_CLOSURE_LIMIT
    digest = _digest(doc, walk, drive)
    return build_instance(
        sites, walk, drive, mobility, n_days, float(doc.get("c_max", DEFAULT_C_MAX)),
        index[start_id], metric_closure=metric_closure, digest=digest,
    )


def load_instance(
    path: str | Path,
    *,
    days: int | None = None,
    start: int | None = None,
    metric_closure: bool | None = None,
) -> Instance:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path}: not valid JSON ({exc})") from exc
    return parse_instance(doc, base_dir=path.parent, days=days, start=start, metric_closure=metric_closure)


def save_instance(doc: dict[str, Any], path: str | Path, *, inline: bool | None = None) -> Path:
    """Write an instance document; large matrices go to ``<stem>.walk.npy`` etc."""
    path = Path(path)
    doc = dict(doc)
    walk = np.asarray(doc["walk_minutes"], dtype=float)
    drive = np.asarray(doc["drive_minutes"], dtype=float)
    if inline is None:
        inline = walk.shape[0] <= INLINE_MATRIX_LIMIT
    if inline:
        doc["walk_minutes"] = walk.tolist()
        doc["drive_minutes"] = drive.tolist()
    else:
        for key, arr, suffix in (("walk_minutes", walk, "walk"), ("drive_minutes", drive, "drive")):
            side = path.with_name(f"{path.stem}.{suffix}.npy")
            with open(side, "wb") as fh:
                np.save(fh, arr, allow_pickle=False)
            doc[key] = side.name
    path.write_text(json.dumps(doc, separators=(",", ":")))
    return path


# ---------------------------------------------------------------------------
# Synthetic instances
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeneratorParams:
    # Default box: a region about 150 km across.
    lat_range: tuple[float, float] = (40.3, 41.6)
    lon_range: tuple[float, float] = (16.0, 18.2)
    days: int = 7
    c_max: float = DEFAULT_C_MAX
    drive_speed_kmh: float = 40.0
    road_factor: float = 1.3
    score_range: tuple[int, int] = (1, 100)
    visit_range: tuple[int, int] = (15, 90)
    closed_probability: float = 0.15
    split_probability: float = 0.35
    mobility: MobilityConfig = MobilityConfig()
    # Times are rounded up to this grid; 1/16 min keeps sums exact in float64.
    time_grid: float = 1.0 / 16.0


def _ceil_grid(x: np.ndarray, grid: float) -> np.ndarray:
    return np.ceil(x / grid - 1e-9) * grid


def _random_windows(rng: np.random.Generator, params: GeneratorParams) -> list[list[list[float]]]:
    horizon = int(params.c_max)
    per_day = []
    for _ in range(params.days):
        if rng.random() < params.closed_probability:
            per_day.append([])
            continue
        o = int(rng.integers(0, horizon // 3)) // 5 * 5
        c = int(rng.integers(max(o + 60, horizon // 2), horizon + 1)) // 5 * 5
        if rng.random() < params.split_probability and c - o >= 240:
            mid = (o + c) // 2 // 5 * 5
            gap = int(rng.integers(6, 25)) * 5
            per_day.append([[float(o), float(mid)], [float(min(c, mid + gap)), float(c)]])
        else:
            per_day.append([[float(o), float(c)]])
    return per_day


def synthetic_document(n_pois: int, seed: int, params: GeneratorParams | None = None) -> dict[str, Any]:
    """Instance document with ``n_pois`` attractions plus a start site (id 0)."""
    if n_pois < 1:
        raise ValueError("n_pois must be >= 1")
    params = params or GeneratorParams()
    rng = np.random.default_rng(seed)
    n = n_pois + 1
    lats = rng.uniform(*params.lat_range, size=n)
    lons = rng.uniform(*params.lon_range, size=n)
    km = haversine_matrix(lats, lons)
    walk = _ceil_grid(km / WALK_SPEED_KMH * 60.0, params.time_grid)
    drive = _ceil_grid(km * params.road_factor / params.drive_speed_kmh * 60.0, params.time_grid)
    np.fill_diagonal(walk, 0.0)
    np.fill_diagonal(drive, 0.0)
    if n <= METRIC_CLOSURE_LIMIT:
        walk = enforce_triangle_inequality(walk)
        drive = enforce_triangle_inequality(drive)

    pois: list[dict[str, Any]] = [{
        "id": 0, "lat": float(lats[0]), "lon": float(lons[0]), "score": 0.0,
        "visit_minutes": 0.0, "windows": [[] for _ in range(params.days)],
    }]
    lo_s, hi_s = params.score_range
    lo_v, hi_v = params.visit_range
    for sid in range(1, n):
        pois.append({
            "id": sid,
            "lat": float(lats[sid]),
            "lon": float(lons[sid]),
            "score": float(rng.integers(lo_s, hi_s + 1)),
            "visit_minutes": float(rng.integers(lo_v // 5, hi_v // 5 + 1) * 5),
            "windows": _random_windows(rng, params),
        })
    return {
        "pois": pois,
        "walk_minutes": walk,
        "drive_minutes": drive,
        "mobility": params.mobility.to_dict(),
        "c_max": params.c_max,
        "days": params.days,
        "start": 0,
        "metric": True,
        "generator": {"seed": seed, "n_pois": n_pois},
    }


def generate_synthetic(
    n_pois: int, seed: int, params: GeneratorParams | None = None, *, days: int | None = None
) -> Instance:
    doc = synthetic_document(n_pois, seed, params)
    return parse_instance(doc, days=days, metric_closure=False)
