"""GeoJSON rendering of solution itineraries."""
from __future__ import annotations

from typing import Any

from .instance import Instance


class ExportError(ValueError):
    pass


def solution_geojson(instance: Instance, doc: dict[str, Any]) -> dict[str, Any]:
    """FeatureCollection with one Point per visit and one LineString per leg.

    Coordinates are ``[lon, lat]`` as GeoJSON requires.
    """
    by_id = {s.id: s for s in instance.sites}
    start = instance.sites[instance.start_site]
    features: list[dict[str, Any]] = []
    for day in doc.get("days", []):
        coords = []
        for order, v in enumerate(day["visits"]):
            if v.get("kind", "poi") != "poi":
                site = start
            elif v.get("poi_id") in by_id:
                site = by_id[v["poi_id"]]
            else:
                raise ExportError(f"day {day['day']}: PoI {v.get('poi_id')} is not in the instance")
            coords.append([site.lon, site.lat])
            features.append({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [site.lon, site.lat]},
                "properties": {
                    "day": day["day"], "order": order, "poi_id": v.get("poi_id"), "kind": v.get("kind", "poi"),
                    "arrival": v.get("arrival"), "start": v.get("start"), "mode": v.get("mode_to_next"),
                    "subtour": v.get("subtour"),
                },
            })
        for n in range(len(coords) - 1):
            features.append({
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": [coords[n], coords[n + 1]]},
                "properties": {"day": day["day"], "leg": n, "mode": day["visits"][n].get("mode_to_next")},
            })
    return {"type": "FeatureCollection", "features": features}
