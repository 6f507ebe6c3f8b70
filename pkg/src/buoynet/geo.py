"""Great-circle geometry between buoy and gateway positions."""

from __future__ import annotations

import math
from typing import NamedTuple

EARTH_RADIUS_M = 6_371_000.0


class LatLon(NamedTuple):
    lat: float
    lon: float


def validate_position(pos: LatLon, field: str = "position") -> None:
    if not (math.isfinite(pos.lat) and -90.0 <= pos.lat <= 90.0):
        raise ValueError(f"{field}.lat out of range [-90, 90]: {pos.lat!r}")
    if not (math.isfinite(pos.lon) and -180.0 <= pos.lon <= 180.0):
        raise ValueError(f"{field}.lon out of range [-180, 180]: {pos.lon!r}")


def haversine_m(a: LatLon, b: LatLon) -> float:
    """Great-circle distance in meters on a sphere of radius 6371 km."""
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def offset_north_m(origin: LatLon, meters: float) -> LatLon:
    """Position `meters` due north of `origin` (exact under the haversine metric)."""
    dlat = math.degrees(meters / EARTH_RADIUS_M)
    return LatLon(origin.lat + dlat, origin.lon)
