"""Distance functions over geographic points.

All distances are in kilometers. The dispatch pipeline accepts any callable
``(GeoPoint, GeoPoint) -> float`` that satisfies the triangle inequality;
acceptance probabilities rely on it.
"""

from __future__ import annotations

import math
from typing import Callable

from .model import GeoPoint

DistanceFn = Callable[[GeoPoint, GeoPoint], float]

EARTH_RADIUS_KM = 6371.0


def haversine_km(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two lat/lon points, in kilometers."""
    lat1 = math.radians(a.lat)
    lat2 = math.radians(b.lat)
    dlat = lat2 - lat1
    dlon = math.radians(b.lon - a.lon)
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def euclidean_km(a: GeoPoint, b: GeoPoint) -> float:
    """Planar distance treating (lat, lon) as (x, y) kilometers.

    Intended for unit tests and synthetic grids where hand-checkable
    geometry matters more than geodesic accuracy.
    """
    return math.hypot(a.lat - b.lat, a.lon - b.lon)
