"""Geodesic helpers and the equirectangular local frame used by every spatial stage.

Distances on the sphere use the IUGG mean Earth radius (6371.0088 km). The
local frame is a plain affine map from degrees to meters around an origin,
which is accurate to well under 1% at city scale and exactly invertible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidArgument

EARTH_RADIUS_KM = 6371.0088
METERS_PER_DEG_LAT = 111_320.0


class GeoPoint(NamedTuple):
    lat: float
    lon: float


def check_point(p) -> GeoPoint:
    lat, lon = float(p[0]), float(p[1])
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise InvalidArgument(f"non-finite coordinate ({lat}, {lon})")
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise InvalidArgument(f"coordinate out of range ({lat}, {lon})")
    return GeoPoint(lat, lon)


def haversine_km(a, b) -> float:
    """Great-circle distance between two (lat, lon) points in kilometres."""
    a = check_point(a)
    b = check_point(b)
    phi1, phi2 = math.radians(a.lat), math.radians(b.lat)
    dphi = phi2 - phi1
    dlmb = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlmb / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def haversine_km_arr(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Vectorised haversine; inputs broadcast against each other."""
    lat1, lon1, lat2, lon2 = (np.asarray(v, dtype=np.float64) for v in (lat1, lon1, lat2, lon2))
    if not all(np.all(np.isfinite(v)) for v in (lat1, lon1, lat2, lon2)):
        raise InvalidArgument("non-finite coordinate in haversine input")
    phi1, phi2 = np.radians(lat1), np.radians(lat2)
    dphi = phi2 - phi1
    dlmb = np.radians(lon2 - lon1)
    h = np.sin(dphi / 2) ** 2 + np.cos(phi1) * np.cos(phi2) * np.sin(dlmb / 2) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def pairwise_haversine_km(lat_a, lon_a, lat_b, lon_b) -> np.ndarray:
    """Distance matrix of shape (len(a), len(b))."""
    lat_a = np.asarray(lat_a, dtype=np.float64)[:, None]
    lon_a = np.asarray(lon_a, dtype=np.float64)[:, None]
    return haversine_km_arr(lat_a, lon_a, np.asarray(lat_b)[None, :], np.asarray(lon_b)[None, :])


@dataclass(frozen=True)
class LocalFrame:
    origin: GeoPoint
    meters_per_deg_lat: float
    meters_per_deg_lon: float

    @classmethod
    def at(cls, origin) -> "LocalFrame":
        o = check_point(origin)
        return cls(o, METERS_PER_DEG_LAT, METERS_PER_DEG_LAT * math.cos(math.radians(o.lat)))

    def to_dict(self) -> dict:
        return {"origin_lat": self.origin.lat, "origin_lon": self.origin.lon}

    @classmethod
    def from_dict(cls, d: dict) -> "LocalFrame":
        return cls.at((d["origin_lat"], d["origin_lon"]))


def frame_for_region(bbox) -> LocalFrame:
    """Frame centred on the bbox centroid. ``bbox`` is ((lat_min, lon_min), (lat_max, lon_max))."""
    lo, hi = check_point(bbox[0]), check_point(bbox[1])
    if not (lo.lat < hi.lat and lo.lon < hi.lon):
        # also rejects regions that wrap the antimeridian
        raise InvalidArgument(f"degenerate or inverted bbox {tuple(lo)} - {tuple(hi)}")
    return LocalFrame.at(((lo.lat + hi.lat) / 2.0, (lo.lon + hi.lon) / 2.0))


def to_local(f: LocalFrame, lat, lon):
    """Degrees to (x east, y north) metres. Works on scalars and arrays."""
    x = (np.asarray(lon, dtype=np.float64) - f.origin.lon) * f.meters_per_deg_lon
    y = (np.asarray(lat, dtype=np.float64) - f.origin.lat) * f.meters_per_deg_lat
    if np.ndim(x) == 0:
        return float(x), float(y)
    return x, y


def from_local(f: LocalFrame, x, y):
    lat = f.origin.lat + np.asarray(y, dtype=np.float64) / f.meters_per_deg_lat
    lon = f.origin.lon + np.asarray(x, dtype=np.float64) / f.meters_per_deg_lon
    if np.ndim(lat) == 0:
        return GeoPoint(float(lat), float(lon))
    return lat, lon
