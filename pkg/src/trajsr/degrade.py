"""Privacy degradation operators and z-score statistics.

Hex snapping stands in for H3: a pointy-top axial hexagon lattice laid over a
local equirectangular frame, anchored so cell (0, 0) is centred on the frame
origin. Cell edge lengths per resolution level approximate the average H3
hexagon edge.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import geo
from .errors import InvalidArgument
from .trajectory import Trajectory

log = logging.getLogger(__name__)

SQRT3 = math.sqrt(3.0)

# average H3 hexagon edge length in metres, rounded
H3_EDGE_M = {5: 8540.0, 6: 3230.0, 7: 1220.0, 8: 461.0, 9: 174.0}

STD_FLOOR = 1e-12


def resolution_edge_len(level: int) -> float:
    if level not in H3_EDGE_M:
        raise InvalidArgument(f"unsupported hex resolution {level}; expected one of {sorted(H3_EDGE_M)}")
    return H3_EDGE_M[level]


class CellId(tuple):
    """Axial (q, r) cell coordinates."""

    def __new__(cls, q: int, r: int):
        return super().__new__(cls, (int(q), int(r)))

    @property
    def q(self) -> int:
        return self[0]

    @property
    def r(self) -> int:
        return self[1]

    def __repr__(self) -> str:
        return f"CellId({self[0]}, {self[1]})"


@dataclass(frozen=True)
class HexGrid:
    frame: geo.LocalFrame
    edge_len_m: float

    def __post_init__(self):
        if not self.edge_len_m > 0:
            raise InvalidArgument(f"edge_len_m must be positive, got {self.edge_len_m}")

    def to_dict(self) -> dict:
        return {**self.frame.to_dict(), "edge_len_m": self.edge_len_m}

    @classmethod
    def from_dict(cls, d: dict) -> "HexGrid":
        return cls(geo.LocalFrame.from_dict(d), float(d["edge_len_m"]))

    def axial_round(self, x, y):
        """Nearest cell (q, r) arrays for planar points, via cube rounding."""
        s = self.edge_len_m
        qf = (SQRT3 / 3.0 * x - y / 3.0) / s
        rf = (2.0 / 3.0 * y) / s
        sf = -qf - rf
        q, r, s3 = np.rint(qf), np.rint(rf), np.rint(sf)
        dq, dr, ds = np.abs(q - qf), np.abs(r - rf), np.abs(s3 - sf)
        fix_q = (dq > dr) & (dq > ds)
        fix_r = ~fix_q & (dr > ds)
        q2 = np.where(fix_q, -r - s3, q)
        r2 = np.where(fix_r, -q - s3, r)
        return q2.astype(np.int64), r2.astype(np.int64)

    def center_xy(self, q, r):
        q = np.asarray(q, dtype=np.float64)
        r = np.asarray(r, dtype=np.float64)
        return self.edge_len_m * SQRT3 * (q + r / 2.0), self.edge_len_m * 1.5 * r


def hex_cell_of(grid: HexGrid, p) -> CellId:
    p = geo.check_point(p)
    x, y = geo.to_local(grid.frame, p.lat, p.lon)
    q, r = grid.axial_round(np.float64(x), np.float64(y))
    return CellId(q, r)


def cell_center(grid: HexGrid, c) -> geo.GeoPoint:
    x, y = grid.center_xy(c[0], c[1])
    return geo.from_local(grid.frame, x, y)


def truncate_trajectory(grid: HexGrid, traj: Trajectory) -> Trajectory:
    """Snap every point to the centre of its hex cell."""
    x, y = geo.to_local(grid.frame, traj.lat, traj.lon)
    q, r = grid.axial_round(np.asarray(x), np.asarray(y))
    cx, cy = grid.center_xy(q, r)
    lat, lon = geo.from_local(grid.frame, cx, cy)
    return traj.with_coords(np.atleast_1d(lat), np.atleast_1d(lon))


def _round_half_away(x: np.ndarray, decimals: int) -> np.ndarray:
    k = 10.0**decimals
    return np.sign(x) * np.floor(np.abs(x) * k + 0.5) / k


def round_coords(traj: Trajectory, decimals: int) -> Trajectory:
    if not (0 <= int(decimals) <= 9):
        raise InvalidArgument(f"decimals must be in [0, 9], got {decimals}")
    return traj.with_coords(_round_half_away(traj.lat, int(decimals)),
                            _round_half_away(traj.lon, int(decimals)))


def add_noise(traj: Trajectory, sigma_m: float, seed: int,
              frame: geo.LocalFrame | None = None) -> Trajectory:
    """Isotropic Gaussian offsets (metres) in a local frame; defaults to one at the first point."""
    if not sigma_m >= 0:
        raise InvalidArgument(f"sigma_m must be >= 0, got {sigma_m}")
    if sigma_m == 0 or len(traj) == 0:
        return traj.with_coords(traj.lat.copy(), traj.lon.copy())
    if frame is None:
        frame = geo.LocalFrame.at((traj.lat[0], traj.lon[0]))
    rng = np.random.default_rng(seed)
    off = rng.normal(0.0, sigma_m, size=(len(traj), 2))
    x, y = geo.to_local(frame, traj.lat, traj.lon)
    lat, lon = geo.from_local(frame, np.asarray(x) + off[:, 0], np.asarray(y) + off[:, 1])
    return traj.with_coords(np.clip(lat, -90.0, 90.0), lon)


# ---------------------------------------------------------------- normalisation


@dataclass(frozen=True)
class NormStats:
    mean_lat: float
    std_lat: float
    mean_lon: float
    std_lon: float
    mean_t: float
    std_t: float

    @property
    def mean(self) -> np.ndarray:
        return np.array([self.mean_lat, self.mean_lon, self.mean_t])

    @property
    def std(self) -> np.ndarray:
        return np.array([self.std_lat, self.std_lon, self.std_t])

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls(**{k: float(d[k]) for k in
                      ("mean_lat", "std_lat", "mean_lon", "std_lon", "mean_t", "std_t")})


def fit_norm_stats(trajs: list[Trajectory]) -> NormStats:
    if not trajs:
        raise InvalidArgument("cannot fit normalisation on an empty dataset")
    data = np.concatenate([np.stack([tr.lat, tr.lon, tr.t], axis=1) for tr in trajs])
    if len(data) < 2:
        raise InvalidArgument("need at least 2 points to fit normalisation")
    mean = data.mean(axis=0)
    std = data.std(axis=0)
    for k, name in enumerate(("lat", "lon", "t")):
        if std[k] < STD_FLOOR:
            log.warning("channel %s is constant; flooring its std at %g", name, STD_FLOOR)
            std[k] = STD_FLOOR
            if np.all(data[:, k] == data[0, k]):
                mean[k] = data[0, k]
    return NormStats(float(mean[0]), float(std[0]), float(mean[1]), float(std[1]),
                     float(mean[2]), float(std[2]))


def normalize(traj: Trajectory, s: NormStats) -> np.ndarray:
    """(L, 3) z-scores of lat, lon, t."""
    return (np.stack([traj.lat, traj.lon, traj.t], axis=1) - s.mean) / s.std


def normalize_coords(lat, lon, s: NormStats) -> np.ndarray:
    return np.stack([(np.asarray(lat) - s.mean_lat) / s.std_lat,
                     (np.asarray(lon) - s.mean_lon) / s.std_lon], axis=-1)


def denormalize(values: np.ndarray, s: NormStats) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of the lat/lon channels; ``values`` is (L, 2) or (L, 3)."""
    values = np.asarray(values)
    return values[:, 0] * s.std_lat + s.mean_lat, values[:, 1] * s.std_lon + s.mean_lon
