"""The Trajectory value type and its JSON Lines file format.

One JSON object per point::

    {"traj_id": "t00001", "seq": 0, "lat": 39.9, "lon": 116.4, "t": 0.0}

``seq`` counts from 0 within each trajectory. Trajectories keep the order in
which their ids first appear in the file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable

import numpy as np

from .errors import InvalidArgument, LoadError


@dataclass(frozen=True, eq=False)
class Trajectory:
    id: str
    lat: np.ndarray
    lon: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        for name in ("lat", "lon", "t"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (self.lat.ndim == self.lon.ndim == self.t.ndim == 1):
            raise InvalidArgument("trajectory arrays must be one-dimensional")
        if not (len(self.lat) == len(self.lon) == len(self.t)):
            raise InvalidArgument(f"trajectory {self.id!r}: lat/lon/t lengths differ")
        if not (np.all(np.isfinite(self.lat)) and np.all(np.isfinite(self.lon)) and np.all(np.isfinite(self.t))):
            raise InvalidArgument(f"trajectory {self.id!r}: non-finite values")
        if np.any(np.abs(self.lat) > 90) or np.any(np.abs(self.lon) > 180):
            raise InvalidArgument(f"trajectory {self.id!r}: coordinate out of range")

    def __len__(self) -> int:
        return len(self.lat)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.id == other.id and np.array_equal(self.lat, other.lat)
                and np.array_equal(self.lon, other.lon) and np.array_equal(self.t, other.t))

    def coords(self) -> np.ndarray:
        """(L, 2) array of lat, lon."""
        return np.stack([self.lat, self.lon], axis=1)

    def with_coords(self, lat, lon) -> "Trajectory":
        return Trajectory(self.id, lat, lon, self.t)


def write_jsonl(trajs: Iterable[Trajectory], fh: IO[str]) -> None:
    for tr in trajs:
        for k in range(len(tr)):
            rec = {"traj_id": tr.id, "seq": k, "lat": float(tr.lat[k]),
                   "lon": float(tr.lon[k]), "t": float(tr.t[k])}
            fh.write(json.dumps(rec) + "\n")


def read_jsonl(fh: IO[str]) -> list[Trajectory]:
    rows: dict[str, list[tuple[int, float, float, float]]] = {}
    for lineno, line in enumerate(fh, 1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
            key = str(rec["traj_id"])
            rows.setdefault(key, []).append(
                (int(rec["seq"]), float(rec["lat"]), float(rec["lon"]), float(rec["t"])))
        except (ValueError, KeyError, TypeError) as exc:
            raise LoadError(f"line {lineno}: bad trajectory record ({exc})") from None
    out = []
    for key, pts in rows.items():
        pts.sort(key=lambda r: r[0])
        seqs = [p[0] for p in pts]
        if seqs != list(range(len(pts))):
            raise LoadError(f"trajectory {key!r}: seq must run 0..{len(pts) - 1}")
        arr = np.array([p[1:] for p in pts])
        out.append(Trajectory(key, arr[:, 0], arr[:, 1], arr[:, 2]))
    return out


def save_jsonl(trajs: Iterable[Trajectory], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_jsonl(trajs, fh)


def load_jsonl(path) -> list[Trajectory]:
    with open(path, encoding="utf-8") as fh:
        return read_jsonl(fh)
