"""Synthetic trajectories: random origin/destination nodes routed over the road graph.

Routes are traversed at constant speed and sampled every ``dt_s`` seconds.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import geo
from .errors import GenerationFailed, InvalidArgument, Unreachable
from .roadnet import RoadGraph, shortest_path
from .trajectory import Trajectory

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenConfig:
    bbox: tuple[tuple[float, float], tuple[float, float]]
    n_traj: int = 200
    speed_mps: float = 8.0
    dt_s: float = 15.0
    max_len: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.n_traj < 1:
            raise InvalidArgument(f"n_traj must be >= 1, got {self.n_traj}")
        if not self.speed_mps > 0:
            raise InvalidArgument(f"speed_mps must be positive, got {self.speed_mps}")
        if not self.dt_s > 0:
            raise InvalidArgument(f"dt_s must be positive, got {self.dt_s}")
        if self.max_len < 2:
            raise InvalidArgument(f"max_len must be >= 2, got {self.max_len}")
        lo, hi = geo.check_point(self.bbox[0]), geo.check_point(self.bbox[1])
        if not (lo.lat <= hi.lat and lo.lon <= hi.lon):
            raise InvalidArgument("bbox corners must be (south-west, north-east)")


def path_to_trajectory(g: RoadGraph, path: list[int], speed_mps: float, dt_s: float,
                       traj_id: str) -> Trajectory:
    """Constant-speed traversal of ``path``, one point every ``dt_s`` seconds plus the arrival."""
    if not (speed_mps > 0 and dt_s > 0):
        raise InvalidArgument("speed_mps and dt_s must be positive")
    f = g.frame
    lat = np.array([g.nodes[n].lat for n in path])
    lon = np.array([g.nodes[n].lon for n in path])
    x, y = geo.to_local(f, lat, lon)
    x, y = np.atleast_1d(x), np.atleast_1d(y)
    cum = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(x), np.diff(y)))])
    total = cum[-1]
    if not total > 0:
        raise InvalidArgument(f"path for {traj_id!r} has zero length")
    duration = total / speed_mps
    n = int(math.floor(duration / dt_s + 1e-9))
    t = np.arange(n + 1) * dt_s
    if duration - t[-1] > 1e-9 * max(1.0, duration):
        t = np.append(t, duration)
    else:
        t[-1] = duration
    s = np.minimum(t * speed_mps, total)
    k = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(cum) - 2)
    seg = cum[k + 1] - cum[k]
    a = np.where(seg > 0, (s - cum[k]) / np.where(seg > 0, seg, 1.0), 0.0)
    px = x[k] + a * (x[k + 1] - x[k])
    py = y[k] + a * (y[k + 1] - y[k])
    # pin the endpoints to the exact node coordinates
    plat, plon = geo.from_local(f, px, py)
    plat[0], plon[0] = lat[0], lon[0]
    plat[-1], plon[-1] = lat[-1], lon[-1]
    return Trajectory(traj_id, plat, plon, t)


def generate_dataset(g: RoadGraph, cfg: GenConfig) -> list[Trajectory]:
    (la0, lo0), (la1, lo1) = cfg.bbox
    inside = g.node_ids[(g.lat >= la0) & (g.lat <= la1) & (g.lon >= lo0) & (g.lon <= lo1)]
    if len(inside) < 2:
        raise GenerationFailed("fewer than two road nodes inside the bbox")
    rng = np.random.default_rng(cfg.seed)
    budget = 1000 * cfg.n_traj
    out: list[Trajectory] = []
    draws = 0
    while len(out) < cfg.n_traj:
        if draws >= budget:
            raise GenerationFailed(f"only {len(out)} of {cfg.n_traj} trajectories after {draws} draws")
        draws += 1
        i, j = rng.choice(len(inside), size=2, replace=False)
        try:
            path = shortest_path(g, int(inside[i]), int(inside[j]))
        except Unreachable:
            continue
        tr = path_to_trajectory(g, path, cfg.speed_mps, cfg.dt_s, f"traj{len(out):05d}")
        if 2 <= len(tr) <= cfg.max_len:
            out.append(tr)
    log.info("generated %d trajectories in %d draws", len(out), draws)
    return out


def split_dataset(trajs: list[Trajectory], ratios=(0.8, 0.1, 0.1), seed: int = 0):
    """Seeded shuffle, then train/val/test. Val and test get floor(n * ratio); train the rest."""
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise InvalidArgument(f"ratios must be three positive numbers summing to 1, got {ratios}")
    n = len(trajs)
    if n < 3:
        raise InvalidArgument(f"need at least 3 trajectories to split, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    n_val = int(math.floor(n * ratios[1]))
    n_test = int(math.floor(n * ratios[2]))
    n_train = n - n_val - n_test
    shuffled = [trajs[k] for k in order]
    return shuffled[:n_train], shuffled[n_train:n_train + n_val], shuffled[n_train + n_val:]
