"""HMM map matching (Newson & Krumm 2009) with log-domain Viterbi.

Hidden states are projections of each GPS fix onto nearby road edges. The
emission score is a Gaussian in the projection distance; the transition score
penalises the gap between the network route length and the straight-line
distance of consecutive fixes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geo
from .errors import BrokenChain, InvalidArgument, UnmatchedPoint
from .roadnet import EdgeProjection, RoadGraph, dijkstra, project_to_edges
from .trajectory import Trajectory


@dataclass(frozen=True)
class HmmParams:
    sigma_m: float = 10.0
    beta_m: float = 200.0
    candidate_radius_m: float = 2440.0
    max_candidates: int = 8

    def __post_init__(self):
        if not (self.sigma_m > 0 and self.beta_m > 0 and self.candidate_radius_m > 0):
            raise InvalidArgument("HMM sigma_m, beta_m and candidate_radius_m must be positive")
        if self.max_candidates < 1:
            raise InvalidArgument("max_candidates must be >= 1")


class _RouteCache:
    def __init__(self, g: RoadGraph):
        self.g = g
        self._dist: dict[int, dict[int, float]] = {}

    def node_dist(self, a: int, b: int) -> float:
        if a not in self._dist:
            self._dist[a] = dijkstra(self.g, a)[0]
        return self._dist[a].get(b, np.inf)

    def route_km(self, c1: EdgeProjection, c2: EdgeProjection) -> float:
        w1 = self.g.weight(c1.u, c1.v)
        w2 = self.g.weight(c2.u, c2.v)
        if (c1.u, c1.v) == (c2.u, c2.v):
            return abs(c1.frac - c2.frac) * w1
        best = np.inf
        for n1, d1 in ((c1.u, c1.frac * w1), (c1.v, (1.0 - c1.frac) * w1)):
            for n2, d2 in ((c2.u, c2.frac * w2), (c2.v, (1.0 - c2.frac) * w2)):
                best = min(best, d1 + self.node_dist(n1, n2) + d2)
        return best


def candidates_for(g: RoadGraph, traj: Trajectory, p: HmmParams) -> list[list[EdgeProjection]]:
    cands = []
    for k in range(len(traj)):
        c = project_to_edges(g, (traj.lat[k], traj.lon[k]), p.candidate_radius_m)[:p.max_candidates]
        if not c:
            raise UnmatchedPoint(f"point {k} has no road within {p.candidate_radius_m} m")
        cands.append(c)
    return cands


def map_match(g: RoadGraph, traj: Trajectory, p: HmmParams | None = None) -> Trajectory:
    """Most likely sequence of road positions; same id, length and timestamps as ``traj``."""
    p = p or HmmParams()
    if len(traj) == 0:
        raise InvalidArgument("cannot match an empty trajectory")
    if len(g) == 0 or g.n_edges == 0:
        raise InvalidArgument("graph has no edges")
    cands = candidates_for(g, traj, p)
    routes = _RouteCache(g)

    def emission(c: EdgeProjection) -> float:
        return -(c.distance_m**2) / (2.0 * p.sigma_m**2)

    score = np.array([emission(c) for c in cands[0]])
    back: list[np.ndarray] = []
    for k in range(1, len(traj)):
        gc_m = 1000.0 * geo.haversine_km((traj.lat[k - 1], traj.lon[k - 1]), (traj.lat[k], traj.lon[k]))
        prev, cur = cands[k - 1], cands[k]
        trans = np.full((len(prev), len(cur)), -np.inf)
        for i, a in enumerate(prev):
            if not np.isfinite(score[i]):
                continue
            for j, b in enumerate(cur):
                route_m = 1000.0 * routes.route_km(a, b)
                if np.isfinite(route_m):
                    trans[i, j] = -abs(route_m - gc_m) / p.beta_m
        total = score[:, None] + trans
        # argmax returns the first maximum, i.e. the predecessor with the smaller emission distance
        best_prev = np.argmax(total, axis=0)
        new_score = total[best_prev, np.arange(len(cur))]
        if not np.any(np.isfinite(new_score)):
            raise BrokenChain(f"no feasible transition between points {k - 1} and {k}")
        score = new_score + np.array([emission(c) for c in cur])
        back.append(best_prev)

    state = int(np.argmax(score))
    chosen = [state]
    for bp in reversed(back):
        state = int(bp[state])
        chosen.append(state)
    chosen.reverse()
    matched = [cands[k][s] for k, s in enumerate(chosen)]
    return traj.with_coords(np.array([c.lat for c in matched]), np.array([c.lon for c in matched]))

