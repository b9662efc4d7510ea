"""Trajectory similarity (discrete Fréchet, DTW) and evaluation reports."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .geo import pairwise_haversine_km
from .trajectory import Trajectory

DEFAULT_BINS = [round(0.1 * k, 10) for k in range(21)] + [math.inf]


def _cost_matrix(a: Trajectory, b: Trajectory) -> np.ndarray:
    if len(a) == 0 or len(b) == 0:
        raise InvalidArgument("trajectories must be non-empty")
    return pairwise_haversine_km(a.lat, a.lon, b.lat, b.lon)


def frechet_from_costs(d: np.ndarray) -> float:
    n, m = d.shape
    c = np.empty((n, m))
    c[0, 0] = d[0, 0]
    for j in range(1, m):
        c[0, j] = max(c[0, j - 1], d[0, j])
    for i in range(1, n):
        c[i, 0] = max(c[i - 1, 0], d[i, 0])
        prev, row, di = c[i - 1], c[i], d[i]
        for j in range(1, m):
            best = min(prev[j], row[j - 1], prev[j - 1])
            row[j] = best if best > di[j] else di[j]
    return float(c[-1, -1])


def discrete_frechet_km(a: Trajectory, b: Trajectory) -> float:
    """Discrete Fréchet distance with haversine point distance, in km."""
    return frechet_from_costs(_cost_matrix(a, b))


def dtw_from_costs(d: np.ndarray) -> float:
    n, m = d.shape
    c = np.full((n + 1, m + 1), np.inf)
    c[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            c[i, j] = d[i - 1, j - 1] + min(c[i - 1, j], c[i, j - 1], c[i - 1, j - 1])
    return float(c[n, m])


def dtw_km(a: Trajectory, b: Trajectory) -> float:
    """Classic DTW (sum of haversine costs along the best alignment), in km."""
    return dtw_from_costs(_cost_matrix(a, b))


def nearest_rank(sorted_vals, pct: float) -> float:
    n = len(sorted_vals)
    k = max(1, math.ceil(pct / 100.0 * n))
    return float(sorted_vals[k - 1])


@dataclass
class EvalReport:
    label: str
    distances_km: list[float]
    mean_km: float
    median_km: float
    p85_km: float
    bin_edges_km: list[float]
    counts: list[int]
    traj_ids: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.distances_km)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "n": self.n,
            "mean_km": self.mean_km,
            "median_km": self.median_km,
            "p85_km": self.p85_km,
            # JSON has no Infinity literal in strict mode
            "bin_edges_km": [e if math.isfinite(e) else "inf" for e in self.bin_edges_km],
            "counts": self.counts,
            "traj_ids": self.traj_ids,
            "distances_km": self.distances_km,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(d["label"], [float(x) for x in d["distances_km"]], float(d["mean_km"]),
                   float(d["median_km"]), float(d["p85_km"]),
                   [float(e) for e in d["bin_edges_km"]], [int(c) for c in d["counts"]],
                   list(d.get("traj_ids", [])))

    CSV_HEADER = "label,mean_km,median_km,p85_km,n"

    def csv_row(self) -> str:
        return f"{self.label},{self.mean_km:.6f},{self.median_km:.6f},{self.p85_km:.6f},{self.n}"


def histogram(values, edges) -> list[int]:
    """Counts per half-open bin [e_k, e_k+1)."""
    edges = [float(e) for e in edges]
    if len(edges) < 2 or any(b <= a for a, b in zip(edges, edges[1:])):
        raise InvalidArgument("bin edges must be strictly increasing with at least two entries")
    values = np.asarray(values, dtype=np.float64)
    if np.any(values < edges[0]) or np.any(values >= edges[-1]):
        raise InvalidArgument(f"values fall outside the bins [{edges[0]}, {edges[-1]})")
    idx = np.searchsorted(np.asarray(edges), values, side="right") - 1
    return np.bincount(idx, minlength=len(edges) - 1).tolist()


def summarize(distances, label: str, bins=None, traj_ids=None) -> EvalReport:
    if len(distances) == 0:
        raise InvalidArgument("need at least one distance")
    bins = DEFAULT_BINS if bins is None else [float(b) for b in bins]
    vals = [float(d) for d in distances]
    srt = sorted(vals)
    return EvalReport(label, vals, float(np.mean(vals)), nearest_rank(srt, 50), nearest_rank(srt, 85),
                      bins, histogram(vals, bins), list(traj_ids or []))


def evaluate(pairs, bins=None, label: str = "candidate") -> EvalReport:
    """Fréchet distance of every (candidate, reference) pair, aggregated."""
    if len(pairs) == 0:
        raise InvalidArgument("need at least one pair to evaluate")
    dists = [discrete_frechet_km(c, r) for c, r in pairs]
    return summarize(dists, label, bins, [r.id for _, r in pairs])


def render_table(reports) -> str:
    """Markdown summary, one row per method."""
    lines = ["| Trajectory | Distance |", "|---|---|"]
    for rep in reports:
        lines.append(f"| {rep.label} | {rep.mean_km:.3f} km |")
    return "\n".join(lines) + "\n"
