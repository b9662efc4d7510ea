"""Undirected road graphs: loading, Dijkstra, local subgraphs, edge projection.

Graph files are JSON::

    {"nodes": [{"id": 0, "lat": 39.9, "lon": 116.4}, ...],
     "edges": [{"u": 0, "v": 1}, ...]}

Edge weights are always recomputed as the haversine length of the edge, in km;
any weight present in the file is ignored.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from typing import IO, Iterable, NamedTuple

import numpy as np

from . import geo
from .errors import DegenerateEdge, EmptySubgraph, InvalidArgument, LoadError, NotFound, Unreachable

MIN_EDGE_KM = 1e-9


class RoadGraph:
    """Immutable once built. Node ids are non-negative ints."""

    def __init__(self, nodes: dict[int, tuple[float, float]], edges: Iterable[tuple[int, int]]):
        self.nodes: dict[int, geo.GeoPoint] = {}
        for nid, p in nodes.items():
            if int(nid) < 0:
                raise InvalidArgument(f"negative node id {nid}")
            self.nodes[int(nid)] = geo.check_point(p)
        self.adj: dict[int, dict[int, float]] = {n: {} for n in self.nodes}
        for u, v in edges:
            u, v = int(u), int(v)
            for end in (u, v):
                if end not in self.nodes:
                    raise LoadError(f"dangling endpoint {end}")
            if u == v:
                raise LoadError(f"self-loop on node {u}")
            w = geo.haversine_km(self.nodes[u], self.nodes[v])
            if not (w > 0 and math.isfinite(w)):
                raise LoadError(f"edge ({u}, {v}) has zero length")
            self.adj[u][v] = w
            self.adj[v][u] = w

        self.node_ids = np.array(sorted(self.nodes), dtype=np.int64)
        self.lat = np.array([self.nodes[n].lat for n in self.node_ids])
        self.lon = np.array([self.nodes[n].lon for n in self.node_ids])
        # each undirected edge once, as (min id, max id), sorted
        self.edges: list[tuple[int, int, float]] = sorted(
            (u, v, w) for u, nbrs in self.adj.items() for v, w in nbrs.items() if u < v)
        self._frame: geo.LocalFrame | None = None
        self._seg: tuple[np.ndarray, ...] | None = None

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def weight(self, u: int, v: int) -> float:
        return self.adj[u][v]

    @property
    def frame(self) -> geo.LocalFrame:
        """Local frame centred on the node bounding box."""
        if self._frame is None:
            if not self.nodes:
                raise InvalidArgument("empty graph has no frame")
            self._frame = geo.LocalFrame.at((
                (self.lat.min() + self.lat.max()) / 2.0, (self.lon.min() + self.lon.max()) / 2.0))
        return self._frame

    def bbox(self) -> tuple[geo.GeoPoint, geo.GeoPoint]:
        return (geo.GeoPoint(self.lat.min(), self.lon.min()),
                geo.GeoPoint(self.lat.max(), self.lon.max()))

    def segments(self) -> tuple[np.ndarray, ...]:
        """Edge endpoints in the graph frame: (u ids, v ids, ax, ay, bx, by)."""
        if self._seg is None:
            f = self.frame
            us = np.array([e[0] for e in self.edges], dtype=np.int64)
            vs = np.array([e[1] for e in self.edges], dtype=np.int64)
            lat = np.array([self.nodes[u].lat for u in us])
            lon = np.array([self.nodes[u].lon for u in us])
            ax, ay = geo.to_local(f, lat, lon)
            lat = np.array([self.nodes[v].lat for v in vs])
            lon = np.array([self.nodes[v].lon for v in vs])
            bx, by = geo.to_local(f, lat, lon)
            self._seg = (us, vs, np.atleast_1d(ax), np.atleast_1d(ay), np.atleast_1d(bx), np.atleast_1d(by))
        return self._seg

    def to_json(self) -> dict:
        return {
            "nodes": [{"id": int(n), "lat": self.nodes[n].lat, "lon": self.nodes[n].lon}
                      for n in self.node_ids],
            "edges": [{"u": u, "v": v} for u, v, _ in self.edges],
        }

    def dump(self, fh: IO[str]) -> None:
        json.dump(self.to_json(), fh)


def load_graph(source: IO | bytes | str) -> RoadGraph:
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    try:
        doc = json.loads(source)
    except json.JSONDecodeError as exc:
        raise LoadError(f"malformed graph JSON: {exc}") from None
    if not isinstance(doc, dict) or "nodes" not in doc or "edges" not in doc:
        raise LoadError("graph JSON needs top-level 'nodes' and 'edges'")
    nodes: dict[int, tuple[float, float]] = {}
    for k, rec in enumerate(doc["nodes"]):
        try:
            nid = int(rec["id"])
            p = geo.check_point((rec["lat"], rec["lon"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise LoadError(f"node record {k}: {exc}") from None
        if nid in nodes:
            raise LoadError(f"duplicate node id {nid}")
        nodes[nid] = p
    edges = []
    for k, rec in enumerate(doc["edges"]):
        try:
            edges.append((int(rec["u"]), int(rec["v"])))
        except (KeyError, TypeError, ValueError) as exc:
            raise LoadError(f"edge record {k}: {exc}") from None
    return RoadGraph(nodes, edges)


def load_graph_file(path) -> RoadGraph:
    with open(path, "rb") as fh:
        return load_graph(fh)


def grid_graph(rows: int, cols: int, spacing_m: float, origin=(39.9, 116.4)) -> RoadGraph:
    """Regular lattice of intersections, ``spacing_m`` apart, south-west corner at ``origin``.

    Node id is ``row * cols + col``.
    """
    f = geo.LocalFrame.at(origin)
    nodes = {}
    for r in range(rows):
        for c in range(cols):
            nodes[r * cols + c] = tuple(geo.from_local(f, c * spacing_m, r * spacing_m))
    edges = []
    for r in range(rows):
        for c in range(cols):
            n = r * cols + c
            if c + 1 < cols:
                edges.append((n, n + 1))
            if r + 1 < rows:
                edges.append((n, n + cols))
    return RoadGraph(nodes, edges)


# ---------------------------------------------------------------- routing


def dijkstra(g: RoadGraph, source: int, target: int | None = None):
    """Distances (km) and predecessors from ``source``; stops early at ``target``.

    The heap orders by (distance, node id), so equal tentative distances settle
    the smaller id first; predecessors only change on strict improvement.
    """
    if source not in g.nodes:
        raise NotFound(f"node {source} not in graph")
    dist = {source: 0.0}
    prev: dict[int, int] = {}
    done: set[int] = set()
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == target:
            break
        for v, w in g.adj[u].items():
            nd = d + w
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                prev[v] = u
                heapq.heappush(heap, (nd, v))
    return dist, prev


def shortest_path(g: RoadGraph, u: int, v: int) -> list[int]:
    if u not in g.nodes:
        raise NotFound(f"node {u} not in graph")
    if v not in g.nodes:
        raise NotFound(f"node {v} not in graph")
    dist, prev = dijkstra(g, u, v)
    if v not in dist:
        raise Unreachable(f"no path from {u} to {v}")
    path = [v]
    while path[-1] != u:
        path.append(prev[path[-1]])
    return path[::-1]


def path_length_km(g: RoadGraph, path: list[int]) -> float:
    return float(sum(g.adj[a][b] for a, b in zip(path, path[1:])))


# ---------------------------------------------------------------- subgraphs


@dataclass(frozen=True)
class Subgraph:
    graph: RoadGraph
    index_map: dict[int, int]

    @property
    def node_ids(self) -> np.ndarray:
        return self.graph.node_ids


def induced_subgraph(g: RoadGraph, keep: Iterable[int]) -> Subgraph:
    keep = set(int(n) for n in keep)
    sub = RoadGraph({n: g.nodes[n] for n in keep},
                    [(u, v) for u, v, _ in g.edges if u in keep and v in keep])
    return Subgraph(sub, {int(n): i for i, n in enumerate(sub.node_ids)})


def local_subgraph(g: RoadGraph, traj, radius_km: float) -> Subgraph:
    """Nodes within ``radius_km`` of any trajectory point, with the edges among them."""
    if not radius_km > 0:
        raise InvalidArgument(f"radius_km must be positive, got {radius_km}")
    if len(traj) == 0:
        raise InvalidArgument("trajectory is empty")
    if len(g) == 0:
        raise EmptySubgraph("graph is empty")
    d = geo.pairwise_haversine_km(g.lat, g.lon, traj.lat, traj.lon)
    keep = g.node_ids[d.min(axis=1) <= radius_km]
    if len(keep) == 0:
        raise EmptySubgraph(f"no road node within {radius_km} km of the trajectory")
    return induced_subgraph(g, keep)


def inverse_distance_weights(sg: Subgraph) -> np.ndarray:
    """Dense symmetric N x N matrix holding 1 / edge length (km) on each edge."""
    n = len(sg.index_map)
    a = np.zeros((n, n))
    for u, v, w in sg.graph.edges:
        if w < MIN_EDGE_KM:
            raise DegenerateEdge(f"edge ({u}, {v}) is only {w} km long")
        i, j = sg.index_map[u], sg.index_map[v]
        a[i, j] = a[j, i] = 1.0 / w
    return a


# ---------------------------------------------------------------- projection


class EdgeProjection(NamedTuple):
    u: int
    v: int
    lat: float
    lon: float
    distance_m: float
    frac: float  # position along u -> v in [0, 1]


def project_to_edges(g: RoadGraph, p, radius_m: float) -> list[EdgeProjection]:
    """Nearest point on every edge within ``radius_m``, nearest first.

    Segments are straight lines in the graph's local frame; ties go to the
    smaller (u, v) pair.
    """
    if not radius_m > 0:
        raise InvalidArgument(f"radius_m must be positive, got {radius_m}")
    p = geo.check_point(p)
    if g.n_edges == 0:
        return []
    us, vs, ax, ay, bx, by = g.segments()
    px, py = geo.to_local(g.frame, p.lat, p.lon)
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    frac = np.clip(((px - ax) * dx + (py - ay) * dy) / seg2, 0.0, 1.0)
    qx, qy = ax + frac * dx, ay + frac * dy
    dist = np.hypot(px - qx, py - qy)
    sel = np.nonzero(dist <= radius_m)[0]
    # quantise so projections onto a shared endpoint tie exactly
    key = np.round(dist[sel], 9)
    order = sel[np.lexsort((vs[sel], us[sel], key))]
    lat, lon = geo.from_local(g.frame, qx[order], qy[order])
    return [EdgeProjection(int(us[k]), int(vs[k]), float(la), float(lo), float(dist[k]), float(frac[k]))
            for k, la, lo in zip(order, np.atleast_1d(lat), np.atleast_1d(lon))]


def point_to_segment_m(px, py, ax, ay, bx, by) -> np.ndarray:
    dx, dy = bx - ax, by - ay
    seg2 = dx * dx + dy * dy
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / np.where(seg2 > 0, seg2, 1.0), 0.0, 1.0)
    return np.hypot(px - ax - t * dx, py - ay - t * dy)


def distance_to_network_m(g: RoadGraph, lat, lon) -> np.ndarray:
    """Planar distance from each point to its nearest edge, in the graph frame."""
    us, vs, ax, ay, bx, by = g.segments()
    px, py = geo.to_local(g.frame, np.atleast_1d(lat), np.atleast_1d(lon))
    d = point_to_segment_m(px[:, None], py[:, None], ax[None], ay[None], bx[None], by[None])
    return d.min(axis=1)
