"""Plain SVG figures: error histograms and trajectory overlays.

Output is deterministic text (fixed float formatting, no timestamps), so two
runs over the same inputs produce identical files.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from . import geo
from .errors import InvalidArgument
from .metrics import EvalReport
from .trajectory import Trajectory

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]


def _bin_label(lo: float, hi: float) -> str:
    return f"{lo:g}+" if math.isinf(hi) else f"{lo:g}"


def _svg(width: int, height: int, body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">')
    return "\n".join([head, f'<rect width="{width}" height="{height}" fill="white"/>', *body, "</svg>"]) + "\n"


def histogram_svg(reports: list[EvalReport], width: int = 720, height: int = 360) -> str:
    """Grouped bars: share of trajectories per Fréchet-distance bin, one colour per report."""
    if not reports:
        raise InvalidArgument("no reports to plot")
    edges = reports[0].bin_edges_km
    if any(r.bin_edges_km != edges for r in reports):
        raise InvalidArgument("reports use different histogram bins")
    left, right, top, bottom = 50, 10, 30, 40
    pw, ph = width - left - right, height - top - bottom
    n_bins = len(edges) - 1
    shares = [np.asarray(r.counts, dtype=float) / max(1, r.n) for r in reports]
    ymax = max(0.05, max(float(s.max()) for s in shares))
    slot = pw / n_bins
    bar = slot * 0.8 / len(reports)
    body = [f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
            f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
            f'<text x="{left + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">Fréchet distance (km)</text>']
    for k in range(5):
        v = ymax * k / 4
        y = top + ph - ph * v / ymax
        body.append(f'<text x="{left - 4}" y="{y + 4:.1f}" text-anchor="end">{v:.2f}</text>')
    for b in range(n_bins):
        x0 = left + b * slot
        if b % max(1, n_bins // 10) == 0:
            body.append(f'<text x="{x0 + slot / 2:.1f}" y="{top + ph + 14}" text-anchor="middle">'
                        f'{_bin_label(edges[b], edges[b + 1])}</text>')
        for i, s in enumerate(shares):
            h = ph * s[b] / ymax
            body.append(f'<rect class="bar" x="{x0 + slot * 0.1 + i * bar:.2f}" y="{top + ph - h:.2f}" '
                        f'width="{bar:.2f}" height="{h:.2f}" fill="{PALETTE[i % len(PALETTE)]}"/>')
    for i, r in enumerate(reports):
        y = top - 14
        x = left + 10 + i * 170
        body.append(f'<rect x="{x}" y="{y - 8}" width="10" height="10" fill="{PALETTE[i % len(PALETTE)]}"/>')
        body.append(f'<text x="{x + 14}" y="{y + 1}">{escape(r.label)}</text>')
    return _svg(width, height, body)


def overlay_svg(layers: list[tuple[str, Trajectory]], width: int = 560, height: int = 560) -> str:
    """One polyline per (label, trajectory), drawn in a shared local metric frame."""
    if not layers:
        raise InvalidArgument("nothing to draw")
    lat = np.concatenate([t.lat for _, t in layers])
    lon = np.concatenate([t.lon for _, t in layers])
    frame = geo.LocalFrame.at(((lat.min() + lat.max()) / 2, (lon.min() + lon.max()) / 2))
    xs, ys = geo.to_local(frame, lat, lon)
    span = max(float(np.ptp(xs)), float(np.ptp(ys)), 1.0)
    pad = 40
    s = (min(width, height) - 2 * pad) / span
    cx, cy = (xs.min() + xs.max()) / 2, (ys.min() + ys.max()) / 2
    body = []
    for i, (label, tr) in enumerate(layers):
        x, y = geo.to_local(frame, tr.lat, tr.lon)
        px = width / 2 + (np.atleast_1d(x) - cx) * s
        py = height / 2 - (np.atleast_1d(y) - cy) * s
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        colour = PALETTE[i % len(PALETTE)]
        attr = escape(label, {'"': "&quot;"})
        body.append(f'<polyline class="traj" data-label="{attr}" points="{pts}" fill="none" '
                    f'stroke="{colour}" stroke-width="2" stroke-opacity="0.8"/>')
        body.append(f'<rect x="{pad + i * 130}" y="12" width="10" height="10" fill="{colour}"/>')
        body.append(f'<text x="{pad + i * 130 + 14}" y="21">{escape(label)}</text>')
    scale_m = 10 ** math.floor(math.log10(span / 2))
    body.append(f'<line x1="{pad}" y1="{height - 20}" x2="{pad + scale_m * s:.2f}" y2="{height - 20}" '
                f'stroke="black" stroke-width="2"/>')
    body.append(f'<text x="{pad}" y="{height - 6}">{scale_m:g} m</text>')
    return _svg(width, height, body)
