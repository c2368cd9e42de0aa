"""Deterministic hand-written SVG plots of exported arcs.

Every figure has a fixed viewport and fixed-precision coordinates, so the
same arcs always produce the same bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .manifolds import manifold_from_name

PANEL = 360
PAD = 40
MAX_POINTS = 1500
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


@dataclass
class ArcPanel:
    manifold: str
    t: np.ndarray
    z: np.ndarray
    jump_indices: np.ndarray
    target: np.ndarray
    critical_points: list = field(default_factory=list)


def arc_panel_data(manifold, t, z, jump_indices, target, critical_points=()):
    return ArcPanel(manifold, np.asarray(t, dtype=float), np.asarray(z, dtype=float),
                    np.asarray(jump_indices, dtype=int), np.asarray(target, dtype=float),
                    [np.asarray(c, dtype=float) for c in critical_points])


def _f(v):
    return f"{v:.2f}"


def _decimate(n, keep):
    """Sample indices for a polyline: an even subset plus every index in ``keep``."""
    if n <= MAX_POINTS:
        return np.arange(n)
    idx = np.unique(np.concatenate((np.linspace(0, n - 1, MAX_POINTS).round().astype(int), keep, keep - 1)))
    return idx[(idx >= 0) & (idx < n)]


class _Frame:
    """Maps data coordinates of one panel to SVG pixels."""

    def __init__(self, x0, y0, xlim, ylim, w=PANEL, h=PANEL):
        self.x0, self.y0, self.xlim, self.ylim, self.w, self.h = x0, y0, xlim, ylim, w, h

    def __call__(self, x, y):
        px = self.x0 + (np.asarray(x) - self.xlim[0]) / (self.xlim[1] - self.xlim[0]) * self.w
        py = self.y0 + self.h - (np.asarray(y) - self.ylim[0]) / (self.ylim[1] - self.ylim[0]) * self.h
        return px, py

    def box(self, label):
        return [
            f'<rect x="{_f(self.x0)}" y="{_f(self.y0)}" width="{self.w}" height="{self.h}" '
            f'fill="none" stroke="#444" stroke-width="1"/>',
            f'<text x="{_f(self.x0 + self.w / 2)}" y="{_f(self.y0 - 8)}" text-anchor="middle" '
            f'font-size="13">{escape(label)}</text>',
        ]


def _polyline(px, py, color, breaks=()):
    """Polyline split where successive points jump across the panel (azimuth wrap)."""
    out = []
    start = 0
    for b in list(breaks) + [len(px)]:
        if b - start >= 2:
            pts = " ".join(f"{_f(a)},{_f(c)}" for a, c in zip(px[start:b], py[start:b]))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.2"/>')
        start = b
    return out


def _markers(px, py, idx, color):
    out = []
    for k in idx:
        out.append(f'<circle class="jump" cx="{_f(px[k])}" cy="{_f(py[k])}" r="4" fill="none" '
                   f'stroke="{color}" stroke-width="1.5"/>')
    return out


def _star(px, py, label, color):
    return [
        f'<path class="target" d="M{_f(px - 6)},{_f(py)} L{_f(px + 6)},{_f(py)} M{_f(px)},{_f(py - 6)} '
        f'L{_f(px)},{_f(py + 6)}" stroke="{color}" stroke-width="2"/>',
        f'<text x="{_f(px + 8)}" y="{_f(py - 8)}" font-size="11" fill="{color}">{escape(label)}</text>',
    ]


def _cross(px, py, label):
    return [
        f'<path class="critical" d="M{_f(px - 5)},{_f(py - 5)} L{_f(px + 5)},{_f(py + 5)} '
        f'M{_f(px - 5)},{_f(py + 5)} L{_f(px + 5)},{_f(py - 5)}" stroke="#000" stroke-width="1.5"/>',
        f'<text x="{_f(px + 7)}" y="{_f(py + 14)}" font-size="11">{escape(label)}</text>',
    ]


def _embedded_panel(frame, panels, a, b, label):
    """Projection onto ambient coordinates ``(a, b)`` with the unit circle drawn."""
    out = frame.box(label)
    cx, cy = frame(0.0, 0.0)
    r = frame(1.0, 0.0)[0] - cx
    out.append(f'<circle cx="{_f(cx)}" cy="{_f(cy)}" r="{_f(r)}" fill="none" stroke="#bbb" stroke-dasharray="3,3"/>')
    for k, p in enumerate(panels):
        color = COLORS[k % len(COLORS)]
        idx = _decimate(len(p.z), p.jump_indices)
        px, py = frame(p.z[:, a], p.z[:, b])
        out += _polyline(px[idx], py[idx], color)
        out += _markers(px, py, p.jump_indices, color)
    p0 = panels[0]
    for c in p0.critical_points:
        out += _cross(*frame(c[a], c[b]), "critical")
    out += _star(*frame(p0.target[a], p0.target[b]), "target", "#2ca02c")
    return out


def _azel_panel(frame, panels):
    out = frame.box("azimuth vs elevation")
    for k, p in enumerate(panels):
        color = COLORS[k % len(COLORS)]
        az, el = _az_el(p.z)
        idx = _decimate(len(p.z), p.jump_indices)
        px, py = frame(az, el)
        wraps = np.flatnonzero(np.abs(np.diff(az[idx])) > math.pi) + 1
        out += _polyline(px[idx], py[idx], color, breaks=wraps)
        out += _markers(px, py, p.jump_indices, color)
    p0 = panels[0]
    for c in p0.critical_points:
        out += _cross(*frame(*_az_el(c)), "critical")
    out += _star(*frame(*_az_el(p0.target)), "target", "#2ca02c")
    return out


def _az_el(z):
    z = np.asarray(z, dtype=float)
    return np.arctan2(z[..., 1], z[..., 0]), np.arcsin(np.clip(z[..., 2], -1.0, 1.0))


def _distance_panel(frame, panels, manifold):
    out = frame.box("log10 distance to target vs t")
    for k, p in enumerate(panels):
        color = COLORS[k % len(COLORS)]
        d = np.log10(np.clip(manifold.distance(p.z, p.target), 1e-12, None))
        idx = _decimate(len(p.z), p.jump_indices)
        px, py = frame(p.t, np.clip(d, frame.ylim[0], frame.ylim[1]))
        out += _polyline(px[idx], py[idx], color)
        out += _markers(px, py, p.jump_indices, color)
    for v in range(int(frame.ylim[0]), int(frame.ylim[1]) + 1, 3):
        _, y = frame(frame.xlim[0], v)
        out.append(f'<text x="{_f(frame.x0 - 4)}" y="{_f(y + 4)}" text-anchor="end" font-size="10">{v}</text>')
    _, y = frame(0, frame.ylim[0])
    out.append(f'<text x="{_f(frame.x0 + frame.w)}" y="{_f(y + 14)}" text-anchor="end" font-size="10">'
               f't = {frame.xlim[1]:.4g}</text>')
    return out


def render_svg(panels, title="", manifold="circle"):
    """SVG text for a list of :class:`ArcPanel` on one manifold."""
    m = manifold_from_name(manifold)
    unit = (-1.15, 1.15)
    frames = []
    if m.dim == 1:
        frames.append(("emb", _Frame(PAD, PAD, unit, unit), (0, 1, "z1 vs z2")))
    else:
        frames.append(("emb", _Frame(PAD, PAD, unit, unit), (0, 2, "z1 vs z3")))
        frames.append(("emb", _Frame(2 * PAD + PANEL, PAD, unit, unit), (1, 2, "z2 vs z3")))
        frames.append(("azel", _Frame(3 * PAD + 2 * PANEL, PAD, (-math.pi, math.pi), (-math.pi / 2, math.pi / 2)), None))
    t_end = max((float(p.t[-1]) for p in panels if len(p.t)), default=1.0) or 1.0
    frames.append(("dist", _Frame((len(frames) + 1) * PAD + len(frames) * PANEL, PAD, (0.0, t_end), (-12.0, 1.0)), None))
    width = len(frames) * (PANEL + PAD) + PAD
    height = PANEL + 2 * PAD + 10
    body = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<rect width="{width}" height="{height}" fill="#fff"/>',
        f'<text x="{PAD}" y="18" font-size="14">{escape(title)}</text>',
    ]
    for kind, frame, extra in frames:
        if not panels:
            body += frame.box("")
        elif kind == "emb":
            body += _embedded_panel(frame, panels, *extra)
        elif kind == "azel":
            body += _azel_panel(frame, panels)
        else:
            body += _distance_panel(frame, panels, m)
    body.append("</svg>")
    return "\n".join(body) + "\n"


def write_svg(path, panels, title="", manifold="circle"):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_svg(panels, title, manifold))
    return path


def panel_from_arc_json(payload):
    """Panel data from a document written by ``arc_to_json``."""
    meta = payload.get("metadata", {})
    x = np.asarray(payload["x"], dtype=float)
    zb = next(b for b in payload["layout"] if b["name"] == "z")
    z = x[:, zb["start"]:zb["stop"]]
    return meta.get("manifold", "circle"), arc_panel_data(
        meta.get("manifold", "circle"), payload["t"], z, payload["jump_indices"],
        meta.get("target", z[-1]), meta.get("critical_points", []),
    ), meta


def emit_plots(paths, out_dir=None):
    """One SVG next to (or in ``out_dir`` for) each arc JSON file; returns the SVG paths.

    Raises ``FileNotFoundError`` for a missing file.
    """
    import json
    import os

    written = []
    for path in paths:
        if not os.path.isfile(path):
            raise FileNotFoundError(path)
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        manifold, panel, meta = panel_from_arc_json(payload)
        stem = os.path.splitext(os.path.basename(path))[0]
        target_dir = out_dir or os.path.dirname(path) or "."
        os.makedirs(target_dir, exist_ok=True)
        title = f"{meta.get('scenario', stem)} run {meta.get('run', '')}".strip()
        written.append(write_svg(os.path.join(target_dir, stem + ".svg"), [panel], title, manifold))
    return written
