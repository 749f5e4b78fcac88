"""Deterministic SVG emitters: contours, quivers, Jacobian heat maps.

Output is plain SVG text assembled with fixed decimal formatting and array
iteration order, so a given input and option set always yields the same
bytes.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .fem import ScalarField, TriangleGradientField
from .mesh import Mesh


def _fmt(v: float) -> str:
    return f"{v:.4f}"


class _Canvas:
    """Maps data coordinates to a fixed-width SVG viewport (y flipped)."""

    def __init__(self, mesh: Mesh, width: int = 640, pad: float = 0.05):
        lo = mesh.vertices.min(axis=0)
        hi = mesh.vertices.max(axis=0)
        span = np.maximum(hi - lo, 1e-12)
        margin = pad * span.max()
        self.lo = lo - margin
        self.span = span + 2 * margin
        self.width = width
        self.height = int(round(width * self.span[1] / self.span[0]))
        self.scale = width / self.span[0]

    def xy(self, p) -> tuple[str, str]:
        x = (p[0] - self.lo[0]) * self.scale
        y = self.height - (p[1] - self.lo[1]) * self.scale
        return _fmt(x), _fmt(y)

    def header(self) -> str:
        return (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
            f'<rect width="{self.width}" height="{self.height}" fill="white"/>\n'
        )


def _boundary_paths(mesh: Mesh, canvas: _Canvas) -> str:
    parts = []
    for loop in mesh.loops:
        pts = " ".join(",".join(canvas.xy(mesh.vertices[v])) for v in loop)
        parts.append(
            f'<polygon points="{pts}" fill="none" stroke="black" stroke-width="1"/>\n'
        )
    return "".join(parts)


def contour_svg(
    field: ScalarField,
    levels: int | Sequence[float] = 10,
    width: int = 640,
) -> str:
    """Level sets of a P1 field: one line segment per crossed triangle."""
    mesh = field.mesh
    vals = field.values
    if isinstance(levels, int):
        if levels < 1:
            raise ConfigError("need at least one contour level")
        vmin, vmax = float(vals.min()), float(vals.max())
        if vmax <= vmin:
            level_values = [vmin]
        else:
            ticks = np.linspace(vmin, vmax, levels + 2)[1:-1]
            level_values = [float(t) for t in ticks]
    else:
        level_values = [float(l) for l in levels]

    canvas = _Canvas(mesh, width)
    out = [canvas.header(), _boundary_paths(mesh, canvas)]
    tri_vals = vals[mesh.triangles]
    tri_pts = mesh.vertices[mesh.triangles]
    for li, level in enumerate(level_values):
        color = f"hsl({int(240 - 240 * li / max(1, len(level_values) - 1))},70%,45%)"
        segs = []
        for t in range(mesh.num_triangles):
            v = tri_vals[t]
            p = tri_pts[t]
            crossings = []
            for a, b in ((0, 1), (1, 2), (2, 0)):
                va, vb = v[a], v[b]
                if (va - level) * (vb - level) < 0:
                    s = (level - va) / (vb - va)
                    crossings.append(p[a] + s * (p[b] - p[a]))
            if len(crossings) == 2:
                (x1, y1), (x2, y2) = canvas.xy(crossings[0]), canvas.xy(crossings[1])
                segs.append(f"M{x1} {y1}L{x2} {y2}")
        if segs:
            out.append(
                f'<path d="{"".join(segs)}" stroke="{color}" fill="none" '
                'stroke-width="1"/>\n'
            )
    out.append("</svg>\n")
    return "".join(out)


def quiver_svg(
    grad: TriangleGradientField,
    width: int = 640,
    max_arrows: int = 1500,
) -> str:
    """One arrow per triangle centroid (decimated deterministically when the
    mesh has more triangles than max_arrows)."""
    mesh = grad.mesh
    canvas = _Canvas(mesh, width)
    out = [canvas.header(), _boundary_paths(mesh, canvas)]
    vec = grad.vectors
    norms = np.hypot(vec[:, 0], vec[:, 1])
    vmax = float(norms.max())
    stride = max(1, int(math.ceil(mesh.num_triangles / max_arrows)))
    if vmax > 0:
        arrow = 1.2 * mesh.h * math.sqrt(stride)
        for t in range(0, mesh.num_triangles, stride):
            c = mesh.centroids[t]
            d = vec[t] * (arrow / vmax)
            tip = c + d
            x1, y1 = canvas.xy(c)
            x2, y2 = canvas.xy(tip)
            out.append(
                f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" '
                'stroke="steelblue" stroke-width="1"/>\n'
            )
            # short head strokes
            ang = math.atan2(d[1], d[0])
            for da in (2.6, -2.6):
                hx = tip[0] + 0.3 * arrow * math.cos(ang + da)
                hy = tip[1] + 0.3 * arrow * math.sin(ang + da)
                x3, y3 = canvas.xy((hx, hy))
                out.append(
                    f'<line x1="{x2}" y1="{y2}" x2="{x3}" y2="{y3}" '
                    'stroke="steelblue" stroke-width="1"/>\n'
                )
    out.append("</svg>\n")
    return "".join(out)


def _diverging_color(v: float, vmax: float) -> str:
    """Blue-white-red scale centered at zero."""
    t = 0.0 if vmax <= 0 else max(-1.0, min(1.0, v / vmax))
    fade = int(round(255 * (1 - abs(t) * 0.85)))
    if t >= 0:
        return f"rgb({int(round(255 - 90 * t))},{fade},{fade})"
    return f"rgb({fade},{fade},{int(round(255 + 107 * t))})"


def heatmap_svg(mesh: Mesh, values, width: int = 640) -> str:
    """Per-triangle fill with a diverging scale centered at 0.

    Intended for Jacobian fields: sign flips show up as a color flip.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (mesh.num_triangles,):
        raise ConfigError("need one value per triangle")
    vmax = float(np.abs(values).max())
    canvas = _Canvas(mesh, width)
    out = [canvas.header()]
    for t in range(mesh.num_triangles):
        pts = " ".join(
            ",".join(canvas.xy(mesh.vertices[v])) for v in mesh.triangles[t]
        )
        out.append(
            f'<polygon points="{pts}" fill="{_diverging_color(values[t], vmax)}" '
            'stroke="none"/>\n'
        )
    out.append(_boundary_paths(mesh, canvas))
    out.append("</svg>\n")
    return "".join(out)
