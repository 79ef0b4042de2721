"""Quick-look static SVG line/scatter plots (no plotting library needed)."""
from __future__ import annotations

import math
from html import escape
from pathlib import Path

import numpy as np

__all__ = ["svg_plot", "write_svg"]

_COLORS = ("#5b2a86", "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#444444")


def _axis(v, log):
    v = np.asarray(v, dtype=float)
    return np.log10(v) if log else v


def svg_plot(series, title="", xlabel="", ylabel="", xlog=False, ylog=False, width=640, height=420) -> str:
    """Render ``series`` as an SVG document.

    Each series is a dict with ``x``, ``y`` and optional ``label`` and
    ``style`` (``"line"`` or ``"points"``).  Non-positive values are dropped on
    log axes.
    """
    ml, mr, mt, mb = 70, 130, 30, 50
    pw, ph = width - ml - mr, height - mt - mb
    prepared = []
    for s in series:
        x = np.asarray(s["x"], dtype=float)
        y = np.asarray(s["y"], dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if xlog:
            ok &= x > 0
        if ylog:
            ok &= y > 0
        prepared.append((_axis(x[ok], xlog), _axis(y[ok], ylog), s.get("label", ""), s.get("style", "line")))
    xs = np.concatenate([p[0] for p in prepared]) if prepared else np.zeros(0)
    ys = np.concatenate([p[1] for p in prepared]) if prepared else np.zeros(0)
    if xs.size == 0:
        xs = ys = np.array([0.0, 1.0])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.04 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def py(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="15" y="{mt + ph / 2:.1f}" text-anchor="middle" transform="rotate(-90 15 {mt + ph / 2:.1f})">{escape(ylabel)}</text>',
    ]
    for k in range(5):
        xv = x0 + k * (x1 - x0) / 4
        yv = y0 + k * (y1 - y0) / 4
        xt = f"1e{xv:.1f}" if xlog else f"{xv:.3g}"
        yt = f"1e{yv:.1f}" if ylog else f"{yv:.3g}"
        out.append(f'<text x="{px(xv):.1f}" y="{mt + ph + 15}" text-anchor="middle">{xt}</text>')
        out.append(f'<text x="{ml - 5}" y="{py(yv) + 4:.1f}" text-anchor="end">{yt}</text>')
    for i, (x, y, label, style) in enumerate(prepared):
        c = _COLORS[i % len(_COLORS)]
        if style == "points":
            for a, b in zip(x, y):
                out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2.5" fill="{c}"/>')
        elif x.size:
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        if label:
            ly = mt + 14 * (i + 1)
            out.append(f'<rect x="{ml + pw + 10}" y="{ly - 8}" width="10" height="10" fill="{c}"/>')
            out.append(f'<text x="{ml + pw + 25}" y="{ly + 1}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, series, **kw) -> Path:
    path = Path(path)
    path.write_text(svg_plot(series, **kw))
    return path
