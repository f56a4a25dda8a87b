"""Minimal self-contained SVG line plots."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _ticks(lo: float, hi: float, log: bool, n: int = 5):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        step = max(1, (b - a) // n)
        return [float(v) for v in range(a, b + 1, step)]
    if hi == lo:
        return [lo]
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def line_plot(filename, series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
              logx: bool = False, logy: bool = False, width: int = 560, height: int = 380) -> None:
    """``series`` maps a label to ``(x, y)`` sequences; non-positive values are dropped on log axes."""
    pts = {}
    for label, (xs, ys) in series.items():
        keep = []
        for x, y in zip(xs, ys):
            x, y = float(x), float(y)
            if not (math.isfinite(x) and math.isfinite(y)):
                continue
            if (logx and x <= 0) or (logy and y <= 0):
                continue
            keep.append((math.log10(x) if logx else x, math.log10(y) if logy else y))
        pts[label] = keep
    allp = [p for v in pts.values() for p in v] or [(0.0, 0.0)]
    x0, x1 = min(p[0] for p in allp), max(p[0] for p in allp)
    y0, y1 = min(p[1] for p in allp), max(p[1] for p in allp)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    ml, mr, mt, mb = 70, 20, 30, 50
    W, H = width - ml - mr, height - mt - mb
    sx = lambda x: ml + (x - x0) / (x1 - x0) * W
    sy = lambda y: mt + (1 - (y - y0) / (y1 - y0)) * H
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect x="{ml}" y="{mt}" width="{W}" height="{H}" fill="white" stroke="black"/>',
           f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
           f'<text x="{ml + W / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>',
           f'<text x="14" y="{mt + H / 2}" text-anchor="middle" '
           f'transform="rotate(-90 14 {mt + H / 2})">{escape(ylabel)}</text>']
    for t in _ticks(x0, x1, logx):
        if x0 <= t <= x1:
            lab = f"1e{int(t)}" if logx else f"{t:.3g}"
            out.append(f'<text x="{sx(t):.1f}" y="{mt + H + 15}" text-anchor="middle">{lab}</text>')
    for t in _ticks(y0, y1, logy):
        if y0 <= t <= y1:
            lab = f"1e{int(t)}" if logy else f"{t:.3g}"
            out.append(f'<text x="{ml - 5}" y="{sy(t) + 4:.1f}" text-anchor="end">{lab}</text>')
    for i, (label, p) in enumerate(pts.items()):
        color = _COLORS[i % len(_COLORS)]
        if p:
            path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in p)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{path}"/>')
            if len(p) <= 40:
                out.extend(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.5" fill="{color}"/>'
                           for x, y in p)
        out.append(f'<text x="{ml + 8}" y="{mt + 16 + 14 * i}" fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    Path(filename).write_text("\n".join(out) + "\n")
