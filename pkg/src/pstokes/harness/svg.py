"""Tiny SVG writer for log-log and semi-log line plots."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

__all__ = ["line_plot_svg", "write_line_plot"]

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
        return [10.0**k for k in range(a, b + 1)]
    step = (hi - lo) / 5 or 1.0
    return [lo + k * step for k in range(6)]


def line_plot_svg(series: dict, title="", xlabel="", ylabel="", logx=True, logy=True,
                  width=640, height=440) -> str:
    """SVG text; ``series`` maps a label to ``(xs, ys)``.  Nonpositive values
    are dropped on log axes."""
    margin = dict(left=70, right=150, top=40, bottom=50)
    pts = {}
    for name, (xs, ys) in series.items():
        keep = [(float(x), float(y)) for x, y in zip(xs, ys)
                if math.isfinite(x) and math.isfinite(y)
                and (not logx or x > 0) and (not logy or y > 0)]
        if keep:
            pts[name] = keep
    allx = [x for v in pts.values() for x, _ in v] or [1.0]
    ally = [y for v in pts.values() for _, y in v] or [1.0]
    fx = math.log10 if logx else (lambda t: t)
    fy = math.log10 if logy else (lambda t: t)
    x0, x1 = fx(min(allx)), fx(max(allx))
    y0, y1 = fy(min(ally)), fy(max(ally))
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw = width - margin["left"] - margin["right"]
    ph = height - margin["top"] - margin["bottom"]

    def X(x):
        return margin["left"] + (fx(x) - x0) / (x1 - x0) * pw

    def Y(y):
        return margin["top"] + (1 - (fy(y) - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect x="{margin["left"]}" y="{margin["top"]}" width="{pw}" height="{ph}" '
           'fill="none" stroke="black"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle">{escape(title)}</text>',
           f'<text x="{margin["left"] + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">'
           f'{escape(xlabel)}</text>',
           f'<text x="15" y="{margin["top"] + ph / 2:.1f}" text-anchor="middle" '
           f'transform="rotate(-90 15 {margin["top"] + ph / 2:.1f})">{escape(ylabel)}</text>']
    lo_x, hi_x = (10**x0, 10**x1) if logx else (x0, x1)
    lo_y, hi_y = (10**y0, 10**y1) if logy else (y0, y1)
    for t in _ticks(lo_x, hi_x, logx):
        if lo_x * (1 - 1e-9) <= t <= hi_x * (1 + 1e-9):
            out.append(f'<text x="{X(t):.1f}" y="{margin["top"] + ph + 16}" '
                       f'text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(lo_y, hi_y, logy):
        if lo_y * (1 - 1e-9) <= t <= hi_y * (1 + 1e-9):
            out.append(f'<text x="{margin["left"] - 6}" y="{Y(t) + 4:.1f}" '
                       f'text-anchor="end">{t:.3g}</text>')
    for k, (name, p) in enumerate(pts.items()):
        color = _COLORS[k % len(_COLORS)]
        coords = " ".join(f"{X(x):.2f},{Y(y):.2f}" for x, y in p)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        for x, y in p:
            out.append(f'<circle cx="{X(x):.2f}" cy="{Y(y):.2f}" r="2.5" fill="{color}"/>')
        ly = margin["top"] + 14 + 18 * k
        lx = margin["left"] + pw + 10
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" '
                   'stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{escape(str(name))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_line_plot(path, series: dict, **kwargs) -> None:
    with open(path, "w") as fh:
        fh.write(line_plot_svg(series, **kwargs))
