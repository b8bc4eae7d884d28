"""Minimal self-contained SVG line charts.

Emits a single <svg> document with axes, tick labels, a legend, and one
polyline per series. No external renderer or stylesheet; the output
opens in any browser. Good enough for convergence traces and
time-vs-threads plots, not a general plotting library.
"""

from __future__ import annotations

import math

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_W, _H = 640, 400
_ML, _MR, _MT, _MB = 70, 20, 36, 48


def _ticks(lo: float, hi: float, n: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * mag
        if step >= raw:
            break
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-12 * abs(step):
        out.append(0.0 if abs(t) < 1e-15 else t)
        t += step
    return out


def _fmt(x: float) -> str:
    if x == 0:
        return "0"
    if abs(x) >= 1e4 or abs(x) < 1e-3:
        return f"{x:.1e}"
    return f"{x:g}"


def svg_line_chart(series: dict[str, list[tuple[float, float]]],
                   title: str = "", x_label: str = "", y_label: str = "",
                   log_y: bool = False) -> str:
    """Render named (x, y) point lists to an SVG string.

    log_y plots the y axis in log10; non-positive y values are dropped
    from log plots.
    """
    pts_by_name = {}
    for name, pts in series.items():
        kept = [(float(x), float(y)) for x, y in pts
                if not log_y or y > 0.0]
        if kept:
            pts_by_name[name] = kept
    if not pts_by_name:
        raise ValueError("no plottable points")

    def ty(y: float) -> float:
        return math.log10(y) if log_y else y

    xs = [x for pts in pts_by_name.values() for x, _ in pts]
    ys = [ty(y) for pts in pts_by_name.values() for _, y in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.04 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad

    plot_w = _W - _ML - _MR
    plot_h = _H - _MT - _MB

    def px(x: float) -> float:
        return _ML + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return _MT + (y_hi - y) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_ML}" y="{_MT}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#333"/>',
    ]
    if title:
        parts.append(f'<text x="{_W / 2}" y="20" text-anchor="middle" '
                     f'font-size="14">{_esc(title)}</text>')

    for t in _ticks(x_lo, x_hi):
        x = px(t)
        parts.append(f'<line x1="{x:.1f}" y1="{_MT + plot_h}" x2="{x:.1f}" '
                     f'y2="{_MT + plot_h + 4}" stroke="#333"/>')
        parts.append(f'<text x="{x:.1f}" y="{_MT + plot_h + 16}" '
                     f'text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(y_lo, y_hi):
        y = py(t)
        label = f"1e{t:g}" if log_y else _fmt(t)
        parts.append(f'<line x1="{_ML - 4}" y1="{y:.1f}" x2="{_ML}" '
                     f'y2="{y:.1f}" stroke="#333"/>')
        parts.append(f'<text x="{_ML - 7}" y="{y + 3:.1f}" '
                     f'text-anchor="end">{label}</text>')
    if x_label:
        parts.append(f'<text x="{_ML + plot_w / 2}" y="{_H - 10}" '
                     f'text-anchor="middle">{_esc(x_label)}</text>')
    if y_label:
        y_mid = _MT + plot_h / 2
        parts.append(f'<text x="16" y="{y_mid}" text-anchor="middle" '
                     f'transform="rotate(-90 16 {y_mid})">{_esc(y_label)}</text>')

    for k, (name, pts) in enumerate(sorted(pts_by_name.items())):
        color = _COLORS[k % len(_COLORS)]
        coords = " ".join(f"{px(x):.1f},{py(ty(y)):.1f}" for x, y in pts)
        parts.append(f'<polyline points="{coords}" fill="none" '
                     f'stroke="{color}" stroke-width="1.5"/>')
        ly = _MT + 14 + 14 * k
        lx = _ML + plot_w - 150
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
        parts.append(f'<text x="{lx + 23}" y="{ly}">{_esc(name)}</text>')

    parts.append("</svg>")
    return "\n".join(parts)


def _esc(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))


def write_svg(path: str, svg: str) -> None:
    with open(path, "w") as fh:
        fh.write(svg)
