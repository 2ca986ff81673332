"""Self-contained SVG 1.1 charts: actual vs predicted lines and grouped bars.

Output is plain text built from fixed-precision numbers, so the same input
always gives the same bytes.
"""
from __future__ import annotations

import datetime as dt
import math
from typing import Sequence
from xml.sax.saxutils import escape

from .errors import ArgumentError

WIDTH, HEIGHT = 720, 420
LEFT, RIGHT, TOP, BOTTOM = 80, 160, 30, 60
ORIGIN = dt.date(2020, 1, 20)
SERIES_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _f(v: float) -> str:
    s = f"{v:.2f}".rstrip("0").rstrip(".")
    return "0" if s == "-0" else s


def _label(v: float) -> str:
    return format(v, ".6g")


def nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    """Round-numbered ticks covering [lo, hi]."""
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(target - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.floor(lo / step) * step
    ticks = []
    v = start
    while v <= hi + step * 1e-9:
        ticks.append(round(v, 10))
        v += step
    if ticks[-1] < hi:
        ticks.append(round(v, 10))
    return ticks


def _header(title: str) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<title>{escape(title)}</title>',
        f'<text x="{_f(LEFT + (WIDTH - LEFT - RIGHT) / 2)}" y="18" text-anchor="middle" '
        f'font-size="14">{escape(title)}</text>',
    ]


def _axes(xlabel: str, ylabel: str) -> list[str]:
    x0, y0, x1 = LEFT, HEIGHT - BOTTOM, WIDTH - RIGHT
    return [
        f'<line class="axis" x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line class="axis" x1="{x0}" y1="{TOP}" x2="{x0}" y2="{y0}" stroke="black"/>',
        f'<text x="{_f((x0 + x1) / 2)}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="18" y="{_f((TOP + y0) / 2)}" text-anchor="middle" '
        f'transform="rotate(-90 18 {_f((TOP + y0) / 2)})">{escape(ylabel)}</text>',
    ]


def _y_ticks(ticks, ypos) -> list[str]:
    out = []
    for t in ticks:
        y = ypos(t)
        out.append(f'<line class="ytick" x1="{LEFT - 5}" y1="{_f(y)}" x2="{LEFT}" y2="{_f(y)}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{_f(y + 4)}" text-anchor="end">{_label(t)}</text>')
    return out


def _legend(names: Sequence[str], colors: Sequence[str], mark: str) -> list[str]:
    out = []
    x = WIDTH - RIGHT + 15
    for i, (name, color) in enumerate(zip(names, colors)):
        y = TOP + 10 + 20 * i
        if mark == "line":
            out.append(f'<line x1="{x}" y1="{y}" x2="{x + 20}" y2="{y}" stroke="{color}" stroke-width="2"/>')
        else:
            out.append(f'<circle cx="{x + 10}" cy="{y}" r="6" fill="{color}"/>')
        out.append(f'<text x="{x + 26}" y="{y + 4}">{escape(name)}</text>')
    return out


def days_since(dates: Sequence[dt.date], origin: dt.date = ORIGIN) -> list[int]:
    return [(d - origin).days for d in dates]


def actual_vs_predicted_svg(days: Sequence[float], actual: Sequence[float],
                            predicted: Sequence[float], title: str = "Actual versus prediction",
                            origin: dt.date = ORIGIN, ylabel: str = "confirmed cases") -> str:
    """Two polylines (actual, predicted) against the day index."""
    n = len(days)
    if n == 0:
        raise ArgumentError("no predictions to plot")
    if len(actual) != n or len(predicted) != n:
        raise ArgumentError("days, actual and predicted must have equal length")
    order = sorted(range(n), key=lambda i: days[i])
    xs = [float(days[i]) for i in order]
    series = [[float(actual[i]) for i in order], [float(predicted[i]) for i in order]]
    values = series[0] + series[1]
    if not all(math.isfinite(v) for v in values + xs):
        raise ArgumentError("non-finite value in plot input")

    distinct = sorted(set(xs))
    xticks = distinct if len(distinct) <= 10 else nice_ticks(distinct[0], distinct[-1], 8)
    xlo, xhi = min(xticks[0], xs[0]), max(xticks[-1], xs[-1])
    if xhi == xlo:
        xlo, xhi = xlo - 1, xhi + 1
    yticks = nice_ticks(min(0.0, min(values)), max(values))
    ylo, yhi = yticks[0], yticks[-1]
    plot_w, plot_h = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def xpos(v):
        return LEFT + (v - xlo) / (xhi - xlo) * plot_w

    def ypos(v):
        return HEIGHT - BOTTOM - (v - ylo) / (yhi - ylo) * plot_h

    xlabel = f"number of days since {origin:%B} {origin.day}, {origin.year}"
    out = _header(title) + _axes(xlabel, ylabel)
    for t in xticks:
        x = xpos(t)
        out.append(f'<line class="xtick" x1="{_f(x)}" y1="{HEIGHT - BOTTOM}" x2="{_f(x)}" '
                   f'y2="{HEIGHT - BOTTOM + 5}" stroke="black"/>')
        out.append(f'<text x="{_f(x)}" y="{HEIGHT - BOTTOM + 18}" text-anchor="middle">{_label(t)}</text>')
    out += _y_ticks(yticks, ypos)
    names = ("actual", "predicted")
    for name, ys, color in zip(names, series, SERIES_COLORS):
        pts = " ".join(f"{_f(xpos(x))},{_f(ypos(y))}" for x, y in zip(xs, ys))
        out.append(f'<polyline class="{name}" points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
    out += _legend(names, SERIES_COLORS, "line")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def grouped_bars_svg(groups: Sequence[str], variants: Sequence[str], values,
                     title: str = "RMSE by region", ylabel: str = "RMSE") -> str:
    """One cluster of bars per group, one bar per variant.

    ``values[i][j]`` is the bar for ``groups[i]`` and ``variants[j]``.
    """
    if not groups or not variants:
        raise ArgumentError("no bars to plot")
    rows = [[float(v) for v in row] for row in values]
    if len(rows) != len(groups) or any(len(r) != len(variants) for r in rows):
        raise ArgumentError("values must be a groups x variants table")
    flat = [v for r in rows for v in r]
    if not all(math.isfinite(v) for v in flat):
        raise ArgumentError("non-finite value in plot input")
    yticks = nice_ticks(min(0.0, min(flat)), max(flat))
    ylo, yhi = yticks[0], yticks[-1]
    plot_w, plot_h = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def ypos(v):
        return HEIGHT - BOTTOM - (v - ylo) / (yhi - ylo) * plot_h

    slot = plot_w / len(groups)
    bar_w = slot * 0.8 / len(variants)
    out = _header(title) + _axes("", ylabel)
    out += _y_ticks(yticks, ypos)
    for i, (group, row) in enumerate(zip(groups, rows)):
        left = LEFT + i * slot + slot * 0.1
        for j, v in enumerate(row):
            top, base = ypos(max(v, 0.0)), ypos(min(v, 0.0))
            out.append(f'<rect class="bar" x="{_f(left + j * bar_w)}" y="{_f(top)}" width="{_f(bar_w)}" '
                       f'height="{_f(base - top)}" fill="{SERIES_COLORS[j % len(SERIES_COLORS)]}">'
                       f'<title>{escape(group)} {escape(variants[j])}: {_label(v)}</title></rect>')
            out.append(f'<text x="{_f(left + (j + 0.5) * bar_w)}" y="{_f(top - 4)}" text-anchor="middle" '
                       f'font-size="10">{_label(v)}</text>')
        out.append(f'<text x="{_f(LEFT + (i + 0.5) * slot)}" y="{HEIGHT - BOTTOM + 18}" '
                   f'text-anchor="middle">{escape(group)}</text>')
    colors = [SERIES_COLORS[j % len(SERIES_COLORS)] for j in range(len(variants))]
    out += _legend(variants, colors, "dot")
    out.append("</svg>")
    return "\n".join(out) + "\n"
