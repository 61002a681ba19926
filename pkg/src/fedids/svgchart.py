"""Grouped-bar SVG rendering with no plotting dependency.

The canvas is a fixed 800x480; every coordinate is formatted with two
decimal places so identical inputs always yield identical bytes.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

from .errors import DataError

CANVAS_WIDTH = 800
CANVAS_HEIGHT = 480

# left, top, right, bottom
_MARGINS = (64, 56, 16, 52)

_PALETTE = ("#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#af7aa1")

_BG = "#ffffff"
_AXIS = "#333333"
_GRID = "#dddddd"
_TEXT = "#222222"


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def render_grouped_bars(
    group_labels,
    series_labels,
    values,
    title: str = "",
    y_max: float = 100.0,
) -> str:
    """Render one bar per (group, series) cell; values are percentages.

    ``values[g][s]`` is the height of series ``s`` within group ``g``,
    on a 0..y_max axis. Each bar is labeled with its value to two
    decimals.
    """
    groups = [str(g) for g in group_labels]
    series = [str(s) for s in series_labels]
    if not groups or not series:
        raise DataError("chart needs at least one group and one series")
    if len(series) > len(_PALETTE):
        raise DataError(f"at most {len(_PALETTE)} series supported")
    if len(values) != len(groups):
        raise DataError("need one value row per group")
    rows = []
    for g, row in enumerate(values):
        row = [float(v) for v in row]
        if len(row) != len(series):
            raise DataError(f"group {groups[g]!r} needs {len(series)} values")
        for v in row:
            if not math.isfinite(v) or not 0.0 <= v <= y_max:
                raise DataError(f"value {v} outside [0, {y_max}]")
        rows.append(row)

    left, top, right, bottom = _MARGINS
    plot_w = CANVAS_WIDTH - left - right
    plot_h = CANVAS_HEIGHT - top - bottom
    x0, y0 = left, top
    x1, y1 = left + plot_w, top + plot_h

    def y_of(v: float) -> float:
        return y1 - (v / y_max) * plot_h

    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS_WIDTH}" '
        f'height="{CANVAS_HEIGHT}" viewBox="0 0 {CANVAS_WIDTH} {CANVAS_HEIGHT}">'
    )
    out.append(f'<rect width="{CANVAS_WIDTH}" height="{CANVAS_HEIGHT}" fill="{_BG}"/>')
    if title:
        out.append(
            f'<text x="{_fmt(CANVAS_WIDTH / 2)}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="16" fill="{_TEXT}">'
            f"{escape(title)}</text>"
        )

    # horizontal gridlines and y labels at fifths of the axis
    for i in range(6):
        v = y_max * i / 5.0
        y = y_of(v)
        out.append(
            f'<line x1="{_fmt(x0)}" y1="{_fmt(y)}" x2="{_fmt(x1)}" y2="{_fmt(y)}" '
            f'stroke="{_GRID}" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_fmt(x0 - 8)}" y="{_fmt(y + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11" fill="{_TEXT}">{_fmt(v)}</text>'
        )

    # bars: each group gets an equal slice, bars centered with half-slot gaps
    n_g, n_s = len(groups), len(series)
    group_w = plot_w / n_g
    bar_w = group_w / (n_s + 1)
    for g, row in enumerate(rows):
        gx = x0 + g * group_w
        start = gx + (group_w - n_s * bar_w) / 2.0
        for s, v in enumerate(row):
            bx = start + s * bar_w
            by = y_of(v)
            out.append(
                f'<rect x="{_fmt(bx)}" y="{_fmt(by)}" width="{_fmt(bar_w)}" '
                f'height="{_fmt(y1 - by)}" fill="{_PALETTE[s]}"/>'
            )
            out.append(
                f'<text x="{_fmt(bx + bar_w / 2)}" y="{_fmt(by - 4)}" '
                f'text-anchor="middle" font-family="sans-serif" font-size="9" '
                f'fill="{_TEXT}">{v:.2f}%</text>'
            )
        out.append(
            f'<text x="{_fmt(gx + group_w / 2)}" y="{_fmt(y1 + 18)}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="12" '
            f'fill="{_TEXT}">{escape(groups[g])}</text>'
        )

    # axes on top of the bars
    out.append(
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x0)}" y2="{_fmt(y1)}" '
        f'stroke="{_AXIS}" stroke-width="1.5"/>'
    )
    out.append(
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y1)}" x2="{_fmt(x1)}" y2="{_fmt(y1)}" '
        f'stroke="{_AXIS}" stroke-width="1.5"/>'
    )

    # legend: one swatch per series, laid out along the top edge
    lx = x0
    ly = y0 - 14
    for s, name in enumerate(series):
        out.append(
            f'<rect x="{_fmt(lx)}" y="{_fmt(ly - 9)}" width="10" height="10" '
            f'fill="{_PALETTE[s]}"/>'
        )
        out.append(
            f'<text x="{_fmt(lx + 14)}" y="{_fmt(ly)}" font-family="sans-serif" '
            f'font-size="11" fill="{_TEXT}">{escape(name)}</text>'
        )
        lx += 14 + 7 * len(name) + 18
    out.append("</svg>")
    return "\n".join(out) + "\n"
