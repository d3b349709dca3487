"""Small static SVG charts: a heatmap and a multi-series line chart.

Output is plain text built from fixed-precision numbers, so the same data
always produces the same bytes.
"""

from __future__ import annotations

import math
from html import escape
from typing import Mapping, Sequence

# a few stops of a perceptually ordered dark-to-light ramp
_RAMP = [(68, 1, 84), (59, 82, 139), (33, 145, 140), (94, 201, 98), (253, 231, 37)]
_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]


def _ramp(u: float) -> str:
    if not math.isfinite(u):
        return "#cccccc"
    u = min(max(u, 0.0), 1.0) * (len(_RAMP) - 1)
    i = min(int(u), len(_RAMP) - 2)
    f = u - i
    r, g, b = (round(a + (c - a) * f) for a, c in zip(_RAMP[i], _RAMP[i + 1]))
    return f"#{r:02x}{g:02x}{b:02x}"


def _doc(width: int, height: int, body: list[str]) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def heatmap(
    values: Sequence[Sequence[float]],
    row_labels: Sequence,
    col_labels: Sequence,
    title: str = "",
    row_name: str = "",
    col_name: str = "",
) -> str:
    """Rows are drawn top to bottom; NaN cells are grey."""
    cell = 28
    left, top = 60, 40
    n_rows, n_cols = len(row_labels), len(col_labels)
    width = left + n_cols * cell + 90
    height = top + n_rows * cell + 50
    finite = [v for row in values for v in row if math.isfinite(v)]
    lo, hi = (min(finite), max(finite)) if finite else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0

    body = [f'<text x="{left}" y="20" font-size="13">{escape(title)}</text>']
    for i, row in enumerate(values):
        y = top + i * cell
        body.append(f'<text x="{left - 6}" y="{y + cell / 2 + 4:.1f}" text-anchor="end">{row_labels[i]}</text>')
        for j, v in enumerate(row):
            x = left + j * cell
            label = "nan" if not math.isfinite(v) else f"{v:.4g}"
            body.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{_ramp((v - lo) / span)}">'
                f"<title>{escape(str(row_labels[i]))}, {escape(str(col_labels[j]))}: {label}</title></rect>"
            )
    base = top + n_rows * cell
    for j, c in enumerate(col_labels):
        body.append(f'<text x="{left + j * cell + cell / 2:.1f}" y="{base + 14}" text-anchor="middle">{c}</text>')
    body.append(f'<text x="{left + n_cols * cell / 2:.1f}" y="{base + 34}" text-anchor="middle">{escape(col_name)}</text>')
    body.append(
        f'<text x="14" y="{top + n_rows * cell / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {top + n_rows * cell / 2:.1f})">{escape(row_name)}</text>'
    )
    # colour bar
    bx = left + n_cols * cell + 20
    steps = 20
    bar_h = n_rows * cell
    for k in range(steps):
        u = 1.0 - k / (steps - 1)
        body.append(
            f'<rect x="{bx}" y="{top + k * bar_h / steps:.1f}" width="14" '
            f'height="{bar_h / steps + 0.5:.1f}" fill="{_ramp(u)}"/>'
        )
    body.append(f'<text x="{bx + 18}" y="{top + 8}">{hi:.3g}</text>')
    body.append(f'<text x="{bx + 18}" y="{top + bar_h}">{lo:.3g}</text>')
    return _doc(width, height, body)


def line_chart(
    series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
    title: str = "",
    x_name: str = "",
    y_name: str = "",
) -> str:
    """One polyline with point markers per named ``(xs, ys)`` series."""
    width, height = 520, 340
    left, right, top, bottom = 60, 110, 36, 46
    pw, ph = width - left - right, height - top - bottom
    xs = [x for s in series.values() for x in s[0]]
    ys = [y for s in series.values() for y in s[1] if math.isfinite(y)]
    x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y_lo, y_hi = 0.0, (max(ys) if ys else 1.0)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0

    def px(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        return top + ph - (y - y_lo) / (y_hi - y_lo) * ph

    body = [
        f'<text x="{left}" y="20" font-size="13">{escape(title)}</text>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for k in range(5):
        yv = y_lo + (y_hi - y_lo) * k / 4
        body.append(f'<text x="{left - 6}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
    for xv in sorted(set(xs)):
        body.append(f'<text x="{px(xv):.1f}" y="{top + ph + 14}" text-anchor="middle">{xv:g}</text>')
    body.append(f'<text x="{left + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">{escape(x_name)}</text>')
    body.append(
        f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 14 {top + ph / 2:.1f})">{escape(y_name)}</text>'
    )
    for idx, (name, (sx, sy)) in enumerate(series.items()):
        colour = _PALETTE[idx % len(_PALETTE)]
        pts = [(px(x), py(y)) for x, y in zip(sx, sy) if math.isfinite(y)]
        if pts:
            path = " ".join(f"{a:.1f},{b:.1f}" for a, b in pts)
            body.append(f'<polyline points="{path}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
            body += [f'<circle cx="{a:.1f}" cy="{b:.1f}" r="2.5" fill="{colour}"/>' for a, b in pts]
        ly = top + 14 + 16 * idx
        body.append(f'<line x1="{left + pw + 12}" y1="{ly - 4}" x2="{left + pw + 30}" y2="{ly - 4}" stroke="{colour}" stroke-width="2"/>')
        body.append(f'<text x="{left + pw + 34}" y="{ly}">{escape(name)}</text>')
    return _doc(width, height, body)
