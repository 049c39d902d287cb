"""Bare SVG writers for rank bars, learning curves and heat maps."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def _doc(width, height, body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">\n'
            f'<rect width="{width}" height="{height}" fill="white"/>\n' + "\n".join(body) + "\n</svg>\n")


def _text(x, y, s, anchor="middle", size=11):
    return f'<text x="{x:.1f}" y="{y:.1f}" text-anchor="{anchor}" font-size="{size}">{escape(str(s))}</text>'


def bar_chart(labels, values, title="", ylabel="", width=480, height=300) -> str:
    values = [float(v) for v in values]
    left, right, top, bottom = 50, 10, 30, 50
    pw, ph = width - left - right, height - top - bottom
    vmax = max(max(values), 0.0) or 1.0
    vmin = min(min(values), 0.0)
    span = vmax - vmin or 1.0
    bw = pw / max(len(values), 1)
    y0 = top + ph * vmax / span
    body = [_text(width / 2, 18, title, size=13), _text(12, top + ph / 2, ylabel, size=10),
            f'<line x1="{left}" y1="{y0:.1f}" x2="{left + pw}" y2="{y0:.1f}" stroke="black"/>']
    for i, (lab, v) in enumerate(zip(labels, values)):
        h = ph * abs(v) / span
        x = left + i * bw + bw * 0.15
        y = y0 - h if v >= 0 else y0
        body.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{bw * 0.7:.1f}" height="{h:.1f}" '
                    f'fill="{PALETTE[i % len(PALETTE)]}"/>')
        body.append(_text(x + bw * 0.35, height - bottom + 15, lab, size=10))
        body.append(_text(x + bw * 0.35, y - 3, f"{v:g}", size=9))
    return _doc(width, height, body)


def line_chart(series: dict, title="", xlabel="frames", ylabel="return", width=560, height=320) -> str:
    """``series`` maps a label to (x, y) arrays."""
    left, right, top, bottom = 55, 120, 30, 40
    pw, ph = width - left - right, height - top - bottom
    xs = [np.asarray(x, dtype=float) for x, _ in series.values()]
    ys = [np.asarray(y, dtype=float) for _, y in series.values()]
    if not xs or all(x.size == 0 for x in xs):
        return _doc(width, height, [_text(width / 2, height / 2, "no data")])
    xmin = min(x.min() for x in xs if x.size)
    xmax = max(x.max() for x in xs if x.size)
    ymin = min(np.nanmin(y) for y in ys if y.size)
    ymax = max(np.nanmax(y) for y in ys if y.size)
    xspan = (xmax - xmin) or 1.0
    yspan = (ymax - ymin) or 1.0

    def px(x):
        return left + pw * (x - xmin) / xspan

    def py(y):
        return top + ph * (1 - (y - ymin) / yspan)

    body = [_text(width / 2, 18, title, size=13),
            f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
            _text(left + pw / 2, height - 8, xlabel, size=10), _text(14, top + ph / 2, ylabel, size=10),
            _text(left, top + ph + 14, f"{xmin:g}", size=9), _text(left + pw, top + ph + 14, f"{xmax:g}", size=9),
            _text(left - 4, top + ph, f"{ymin:.4g}", anchor="end", size=9),
            _text(left - 4, top + 8, f"{ymax:.4g}", anchor="end", size=9)]
    for i, (label, x, y) in enumerate(zip(series, xs, ys)):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{px(a):.1f},{py(b):.1f}" for a, b in zip(x, y) if np.isfinite(b))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = top + 14 * (i + 1)
        body.append(f'<line x1="{left + pw + 8}" y1="{ly - 4}" x2="{left + pw + 22}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        body.append(_text(left + pw + 26, ly, label, anchor="start", size=10))
    return _doc(width, height, body)


def heatmap_svg(matrix, title="", cell=6, max_rows=400) -> str:
    """Rows are steps, columns actions; values expected in [0, 1]."""
    m = np.asarray(matrix, dtype=float)[:max_rows]
    rows, cols = m.shape
    cw = max(cell * 4, 12)
    width, height = cols * cw + 20, rows * cell + 40
    body = [_text(width / 2, 16, title, size=12)]
    for r in range(rows):
        for c in range(cols):
            v = float(np.clip(m[r, c], 0.0, 1.0))
            shade = int(255 * (1 - v))
            body.append(f'<rect x="{10 + c * cw}" y="{30 + r * cell}" width="{cw}" height="{cell}" '
                        f'fill="rgb(255,{shade},{shade})"/>')
    return _doc(width, height, body)


def write_svg(text: str, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path
