"""Minimal self-contained SVG charts (no plotting dependencies).

Output is deterministic: same data, same bytes. Only the two chart kinds
the report writer needs are provided.
"""

from __future__ import annotations

import numpy as np

WIDTH, HEIGHT = 860, 420
MARGIN_LEFT, MARGIN_RIGHT = 70, 20
MARGIN_TOP, MARGIN_BOTTOM = 40, 50

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _bounds(values):
    finite = np.asarray(values, dtype=float)
    finite = finite[np.isfinite(finite)]
    if finite.size == 0:
        return 0.0, 1.0
    lo, hi = float(finite.min()), float(finite.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _ticks(lo, hi, count=5):
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


class _Canvas:
    def __init__(self, x_lo, x_hi, y_lo, y_hi):
        self.x_lo, self.x_hi = x_lo, x_hi
        self.y_lo, self.y_hi = y_lo, y_hi
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        ]

    def px(self, x):
        span = self.x_hi - self.x_lo or 1.0
        return MARGIN_LEFT + (x - self.x_lo) / span * (
            WIDTH - MARGIN_LEFT - MARGIN_RIGHT
        )

    def py(self, y):
        span = self.y_hi - self.y_lo or 1.0
        return HEIGHT - MARGIN_BOTTOM - (y - self.y_lo) / span * (
            HEIGHT - MARGIN_TOP - MARGIN_BOTTOM
        )

    def axes(self, title, x_label, y_label):
        x0, x1 = MARGIN_LEFT, WIDTH - MARGIN_RIGHT
        y0, y1 = HEIGHT - MARGIN_BOTTOM, MARGIN_TOP
        self.parts.append(
            f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>'
        )
        self.parts.append(
            f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>'
        )
        for t in _ticks(self.x_lo, self.x_hi):
            px = self.px(t)
            self.parts.append(
                f'<line x1="{px:.2f}" y1="{y0}" x2="{px:.2f}" y2="{y0 + 5}" '
                'stroke="black"/>'
            )
            self.parts.append(
                f'<text x="{px:.2f}" y="{y0 + 20}" font-size="11" '
                f'text-anchor="middle">{t:.4g}</text>'
            )
        for t in _ticks(self.y_lo, self.y_hi):
            py = self.py(t)
            self.parts.append(
                f'<line x1="{x0 - 5}" y1="{py:.2f}" x2="{x0}" y2="{py:.2f}" '
                'stroke="black"/>'
            )
            self.parts.append(
                f'<text x="{x0 - 8}" y="{py + 4:.2f}" font-size="11" '
                f'text-anchor="end">{t:.4g}</text>'
            )
        self.parts.append(
            f'<text x="{(x0 + x1) / 2:.2f}" y="{HEIGHT - 12}" font-size="12" '
            f'text-anchor="middle">{x_label}</text>'
        )
        self.parts.append(
            f'<text x="18" y="{(y0 + y1) / 2:.2f}" font-size="12" '
            f'text-anchor="middle" transform="rotate(-90 18 '
            f'{(y0 + y1) / 2:.2f})">{y_label}</text>'
        )
        self.parts.append(
            f'<text x="{(x0 + x1) / 2:.2f}" y="22" font-size="14" '
            f'text-anchor="middle">{title}</text>'
        )

    def polyline(self, xs, ys, color):
        points = " ".join(
            f"{self.px(x):.2f},{self.py(y):.2f}"
            for x, y in zip(xs, ys)
            if np.isfinite(y)
        )
        self.parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" '
            'stroke-width="1.5"/>'
        )

    def dots(self, xs, ys, color, radius=2.5):
        for x, y in zip(xs, ys):
            if np.isfinite(x) and np.isfinite(y):
                self.parts.append(
                    f'<circle cx="{self.px(x):.2f}" cy="{self.py(y):.2f}" '
                    f'r="{radius}" fill="{color}" fill-opacity="0.6"/>'
                )

    def legend(self, labels_colors):
        x = MARGIN_LEFT + 10
        for i, (label, color) in enumerate(labels_colors):
            y = MARGIN_TOP + 14 + 16 * i
            self.parts.append(
                f'<rect x="{x}" y="{y - 9}" width="12" height="9" fill="{color}"/>'
            )
            self.parts.append(
                f'<text x="{x + 17}" y="{y}" font-size="11">{label}</text>'
            )

    def save(self, path):
        self.parts.append("</svg>")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(self.parts))
            fh.write("\n")


def line_chart(path, x, named_series, title="", x_label="time step", y_label="value"):
    """Overlayed polylines; `named_series` is a list of (label, values)."""
    x = np.asarray(x, dtype=float)
    all_y = np.concatenate([np.asarray(y, dtype=float) for _, y in named_series])
    canvas = _Canvas(float(x.min()), float(x.max()), *_bounds(all_y))
    canvas.axes(title, x_label, y_label)
    entries = []
    for i, (label, values) in enumerate(named_series):
        color = PALETTE[i % len(PALETTE)]
        canvas.polyline(x, np.asarray(values, dtype=float), color)
        entries.append((label, color))
    canvas.legend(entries)
    canvas.save(path)


def scatter_chart(path, truth, prediction, title="", x_label="truth", y_label="prediction"):
    """Truth-vs-prediction scatter with the ideal diagonal drawn through."""
    truth = np.asarray(truth, dtype=float)
    prediction = np.asarray(prediction, dtype=float)
    lo, hi = _bounds(np.concatenate([truth, prediction]))
    canvas = _Canvas(lo, hi, lo, hi)
    canvas.axes(title, x_label, y_label)
    canvas.parts.append(
        f'<line x1="{canvas.px(lo):.2f}" y1="{canvas.py(lo):.2f}" '
        f'x2="{canvas.px(hi):.2f}" y2="{canvas.py(hi):.2f}" '
        'stroke="#888888" stroke-dasharray="4 3"/>'
    )
    canvas.dots(truth, prediction, PALETTE[0])
    canvas.save(path)
