"""
Minimal standalone SVG line and scatter plots.

Every plotted point becomes one ``<circle>`` (scatter) or one vertex of a
``<polyline>`` carrying a ``data-points`` attribute, so files can be checked
for completeness without rendering them.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
WIDTH, HEIGHT = 640, 400
MARGIN = (60, 20, 30, 50)  # left, right, top, bottom


def _nice_range(values, pad=0.05):
    values = np.asarray([v for v in np.ravel(values) if np.isfinite(v)], dtype=float)
    if values.size == 0:
        return 0.0, 1.0
    lo, hi = float(values.min()), float(values.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - pad * span, hi + pad * span


class Figure:
    """One set of axes; add series, then :meth:`save`."""

    def __init__(self, title="", xlabel="", ylabel="", width=WIDTH, height=HEIGHT):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.width, self.height = width, height
        self.series = []
        self.hlines = []

    def line(self, x, y, label="", color=None):
        self.series.append(("line", np.asarray(x, float), np.asarray(y, float), label, color))
        return self

    def scatter(self, x, y, label="", color=None):
        self.series.append(("scatter", np.asarray(x, float), np.asarray(y, float), label, color))
        return self

    def step(self, x, y, label="", color=None):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        xs = np.repeat(x, 2)[1:]
        ys = np.repeat(y, 2)[:-1]
        self.series.append(("line", xs, ys, label, color))
        return self

    def axhline(self, y, label="", color="#555555"):
        self.hlines.append((float(y), label, color))
        return self

    def render(self) -> str:
        left, right, top, bottom = MARGIN
        pw = self.width - left - right
        ph = self.height - top - bottom
        xs = [s[1] for s in self.series] or [np.array([0.0, 1.0])]
        ys = [s[2] for s in self.series] + [np.array([h[0] for h in self.hlines])]
        x0, x1 = _nice_range(np.concatenate([np.ravel(v) for v in xs]), pad=0.0)
        y0, y1 = _nice_range(np.concatenate([np.ravel(v) for v in ys]))

        def px(v):
            return left + (v - x0) / (x1 - x0) * pw

        def py(v):
            return top + (1.0 - (v - y0) / (y1 - y0)) * ph

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
               f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">',
               '<rect width="100%" height="100%" fill="white"/>',
               f'<text x="{self.width / 2:.1f}" y="18" text-anchor="middle" '
               f'font-size="14" font-family="sans-serif">{escape(self.title)}</text>',
               f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
        for i in range(5):
            xv = x0 + (x1 - x0) * i / 4
            yv = y0 + (y1 - y0) * i / 4
            out.append(f'<text x="{px(xv):.1f}" y="{top + ph + 15}" text-anchor="middle" '
                       f'font-size="10" font-family="sans-serif">{xv:.3g}</text>')
            out.append(f'<text x="{left - 4}" y="{py(yv) + 3:.1f}" text-anchor="end" '
                       f'font-size="10" font-family="sans-serif">{yv:.3g}</text>')
        out.append(f'<text x="{left + pw / 2:.1f}" y="{self.height - 8}" text-anchor="middle" '
                   f'font-size="12" font-family="sans-serif">{escape(self.xlabel)}</text>')
        out.append(f'<text x="14" y="{top + ph / 2:.1f}" text-anchor="middle" font-size="12" '
                   f'font-family="sans-serif" transform="rotate(-90 14 {top + ph / 2:.1f})">'
                   f'{escape(self.ylabel)}</text>')
        for y, label, color in self.hlines:
            out.append(f'<line class="hline" x1="{left}" x2="{left + pw}" y1="{py(y):.2f}" '
                       f'y2="{py(y):.2f}" stroke="{color}" stroke-dasharray="5,3"/>')
        legend = []
        for i, (kind, x, y, label, color) in enumerate(self.series):
            color = color or PALETTE[i % len(PALETTE)]
            ok = np.isfinite(x) & np.isfinite(y)
            if kind == "line":
                pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x[ok], y[ok]))
                out.append(f'<polyline class="series" data-points="{int(ok.sum())}" '
                           f'fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
            else:
                out.append(f'<g class="series" data-points="{int(ok.sum())}" fill="{color}">')
                out.extend(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2"/>'
                           for a, b in zip(x[ok], y[ok]))
                out.append("</g>")
            if label:
                legend.append((label, color))
        for j, (label, color) in enumerate(legend):
            yy = top + 14 + 14 * j
            out.append(f'<rect x="{left + pw - 150}" y="{yy - 8}" width="10" height="10" '
                       f'fill="{color}"/>')
            out.append(f'<text x="{left + pw - 135}" y="{yy + 1}" font-size="10" '
                       f'font-family="sans-serif">{escape(label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.render())
        return path
