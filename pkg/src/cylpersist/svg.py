"""Minimal SVG emitters for diagrams and normality diagnostics."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

SIZE = 400
PAD = 40


class _Canvas:
    def __init__(self, x_range: tuple[float, float], y_range: tuple[float, float], title: str):
        self.x0, self.x1 = x_range
        self.y0, self.y1 = y_range
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
            f'viewBox="0 0 {SIZE} {SIZE}">',
            f'<title>{escape(title)}</title>',
            f'<rect x="{PAD}" y="{PAD}" width="{SIZE - 2 * PAD}" height="{SIZE - 2 * PAD}" '
            'fill="none" stroke="black"/>',
        ]

    def px(self, x: float) -> float:
        return PAD + (x - self.x0) / (self.x1 - self.x0) * (SIZE - 2 * PAD)

    def py(self, y: float) -> float:
        return SIZE - PAD - (y - self.y0) / (self.y1 - self.y0) * (SIZE - 2 * PAD)

    def line(self, x0, y0, x1, y1, cls: str, style: str = 'stroke="gray"') -> None:
        self.parts.append(f'<line class="{cls}" x1="{self.px(x0):.2f}" y1="{self.py(y0):.2f}" '
                          f'x2="{self.px(x1):.2f}" y2="{self.py(y1):.2f}" {style}/>')

    def dot(self, x, y, cls: str, fill: str = "black") -> None:
        self.parts.append(f'<circle class="{cls}" cx="{self.px(x):.2f}" cy="{self.py(y):.2f}" '
                          f'r="2.5" fill="{fill}"/>')

    def label(self, xlabel: str, ylabel: str) -> None:
        self.parts.append(f'<text x="{SIZE / 2}" y="{SIZE - 8}" text-anchor="middle" '
                          f'font-size="12">{escape(xlabel)}</text>')
        self.parts.append(f'<text x="12" y="{SIZE / 2}" font-size="12" '
                          f'transform="rotate(-90 12 {SIZE / 2})" text-anchor="middle">'
                          f'{escape(ylabel)}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def diagram_svg(births: Sequence[float], deaths: Sequence[float], title: str = "persistence diagram",
                dims: Sequence[int] | None = None) -> str:
    """Scatter of (birth, death) with the diagonal; essential points sit on the top edge."""
    b = np.asarray(births, dtype=float)
    d = np.asarray(deaths, dtype=float)
    finite = np.isfinite(d)
    vals = np.concatenate([b, d[finite]]) if b.size else np.array([0.0, 1.0])
    lo, hi = float(vals.min()), float(vals.max())
    span = hi - lo if hi > lo else 1.0
    lo, top = lo - 0.05 * span, hi + 0.1 * span
    c = _Canvas((lo, top), (lo, top), title)
    c.line(lo, lo, top, top, "diagonal")
    colours = ["#1f77b4", "#d62728", "#2ca02c"]
    for k in range(len(b)):
        y = d[k] if finite[k] else top
        fill = colours[int(dims[k]) % 3] if dims is not None else "black"
        c.dot(b[k], y, "essential" if not finite[k] else "point", fill)
    c.label("birth", "death")
    return c.render()


def histogram_svg(edges: np.ndarray, density: np.ndarray, title: str = "histogram") -> str:
    """Histogram of standardized values against the standard normal density."""
    top = max(float(np.max(density)) if density.size else 0.0, 1 / math.sqrt(2 * math.pi)) * 1.1
    c = _Canvas((float(edges[0]), float(edges[-1])), (0.0, top), title)
    for k, h in enumerate(density):
        x0, x1 = c.px(edges[k]), c.px(edges[k + 1])
        y = c.py(h)
        c.parts.append(f'<rect class="bar" x="{x0:.2f}" y="{y:.2f}" width="{x1 - x0:.2f}" '
                       f'height="{c.py(0) - y:.2f}" fill="#9ecae1" stroke="white"/>')
    xs = np.linspace(edges[0], edges[-1], 200)
    ys = np.exp(-xs ** 2 / 2) / math.sqrt(2 * math.pi)
    path = " ".join(f"{c.px(x):.2f},{c.py(y):.2f}" for x, y in zip(xs, ys))
    c.parts.append(f'<polyline class="normal" points="{path}" fill="none" stroke="red"/>')
    c.label("standardized statistic", "density")
    return c.render()


def qq_svg(theoretical: np.ndarray, sample: np.ndarray, title: str = "Q-Q plot",
           max_points: int = 500) -> str:
    idx = np.unique(np.linspace(0, len(sample) - 1, min(max_points, len(sample))).astype(int))
    t, s = theoretical[idx], sample[idx]
    lo = float(min(t.min(), s.min()))
    hi = float(max(t.max(), s.max()))
    c = _Canvas((lo, hi), (lo, hi), title)
    c.line(lo, lo, hi, hi, "diagonal")
    for x, y in zip(t, s):
        c.dot(x, y, "point")
    c.label("standard normal quantile", "sample quantile")
    return c.render()
