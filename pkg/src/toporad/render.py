"""Deterministic SVG 1.1 drawings of barcodes, persistence diagrams, ROC
curves and topological time series. Plain string assembly, no plotting
backend, so output is byte-stable."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

from .tables import fmt

W, H = 480, 360
MARGIN = 48
COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


def _n(x: float) -> str:
    return f"{x:.2f}"


class _Canvas:
    def __init__(self, title: str, xrange, yrange, xlabel: str = "", ylabel: str = ""):
        self.parts: list[str] = []
        self.x0, self.x1 = xrange
        self.y0, self.y1 = yrange
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel

    def sx(self, x: float) -> float:
        return MARGIN + (x - self.x0) / (self.x1 - self.x0) * (W - 2 * MARGIN)

    def sy(self, y: float) -> float:
        return H - MARGIN - (y - self.y0) / (self.y1 - self.y0) * (H - 2 * MARGIN)

    def add(self, s: str) -> None:
        self.parts.append(s)

    def svg(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">\n'
            f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>\n'
            f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{escape(self.title)}</text>\n'
        )
        axes = (
            f'<g class="axes" stroke="black" fill="none">'
            f'<line x1="{MARGIN}" y1="{H - MARGIN}" x2="{W - MARGIN}" y2="{H - MARGIN}"/>'
            f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{H - MARGIN}"/></g>\n'
            f'<text x="{MARGIN}" y="{H - MARGIN + 16}" font-size="10">{escape(fmt(self.x0))}</text>\n'
            f'<text x="{W - MARGIN}" y="{H - MARGIN + 16}" font-size="10" text-anchor="end">{escape(fmt(self.x1))}</text>\n'
            f'<text x="{W / 2}" y="{H - 10}" font-size="11" text-anchor="middle">{escape(self.xlabel)}</text>\n'
            f'<text x="14" y="{H / 2}" font-size="11" transform="rotate(-90 14 {H / 2})" text-anchor="middle">'
            f"{escape(self.ylabel)}</text>\n"
        )
        return head + axes + "".join(p + "\n" for p in self.parts) + "</svg>\n"


def _polyline(points, color: str, cls: str) -> str:
    pts = " ".join(f"{_n(x)},{_n(y)}" for x, y in points)
    return f'<polyline class="{cls}" fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>'


def barcode_svg(barcode, title: str = "barcode") -> str:
    """Horizontal bars, H0 above H1; unbounded bars run to the right edge."""
    ivs = sorted(barcode.intervals, key=lambda iv: (iv.dim, iv.birth, iv.death))
    finite = [v for iv in ivs for v in (iv.birth, iv.death) if not math.isinf(v)]
    lo = min(finite) if finite else 0.0
    hi = max(finite + [barcode.t_max]) if finite else 1.0
    c = _Canvas(title, (lo, hi if hi > lo else lo + 1), (0, max(len(ivs), 1)), "filtration value", "interval")
    for k, iv in enumerate(ivs):
        x0 = c.sx(iv.birth)
        x1 = W - MARGIN if math.isinf(iv.death) else c.sx(iv.death)
        y = c.sy(len(ivs) - k) + 1
        h = max(1.0, (H - 2 * MARGIN) / max(len(ivs), 1) - 2)
        c.add(
            f'<rect class="bar" data-dim="{iv.dim}" x="{_n(x0)}" y="{_n(y)}" width="{_n(max(x1 - x0, 0.5))}" '
            f'height="{_n(h)}" fill="{COLORS[iv.dim]}"/>'
        )
    return c.svg()


def diagram_svg(barcode, title: str = "persistence diagram") -> str:
    finite = [v for iv in barcode.intervals for v in (iv.birth, iv.death) if not math.isinf(v)]
    lo = min(finite) if finite else 0.0
    hi = max(finite + [barcode.t_max + 1]) if finite else 1.0
    c = _Canvas(title, (lo, hi), (lo, hi), "birth", "death")
    c.add(f'<line class="diagonal" x1="{_n(c.sx(lo))}" y1="{_n(c.sy(lo))}" x2="{_n(c.sx(hi))}" y2="{_n(c.sy(hi))}" stroke="gray"/>')
    for iv in barcode.intervals:
        d = hi if math.isinf(iv.death) else iv.death
        c.add(f'<circle class="point" data-dim="{iv.dim}" cx="{_n(c.sx(iv.birth))}" cy="{_n(c.sy(d))}" r="3" fill="{COLORS[iv.dim]}"/>')
    return c.svg()


def roc_svg(roc, title: str = "ROC") -> str:
    """``roc`` is a sequence of (threshold, fpr, tpr)."""
    c = _Canvas(title, (0, 1), (0, 1), "false positive rate", "true positive rate")
    c.add(_polyline([(c.sx(0), c.sy(0)), (c.sx(1), c.sy(1))], "gray", "chance"))
    c.add(_polyline([(c.sx(f), c.sy(t)) for _, f, t in roc], COLORS[0], "roc"))
    return c.svg()


def timeseries_svg(series: dict[str, list[tuple[float, float]]], title: str = "time series", ylabel: str = "") -> str:
    xs = [x for pts in series.values() for x, _ in pts] or [0.0, 1.0]
    ys = [y for pts in series.values() for _, y in pts] or [0.0, 1.0]
    c = _Canvas(title, (min(xs), max(xs)), (min(0.0, min(ys)), max(ys)), "frame", ylabel)
    for k, (name, pts) in enumerate(sorted(series.items())):
        color = COLORS[k % len(COLORS)]
        c.add(_polyline([(c.sx(x), c.sy(y)) for x, y in pts], color, "series"))
        c.add(f'<text x="{W - MARGIN + 2}" y="{MARGIN + 12 * k}" font-size="9" fill="{color}">{escape(name)}</text>')
    return c.svg()
