"""Minimal static SVG line charts and histograms (no plotting dependency)."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
W, H = 480, 340
ML, MR, MT, MB = 64, 16, 36, 48


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def _frame(title: str, xlabel: str, ylabel: str, version: str) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
        f"<!-- rotquant {escape(version)} -->",
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{W / 2}" y="{H - 8}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{H / 2}" text-anchor="middle" transform="rotate(-90 14 {H / 2})">'
        f"{escape(ylabel)}</text>",
        f'<rect x="{ML}" y="{MT}" width="{W - ML - MR}" height="{H - MT - MB}" '
        f'fill="none" stroke="black"/>',
    ]


class _Axes:
    def __init__(self, xlo, xhi, ylo, yhi, logy=False):
        self.logy = logy
        if logy:
            ylo, yhi = math.log10(ylo), math.log10(yhi)
        if xhi == xlo:
            xlo, xhi = xlo - 1, xhi + 1
        if yhi == ylo:
            ylo, yhi = ylo - 1, yhi + 1
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi

    def px(self, x):
        return ML + (x - self.xlo) / (self.xhi - self.xlo) * (W - ML - MR)

    def py(self, y):
        if self.logy:
            y = math.log10(y)
        return H - MB - (y - self.ylo) / (self.yhi - self.ylo) * (H - MT - MB)


def line_chart(series: dict[str, Sequence[tuple[float, float, float]]], title: str,
               xlabel: str, ylabel: str, version: str = "", log2x: bool = True) -> str:
    """One polyline per series of (x, mean, ci) points, with CI error bars."""
    pts = [(x, m, c) for s in series.values() for x, m, c in s]
    tx = (lambda v: math.log2(v)) if log2x else (lambda v: v)
    xs = [tx(p[0]) for p in pts]
    lows = [p[1] - p[2] for p in pts]
    highs = [p[1] + p[2] for p in pts]
    logy = all(v > 0 for v in lows) and max(highs) / min(lows) > 20
    ylo, yhi = min(lows), max(highs)
    if not logy:
        pad = 0.05 * (yhi - ylo or 1.0)
        ylo, yhi = ylo - pad, yhi + pad
    ax = _Axes(min(xs), max(xs), ylo, yhi, logy)
    out = _frame(title, xlabel, ylabel, version)

    for v in sorted({p[0] for p in pts}):
        x = ax.px(tx(v))
        out.append(f'<line x1="{x:.1f}" y1="{H - MB}" x2="{x:.1f}" y2="{H - MB + 4}" stroke="black"/>')
        out.append(f'<text x="{x:.1f}" y="{H - MB + 16}" text-anchor="middle">{_fmt(v)}</text>')
    yt = [10**t for t in _ticks(ax.ylo, ax.yhi)] if logy else _ticks(ax.ylo, ax.yhi)
    for v in yt:
        y = ax.py(v)
        out.append(f'<line x1="{ML - 4}" y1="{y:.1f}" x2="{ML}" y2="{y:.1f}" stroke="black"/>')
        out.append(f'<text x="{ML - 6}" y="{y + 4:.1f}" text-anchor="end">{_fmt(v)}</text>')

    for i, (name, s) in enumerate(series.items()):
        color = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{ax.px(tx(x)):.2f},{ax.py(m):.2f}" for x, m, _ in s)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, m, c in s:
            px = ax.px(tx(x))
            out.append(f'<line x1="{px:.2f}" y1="{ax.py(m - c):.2f}" x2="{px:.2f}" '
                       f'y2="{ax.py(m + c):.2f}" stroke="{color}"/>')
            out.append(f'<circle cx="{px:.2f}" cy="{ax.py(m):.2f}" r="2.5" fill="{color}"/>')
        ly = MT + 14 + 14 * i
        out.append(f'<line x1="{W - MR - 120}" y1="{ly - 4}" x2="{W - MR - 104}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - MR - 100}" y="{ly}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def histogram(panels: dict[str, Sequence[float]], title: str, xlabel: str,
              bins: int = 40, version: str = "") -> str:
    """Overlaid outline histograms sharing one set of bins."""
    values = [v for vs in panels.values() for v in vs]
    lo, hi = min(values), max(values)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    width = (hi - lo) / bins
    counts = {}
    for name, vs in panels.items():
        c = [0] * bins
        for v in vs:
            c[min(int((v - lo) / width), bins - 1)] += 1
        counts[name] = c
    top = max(max(c) for c in counts.values())
    ax = _Axes(lo, hi, 0, top)
    out = _frame(title, xlabel, "count", version)
    for v in _ticks(lo, hi):
        x = ax.px(v)
        out.append(f'<text x="{x:.1f}" y="{H - MB + 16}" text-anchor="middle">{_fmt(v)}</text>')
    for v in _ticks(0, top):
        out.append(f'<text x="{ML - 6}" y="{ax.py(v) + 4:.1f}" text-anchor="end">{_fmt(v)}</text>')
    for i, (name, c) in enumerate(counts.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = [f"{ax.px(lo):.2f},{ax.py(0):.2f}"]
        for k, n in enumerate(c):
            x0, x1 = ax.px(lo + k * width), ax.px(lo + (k + 1) * width)
            pts += [f"{x0:.2f},{ax.py(n):.2f}", f"{x1:.2f},{ax.py(n):.2f}"]
        pts.append(f"{ax.px(hi):.2f},{ax.py(0):.2f}")
        out.append(f'<polyline points="{" ".join(pts)}" fill="{color}" fill-opacity="0.25" '
                   f'stroke="{color}"/>')
        ly = MT + 14 + 14 * i
        out.append(f'<rect x="{W - MR - 120}" y="{ly - 9}" width="12" height="9" fill="{color}"/>')
        out.append(f'<text x="{W - MR - 104}" y="{ly}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
