"""Minimal deterministic SVG renderer for stored artifacts.

Only what the reproduction recipes need: line plots on linear/log axes with
ticks and labels, plus a rectangle heatmap.  Output is a pure function of the
input arrays, so re-rendering produces byte-identical files.
"""

from __future__ import annotations

import math
from pathlib import Path

WIDTH, HEIGHT = 640, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 30, 55

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        lo_d = math.floor(math.log10(lo))
        hi_d = math.ceil(math.log10(hi))
        vals = [10.0**d for d in range(lo_d, hi_d + 1)]
        return [v for v in vals if lo <= v <= hi] or [lo, hi]
    span = hi - lo
    if span <= 0:
        return [lo]
    step = 10.0 ** math.floor(math.log10(span / 4))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= 6:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-12 * span:
        out.append(round(v, 12))
        v += step
    return out


class _Axis:
    def __init__(self, lo, hi, pixel_lo, pixel_hi, log):
        if log:
            lo = max(lo, 1e-300)
            hi = max(hi, lo * 10)
        if hi <= lo:
            hi = lo + 1.0
        self.lo, self.hi, self.log = lo, hi, log
        self.plo, self.phi = pixel_lo, pixel_hi

    def to_px(self, v):
        if self.log:
            f = (math.log10(max(v, 1e-300)) - math.log10(self.lo)) / (
                math.log10(self.hi) - math.log10(self.lo)
            )
        else:
            f = (v - self.lo) / (self.hi - self.lo)
        return self.plo + f * (self.phi - self.plo)


def render_line_plot(
    x,
    ys: list,
    labels: list[str],
    path: str | Path,
    kind: str = "line",
    xlabel: str = "",
    ylabel: str = "",
    title: str = "",
) -> Path:
    """Render one or more curves sharing an x axis.

    ``kind``: "line", "semilogx", "semilogy" or "loglog".
    """
    logx = kind in ("semilogx", "loglog")
    logy = kind in ("semilogy", "loglog")
    pts = []
    for y in ys:
        pairs = [
            (float(a), float(b))
            for a, b in zip(x, y)
            if _finite(a, logx) and _finite(b, logy)
        ]
        pts.append(pairs)
    allx = [a for series in pts for a, _ in series]
    ally = [b for series in pts for _, b in series]
    if not allx:
        allx, ally = [0.0, 1.0], [0.0, 1.0]
    ax = _Axis(min(allx), max(allx), MARGIN_L, WIDTH - MARGIN_R, logx)
    ay = _Axis(min(ally), max(ally), HEIGHT - MARGIN_B, MARGIN_T, logy)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{WIDTH-MARGIN_L-MARGIN_R}" '
        f'height="{HEIGHT-MARGIN_T-MARGIN_B}" fill="none" stroke="black"/>',
    ]
    for tv in _ticks(ax.lo, ax.hi, logx):
        px = ax.to_px(tv)
        parts.append(
            f'<line x1="{px:.1f}" y1="{HEIGHT-MARGIN_B}" x2="{px:.1f}" '
            f'y2="{HEIGHT-MARGIN_B+5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{px:.1f}" y="{HEIGHT-MARGIN_B+18}" font-size="11" '
            f'text-anchor="middle">{_fmt(tv)}</text>'
        )
    for tv in _ticks(ay.lo, ay.hi, logy):
        py = ay.to_px(tv)
        parts.append(
            f'<line x1="{MARGIN_L-5}" y1="{py:.1f}" x2="{MARGIN_L}" '
            f'y2="{py:.1f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{MARGIN_L-8}" y="{py+4:.1f}" font-size="11" '
            f'text-anchor="end">{_fmt(tv)}</text>'
        )
    for i, series in enumerate(pts):
        if not series:
            continue
        d = " ".join(
            f"{'M' if k == 0 else 'L'}{ax.to_px(a):.2f},{ay.to_px(b):.2f}"
            for k, (a, b) in enumerate(series)
        )
        parts.append(
            f'<path d="{d}" fill="none" stroke="{_COLORS[i % len(_COLORS)]}" '
            f'stroke-width="1.5"/>'
        )
        if i < len(labels) and labels[i]:
            parts.append(
                f'<text x="{WIDTH-MARGIN_R-6}" y="{MARGIN_T+16+14*i}" '
                f'font-size="12" text-anchor="end" '
                f'fill="{_COLORS[i % len(_COLORS)]}">{labels[i]}</text>'
            )
    if xlabel:
        parts.append(
            f'<text x="{(MARGIN_L+WIDTH-MARGIN_R)/2}" y="{HEIGHT-12}" '
            f'font-size="13" text-anchor="middle">{xlabel}</text>'
        )
    if ylabel:
        cx, cy = 16, (MARGIN_T + HEIGHT - MARGIN_B) / 2
        parts.append(
            f'<text x="{cx}" y="{cy}" font-size="13" text-anchor="middle" '
            f'transform="rotate(-90 {cx} {cy})">{ylabel}</text>'
        )
    if title:
        parts.append(
            f'<text x="{WIDTH/2}" y="{MARGIN_T-10}" font-size="14" '
            f'text-anchor="middle">{title}</text>'
        )
    parts.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(parts) + "\n")
    return path


def render_heatmap(
    matrix,
    path: str | Path,
    xlabel: str = "",
    ylabel: str = "",
    title: str = "",
) -> Path:
    """Grayscale rectangle heatmap of a 2D array (rows plotted top-down)."""
    rows = [[float(v) for v in row] for row in matrix]
    nr, nc = len(rows), len(rows[0]) if rows else 0
    finite = [v for row in rows for v in row if math.isfinite(v)]
    lo = min(finite) if finite else 0.0
    hi = max(finite) if finite else 1.0
    span = hi - lo or 1.0
    cw = (WIDTH - MARGIN_L - MARGIN_R) / max(nc, 1)
    ch = (HEIGHT - MARGIN_T - MARGIN_B) / max(nr, 1)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            if not math.isfinite(v):
                continue
            g = int(255 * (1.0 - (v - lo) / span))
            parts.append(
                f'<rect x="{MARGIN_L+j*cw:.2f}" y="{MARGIN_T+i*ch:.2f}" '
                f'width="{cw:.2f}" height="{ch:.2f}" '
                f'fill="rgb({g},{g},255)"/>'
            )
    for label, x, y, rot in (
        (xlabel, (MARGIN_L + WIDTH - MARGIN_R) / 2, HEIGHT - 12, None),
        (title, WIDTH / 2, MARGIN_T - 10, None),
    ):
        if label:
            parts.append(
                f'<text x="{x}" y="{y}" font-size="13" text-anchor="middle">'
                f"{label}</text>"
            )
    if ylabel:
        cx, cy = 16, (MARGIN_T + HEIGHT - MARGIN_B) / 2
        parts.append(
            f'<text x="{cx}" y="{cy}" font-size="13" text-anchor="middle" '
            f'transform="rotate(-90 {cx} {cy})">{ylabel}</text>'
        )
    parts.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(parts) + "\n")
    return path


def _finite(v, log: bool) -> bool:
    v = float(v)
    if not math.isfinite(v):
        return False
    return v > 0 if log else True
