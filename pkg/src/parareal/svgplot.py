"""Minimal self-contained SVG log-log plotting, no external renderer."""

from __future__ import annotations

import math

WIDTH, HEIGHT = 640, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 30, 50
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _decades(lo: float, hi: float) -> list[int]:
    return list(range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1))


def log_log_svg(series, title: str = "", xlabel: str = "", ylabel: str = "") -> str:
    """Render (label, xs, ys) series on log-log axes; nonpositive points are dropped."""
    clean = []
    for label, xs, ys in series:
        pts = [(x, y) for x, y in zip(xs, ys) if x > 0 and y > 0 and math.isfinite(y)]
        if pts:
            clean.append((label, pts))
    if not clean:
        clean = [("empty", [(1.0, 1.0)])]
    all_x = [x for _, pts in clean for x, _ in pts]
    all_y = [y for _, pts in clean for _, y in pts]
    x0, x1 = min(all_x), max(all_x)
    y0, y1 = min(all_y), max(all_y)
    if x0 == x1:
        x0, x1 = x0 / 2, x1 * 2
    if y0 == y1:
        y0, y1 = y0 / 2, y1 * 2

    iw = WIDTH - MARGIN_L - MARGIN_R
    ih = HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + iw * (math.log10(x) - math.log10(x0)) / (math.log10(x1) - math.log10(x0))

    def py(y):
        return MARGIN_T + ih * (math.log10(y1) - math.log10(y)) / (math.log10(y1) - math.log10(y0))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{iw}" height="{ih}" '
        'fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{WIDTH/2:.0f}" y="20" text-anchor="middle">{title}</text>')
    for d in _decades(x0, x1):
        x = 10.0**d
        if x0 <= x <= x1:
            out.append(
                f'<line x1="{px(x):.1f}" y1="{MARGIN_T}" x2="{px(x):.1f}" '
                f'y2="{MARGIN_T+ih}" stroke="#ddd"/>'
            )
            out.append(
                f'<text x="{px(x):.1f}" y="{MARGIN_T+ih+16}" text-anchor="middle">1e{d}</text>'
            )
    for d in _decades(y0, y1):
        y = 10.0**d
        if y0 <= y <= y1:
            out.append(
                f'<line x1="{MARGIN_L}" y1="{py(y):.1f}" x2="{MARGIN_L+iw}" '
                f'y2="{py(y):.1f}" stroke="#ddd"/>'
            )
            out.append(
                f'<text x="{MARGIN_L-6}" y="{py(y)+4:.1f}" text-anchor="end">1e{d}</text>'
            )
    if xlabel:
        out.append(
            f'<text x="{MARGIN_L+iw/2:.0f}" y="{HEIGHT-12}" text-anchor="middle">{xlabel}</text>'
        )
    if ylabel:
        out.append(
            f'<text x="16" y="{MARGIN_T+ih/2:.0f}" text-anchor="middle" '
            f'transform="rotate(-90 16 {MARGIN_T+ih/2:.0f})">{ylabel}</text>'
        )
    for i, (label, pts) in enumerate(clean):
        color = PALETTE[i % len(PALETTE)]
        path = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in pts:
            out.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="3" fill="{color}"/>')
        lx, ly = MARGIN_L + iw - 150, MARGIN_T + 16 + 16 * i
        out.append(f'<line x1="{lx}" y1="{ly-4}" x2="{lx+24}" y2="{ly-4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx+30}" y="{ly}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out)
