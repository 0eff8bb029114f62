"""Tiny dependency-free SVG line/histogram plots for CLI reports."""

from __future__ import annotations

from pathlib import Path

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def line_plot(path, series, xlabel: str = "", ylabel: str = "", title: str = "",
              width: int = 480, height: int = 360) -> None:
    """Write a polyline plot. `series` is a list of (xs, ys, label) tuples."""
    ml, mr, mt, mb = 56, 16, 28, 44
    pw, ph = width - ml - mr, height - mt - mb
    xs_all = [x for xs, _, _ in series for x in xs]
    ys_all = [y for _, ys, _ in series for y in ys]
    x0, x1 = (min(xs_all), max(xs_all)) if xs_all else (0.0, 1.0)
    y0, y1 = (min(ys_all), max(ys_all)) if ys_all else (0.0, 1.0)
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y1 = y0 + 1.0

    def sx(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="16" text-anchor="middle" font-size="13">{title}</text>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for tx in _ticks(x0, x1):
        parts.append(f'<line x1="{sx(tx):.1f}" y1="{mt + ph}" x2="{sx(tx):.1f}" '
                     f'y2="{mt + ph + 4}" stroke="#444"/>')
        parts.append(f'<text x="{sx(tx):.1f}" y="{mt + ph + 16}" '
                     f'text-anchor="middle">{tx:.3g}</text>')
    for ty in _ticks(y0, y1):
        parts.append(f'<line x1="{ml - 4}" y1="{sy(ty):.1f}" x2="{ml}" '
                     f'y2="{sy(ty):.1f}" stroke="#444"/>')
        parts.append(f'<text x="{ml - 6}" y="{sy(ty) + 3:.1f}" '
                     f'text-anchor="end">{ty:.3g}</text>')
    parts.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" '
                 f'text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="14" y="{mt + ph / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 14 {mt + ph / 2:.1f})">{ylabel}</text>')

    for idx, (xs, ys, label) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        if label:
            ly = mt + 14 + 14 * idx
            parts.append(f'<line x1="{ml + pw - 70}" y1="{ly}" x2="{ml + pw - 52}" '
                         f'y2="{ly}" stroke="{color}" stroke-width="1.5"/>')
            parts.append(f'<text x="{ml + pw - 48}" y="{ly + 3}">{label}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


def histogram_plot(path, values, bins: int = 20, xlabel: str = "", title: str = "",
                   width: int = 480, height: int = 360) -> None:
    """Write a bar histogram of `values`."""
    import numpy as np

    values = np.asarray(list(values), dtype=float)
    if values.size == 0:
        counts, edges = np.zeros(1), np.array([0.0, 1.0])
    else:
        counts, edges = np.histogram(values, bins=bins)
    ml, mr, mt, mb = 56, 16, 28, 44
    pw, ph = width - ml - mr, height - mt - mb
    cmax = max(1.0, counts.max())
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="16" text-anchor="middle" font-size="13">{title}</text>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    nb = len(counts)
    for i, count in enumerate(counts):
        bar_h = ph * count / cmax
        bx = ml + pw * i / nb
        parts.append(f'<rect x="{bx:.1f}" y="{mt + ph - bar_h:.1f}" '
                     f'width="{pw / nb:.2f}" height="{bar_h:.1f}" '
                     f'fill="#1f77b4" stroke="white" stroke-width="0.5"/>')
    for i in range(0, nb + 1, max(1, nb // 5)):
        bx = ml + pw * i / nb
        parts.append(f'<text x="{bx:.1f}" y="{mt + ph + 16}" '
                     f'text-anchor="middle">{edges[i]:.3g}</text>')
    parts.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 8}" '
                 f'text-anchor="middle">{xlabel}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
