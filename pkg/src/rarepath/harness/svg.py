"""Minimal byte-deterministic SVG charts (fixed-precision coordinates, no timestamps)."""

from __future__ import annotations

from html import escape
from pathlib import Path
from typing import Sequence

import numpy as np

W, H, PAD = 480, 360, 48
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _scale(lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def _frame(title: str, comment: str, xlim, ylim) -> list[str]:
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f"<!-- rarepath {escape(comment, quote=False).replace('--', '- -')} -->",
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" fill="none" stroke="#444"/>',
        f'<text x="{W / 2:.1f}" y="{PAD / 2:.1f}" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<text x="{PAD}" y="{H - PAD / 3:.1f}" font-size="10">x: [{xlim[0]:.3g}, {xlim[1]:.3g}]</text>',
        f'<text x="{W - PAD}" y="{H - PAD / 3:.1f}" text-anchor="end" font-size="10">'
        f"y: [{ylim[0]:.3g}, {ylim[1]:.3g}]</text>",
    ]
    return out


def _limits(v):
    lo, hi = float(np.min(v)), float(np.max(v))
    pad = 0.05 * (hi - lo) if hi > lo else 0.5
    return lo - pad, hi + pad


def scatter(path, points, labels: Sequence[int], names: Sequence[str], title: str, comment: str) -> Path:
    """2-D scatter, one colour per label index, with a legend."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("scatter needs a nonempty (N, 2) point set")
    if pts.shape[1] == 1:
        pts = np.column_stack([pts[:, 0], np.zeros(pts.shape[0])])
    xlim, ylim = _limits(pts[:, 0]), _limits(pts[:, 1])
    sx = _scale(*xlim, PAD, W - PAD)
    sy = _scale(*ylim, H - PAD, PAD)
    out = _frame(title, comment, xlim, ylim)
    for (x, y), lab in zip(pts, labels):
        out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="1.5" fill="{PALETTE[lab % len(PALETTE)]}"/>')
    for i, name in enumerate(names):
        y = PAD + 14 + 14 * i
        out.append(f'<rect x="{W - PAD - 90}" y="{y - 8}" width="8" height="8" fill="{PALETTE[i % len(PALETTE)]}"/>')
        out.append(f'<text x="{W - PAD - 78}" y="{y}" font-size="10">{escape(name)}</text>')
    out.append("</svg>")
    return _write(path, out)


def line_chart(path, series: dict[str, Sequence[tuple[float, float]]], threshold: float | None,
               title: str, comment: str) -> Path:
    """Polylines per series plus an optional dashed horizontal threshold."""
    xs = [p[0] for s in series.values() for p in s]
    ys = [p[1] for s in series.values() for p in s]
    if not xs:
        raise ValueError("line chart needs at least one point")
    if threshold is not None:
        ys = ys + [threshold]
    xlim, ylim = _limits(xs), _limits(ys)
    sx = _scale(*xlim, PAD, W - PAD)
    sy = _scale(*ylim, H - PAD, PAD)
    out = _frame(title, comment, xlim, ylim)
    for i, (name, pts) in enumerate(series.items()):
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        colour = PALETTE[i % len(PALETTE)]
        out.append(f'<polyline points="{coords}" fill="none" stroke="{colour}" stroke-width="1" '
                   f'stroke-opacity="0.6"><title>{escape(name)}</title></polyline>')
    if threshold is not None:
        y = sy(threshold)
        out.append(f'<line class="threshold" x1="{PAD}" y1="{y:.2f}" x2="{W - PAD}" y2="{y:.2f}" '
                   f'stroke="black" stroke-dasharray="6,4"/>')
    out.append("</svg>")
    return _write(path, out)


def _write(path, lines) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path
