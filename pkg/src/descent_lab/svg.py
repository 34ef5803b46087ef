"""Minimal hand-written SVG line plots (no plotting dependency)."""

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT, MARGIN = 640, 480, 56
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _points_attr(px, py):
    return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))


def _scale(v, lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return a + (v - lo) / span * (b - a)


def _document(body, title):
    head = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">\n'
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>\n'
        f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{escape(title)}</text>\n'
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
        f'height="{HEIGHT - 2 * MARGIN}" fill="none" stroke="black"/>\n'
    )
    return head + "".join(body) + "</svg>\n"


def _label(x, y, text, anchor="middle"):
    return (f'<text x="{x:.1f}" y="{y:.1f}" text-anchor="{anchor}" font-family="sans-serif" '
            f'font-size="11">{escape(text)}</text>\n')


def trajectory_svg(points, title="trajectory", decimate=4000):
    """Planar path ``points[:, 0]`` vs ``points[:, 1]`` with equal axis scaling."""
    p = np.asarray(points, dtype=float)
    p = p[np.all(np.isfinite(p), axis=1)]
    if p.shape[0] > decimate:
        idx = np.unique(np.linspace(0, p.shape[0] - 1, decimate).astype(int))
        p = p[idx]
    lo, hi = p.min(axis=0), p.max(axis=0)
    half = 0.5 * max(float(np.max(hi - lo)), 1e-12)
    mid = 0.5 * (lo + hi)
    lo, hi = mid - half, mid + half
    inner = min(WIDTH, HEIGHT) - 2 * MARGIN
    x0 = (WIDTH - inner) / 2
    px = _scale(p[:, 0], lo[0], hi[0], x0, x0 + inner)
    py = _scale(p[:, 1], lo[1], hi[1], MARGIN + inner, MARGIN)
    body = [
        f'<polyline fill="none" stroke="{COLORS[0]}" stroke-width="1.2" '
        f'points="{_points_attr(px, py)}"/>\n',
        f'<circle cx="{px[0]:.2f}" cy="{py[0]:.2f}" r="3" fill="{COLORS[2]}"/>\n',
        f'<circle cx="{px[-1]:.2f}" cy="{py[-1]:.2f}" r="3" fill="{COLORS[1]}"/>\n',
        _label(WIDTH / 2, HEIGHT - 18, f"x_0 in [{lo[0]:.4g}, {hi[0]:.4g}]"),
        _label(12, HEIGHT / 2, f"x_1 in [{lo[1]:.4g}, {hi[1]:.4g}]", anchor="start"),
    ]
    return _document(body, title)


def log_series_svg(k, series, title="descent history", decimate=4000):
    """Several positive series against ``k`` on a shared log10 y-axis.

    Non-positive and non-finite values are dropped from their polyline.
    """
    k = np.asarray(k, dtype=float)
    if k.size > decimate:
        idx = np.unique(np.linspace(0, k.size - 1, decimate).astype(int))
    else:
        idx = np.arange(k.size)
    logs = {}
    for name, v in series.items():
        v = np.asarray(v, dtype=float)[idx]
        ok = np.isfinite(v) & (v > 0)
        logs[name] = (k[idx][ok], np.log10(v[ok]))
    all_y = np.concatenate([y for _, y in logs.values()] or [np.zeros(1)])
    if all_y.size == 0:
        all_y = np.zeros(1)
    ylo, yhi = math.floor(float(all_y.min())), math.ceil(float(all_y.max()))
    if yhi == ylo:
        yhi = ylo + 1
    klo, khi = float(k[0]), float(k[-1]) if k.size > 1 else float(k[0]) + 1.0
    body = []
    for i, (name, (kx, y)) in enumerate(logs.items()):
        color = COLORS[i % len(COLORS)]
        if kx.size:
            px = _scale(kx, klo, khi, MARGIN, WIDTH - MARGIN)
            py = _scale(y, ylo, yhi, HEIGHT - MARGIN, MARGIN)
            body.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.2" '
                        f'points="{_points_attr(px, py)}"/>\n')
        body.append(_label(WIDTH - MARGIN - 4, MARGIN + 16 + 14 * i, name, anchor="end")
                    .replace('font-size="11"', f'font-size="11" fill="{color}"'))
    body.append(_label(WIDTH / 2, HEIGHT - 18, f"k from {klo:g} to {khi:g}"))
    body.append(_label(8, MARGIN - 6, f"log10 range [{ylo}, {yhi}]", anchor="start"))
    return _document(body, title)


def write_svg(path, document):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(document)
