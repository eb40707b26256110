"""CSV and SVG output.  Numbers are written with 17 significant digits so
files round-trip exactly and repeated runs are byte-identical."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "fmt",
    "eigenfunction_csv",
    "orbit_csv",
    "orbit_table",
    "write_text",
    "svg_plot",
]


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


def _rows(header: str, rows) -> str:
    lines = [header]
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def eigenfunction_csv(x: np.ndarray, t: np.ndarray, phi: np.ndarray) -> str:
    """``x,t,phi`` rows, row-major over the (space, time) sample grid."""
    phi = np.asarray(phi)
    if phi.shape != (len(x), len(t)):
        raise ValueError(f"phi has shape {phi.shape}, expected {(len(x), len(t))}")
    lines = ["x,t,phi"]
    t_text = [fmt(v) for v in t]
    for i, xi in enumerate(x):
        xs = fmt(xi)
        lines.extend(f"{xs},{tt},{fmt(p)}" for tt, p in zip(t_text, phi[i]))
    return "\n".join(lines) + "\n"


def orbit_csv(orbit) -> str:
    return _rows("t,P", zip(orbit.t, orbit.samples))


def orbit_table(orbits) -> str:
    return _rows(
        "index,kind,y0,multiplier,stable",
        ((i, o.kind, o.y0, o.multiplier, o.stable) for i, o in enumerate(orbits)),
    )


def write_text(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def _ticks(lo: float, hi: float) -> list[float]:
    step = (hi - lo) / 4 if hi > lo else 1.0
    return [lo + k * step for k in range(5)]


def svg_plot(
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    logx: bool = False,
    logy: bool = False,
    width: int = 640,
    height: int = 420,
) -> str:
    """Polyline plot with axes and a legend.  Non-finite or non-positive (on a
    log axis) points are dropped."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"]
    margin_l, margin_r, margin_t, margin_b = 70, 20, 36, 50
    cleaned = []
    for name, xs, ys in series:
        pts = []
        for xv, yv in zip(xs, ys):
            xv, yv = float(xv), float(yv)
            if not (math.isfinite(xv) and math.isfinite(yv)):
                continue
            if (logx and xv <= 0) or (logy and yv <= 0):
                continue
            pts.append((math.log10(xv) if logx else xv, math.log10(yv) if logy else yv))
        cleaned.append((name, pts))
    every = [p for _, pts in cleaned for p in pts] or [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in every), max(p[0] for p in every)
    y0, y1 = min(p[1] for p in every), max(p[1] for p in every)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = width - margin_l - margin_r, height - margin_t - margin_b

    def sx(v):
        return margin_l + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return margin_t + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{margin_l}" y="{margin_t}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for tick in _ticks(x0, x1):
        label = f"{10.0**tick:.2g}" if logx else f"{tick:.3g}"
        if x0 - 1e-12 <= tick <= x1 + 1e-12:
            out.append(f'<text x="{sx(tick):.2f}" y="{height - margin_b + 16}" text-anchor="middle">{label}</text>')
    for tick in _ticks(y0, y1):
        label = f"{10.0**tick:.2g}" if logy else f"{tick:.3g}"
        out.append(f'<text x="{margin_l - 6}" y="{sy(tick) + 4:.2f}" text-anchor="end">{label}</text>')
    out.append(f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>')
    out.append(f'<text x="{margin_l + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{margin_t + ph / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {margin_t + ph / 2:.1f})">{_esc(ylabel)}</text>'
    )
    for k, (name, pts) in enumerate(cleaned):
        color = colors[k % len(colors)]
        if pts:
            path = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            out.extend(
                f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="2.5" fill="{color}"/>' for a, b in pts
            )
        ly = margin_t + 14 + 16 * k
        out.append(f'<line x1="{margin_l + 10}" y1="{ly - 4}" x2="{margin_l + 30}" y2="{ly - 4}" stroke="{color}"/>')
        out.append(f'<text x="{margin_l + 36}" y="{ly}">{_esc(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
