"""Minimal static SVG line charts for the sweep harness.

Hand-rolled on purpose: deterministic output, no plotting dependencies.
Supports linear and log axes, multiple series with markers, and a legend.
"""

from __future__ import annotations

import math

_COLORS = ("#1f6f8b", "#d1495b", "#66a182", "#edae49", "#5f5aa2", "#30323d")
_WIDTH, _HEIGHT = 640, 420
_MARGIN = dict(left=70, right=20, top=40, bottom=56)


def _transform(value: float, lo: float, hi: float, log: bool) -> float:
    if log:
        value, lo, hi = math.log10(value), math.log10(lo), math.log10(hi)
    if hi == lo:
        return 0.5
    return (value - lo) / (hi - lo)


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        lo_e = math.floor(math.log10(lo))
        hi_e = math.ceil(math.log10(hi))
        return [10.0**e for e in range(int(lo_e), int(hi_e) + 1)]
    span = hi - lo
    if span <= 0:
        return [lo]
    step = 10.0 ** math.floor(math.log10(span / 4))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= 6:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * span:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _fmt(x: float) -> str:
    return format(x, ".6g")


def line_chart(
    path: str,
    series: list[tuple[str, list[float], list[float]]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    xlog: bool = False,
    ylog: bool = False,
) -> None:
    """Write one chart; series entries are (label, xs, ys) with equal lengths."""
    pts = [
        (x, y)
        for _, xs, ys in series
        for x, y in zip(xs, ys)
        if math.isfinite(x) and math.isfinite(y) and not (xlog and x <= 0) and not (ylog and y <= 0)
    ]
    if not pts:
        raise ValueError("nothing to plot")
    xs_all = [p[0] for p in pts]
    ys_all = [p[1] for p in pts]
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if not ylog:
        pad = 0.05 * (y_hi - y_lo or abs(y_hi) or 1.0)
        y_lo, y_hi = y_lo - pad, y_hi + pad
    if not xlog:
        pad = 0.05 * (x_hi - x_lo or abs(x_hi) or 1.0)
        x_lo, x_hi = x_lo - pad, x_hi + pad

    plot_w = _WIDTH - _MARGIN["left"] - _MARGIN["right"]
    plot_h = _HEIGHT - _MARGIN["top"] - _MARGIN["bottom"]

    def px(x: float) -> float:
        return _MARGIN["left"] + plot_w * _transform(x, x_lo, x_hi, xlog)

    def py(y: float) -> float:
        return _MARGIN["top"] + plot_h * (1.0 - _transform(y, y_lo, y_hi, ylog))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}" font-family="monospace" font-size="12">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]

    for t in _ticks(x_lo, x_hi, xlog):
        if t < x_lo or t > x_hi:
            continue
        x = px(t)
        out.append(
            f'<line x1="{x:.1f}" y1="{_MARGIN["top"]}" x2="{x:.1f}" '
            f'y2="{_MARGIN["top"] + plot_h}" stroke="#dddddd"/>'
        )
        out.append(
            f'<text x="{x:.1f}" y="{_MARGIN["top"] + plot_h + 16}" '
            f'text-anchor="middle">{_fmt(t)}</text>'
        )
    for t in _ticks(y_lo, y_hi, ylog):
        if t < y_lo or t > y_hi:
            continue
        y = py(t)
        out.append(
            f'<line x1="{_MARGIN["left"]}" y1="{y:.1f}" '
            f'x2="{_MARGIN["left"] + plot_w}" y2="{y:.1f}" stroke="#dddddd"/>'
        )
        out.append(
            f'<text x="{_MARGIN["left"] - 6}" y="{y + 4:.1f}" text-anchor="end">{_fmt(t)}</text>'
        )

    out.append(
        f'<rect x="{_MARGIN["left"]}" y="{_MARGIN["top"]}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="#333333"/>'
    )
    out.append(
        f'<text x="{_MARGIN["left"] + plot_w / 2:.1f}" y="{_HEIGHT - 12}" '
        f'text-anchor="middle">{xlabel}</text>'
    )
    out.append(
        f'<text x="18" y="{_MARGIN["top"] + plot_h / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {_MARGIN["top"] + plot_h / 2:.1f})">{ylabel}</text>'
    )

    for idx, (label, xs, ys) in enumerate(series):
        color = _COLORS[idx % len(_COLORS)]
        coords = [
            (px(x), py(y))
            for x, y in zip(xs, ys)
            if math.isfinite(x) and math.isfinite(y)
            and not (xlog and x <= 0) and not (ylog and y <= 0)
        ]
        if not coords:
            continue
        points = " ".join(f"{x:.2f},{y:.2f}" for x, y in coords)
        out.append(f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.extend(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2.5" fill="{color}"/>' for x, y in coords)
        ly = _MARGIN["top"] + 14 + 16 * idx
        lx = _MARGIN["left"] + plot_w - 150
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{lx + 28}" y="{ly}">{label}</text>')

    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
