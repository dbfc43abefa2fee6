"""Deterministic, dependency-free SVG rendering of histograms and curves.

The renderer emits a fixed-size self-contained SVG: histogram bars for a
:class:`blocktime.fitting.Histogram`, an optional overlaid model curve as a
single path, and labeled axes.  All coordinates are formatted with a fixed
precision in a fixed element order, so identical inputs produce
byte-identical output.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .errors import DomainError
from .fitting import Histogram

__all__ = ["render_plot_svg"]

_WIDTH = 800
_HEIGHT = 520
_LEFT = 78
_RIGHT = 24
_TOP = 42
_BOTTOM = 66

_BAR_FILL = "#7a9bbd"
_BAR_EDGE = "#4a617a"
_CURVE_COLOR = "#c23b21"
_AXIS_COLOR = "#222222"
_GRID_COLOR = "#dddddd"


def _fmt(value: float) -> str:
    text = f"{value:.3f}"
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text if text != "-0" else "0"


def _fmt_tick(value: float) -> str:
    return f"{value:.5g}"


def render_plot_svg(
    hist: Histogram,
    curve_t=None,
    curve_y=None,
    *,
    title: str | None = None,
    x_label: str = "block time (seconds)",
    y_label: str = "density (1/seconds)",
) -> str:
    """Render a histogram (and optional curve) to an SVG document string.

    ``curve_t``/``curve_y`` are parallel arrays; points outside the
    histogram's x-range are dropped (the caller decides whether that merits
    a warning).  A curve with fewer than two usable points is omitted.
    """
    if not isinstance(hist, Histogram):
        raise DomainError("hist must be a Histogram")
    x_lo = float(hist.bin_edges[0])
    x_hi = float(hist.bin_edges[-1])
    y_max = float(hist.densities.max())

    if curve_t is None or curve_y is None:
        points = np.empty((0, 2))
    else:
        t_arr = np.asarray(curve_t, dtype=np.float64).reshape(-1)
        y_arr = np.asarray(curve_y, dtype=np.float64).reshape(-1)
        if t_arr.shape != y_arr.shape:
            raise DomainError("curve_t and curve_y must have matching lengths")
        keep = (
            np.isfinite(t_arr)
            & np.isfinite(y_arr)
            & (t_arr >= x_lo)
            & (t_arr <= x_hi)
        )
        points = np.column_stack([t_arr[keep], y_arr[keep]])
        if points.shape[0] >= 2:
            order = np.argsort(points[:, 0], kind="stable")
            points = points[order]
            y_max = max(y_max, float(points[:, 1].max()))
    if points.shape[0] < 2:
        points = np.empty((0, 2))

    if y_max <= 0.0 or not math.isfinite(y_max):
        raise DomainError("nothing to plot: non-positive density range")
    y_top = 1.08 * y_max

    plot_w = _WIDTH - _LEFT - _RIGHT
    plot_h = _HEIGHT - _TOP - _BOTTOM
    span = x_hi - x_lo

    def sx(x: float) -> float:
        return _LEFT + (x - x_lo) / span * plot_w

    def sy(y: float) -> float:
        return _TOP + plot_h - min(y, y_top) / y_top * plot_h

    parts: list[str] = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">'
    )
    parts.append(f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="#ffffff"/>')

    x_ticks = np.linspace(x_lo, x_hi, 6)
    y_ticks = np.linspace(0.0, y_top, 6)
    for tick in y_ticks[1:]:
        y_pix = _fmt(sy(float(tick)))
        parts.append(
            f'<line x1="{_fmt(_LEFT)}" y1="{y_pix}" x2="{_fmt(_LEFT + plot_w)}" '
            f'y2="{y_pix}" stroke="{_GRID_COLOR}" stroke-width="1"/>'
        )

    for edge_lo, edge_hi, density in zip(
        hist.bin_edges[:-1], hist.bin_edges[1:], hist.densities
    ):
        if density <= 0.0:
            continue
        x_pix = sx(float(edge_lo))
        w_pix = sx(float(edge_hi)) - x_pix
        y_pix = sy(float(density))
        h_pix = sy(0.0) - y_pix
        parts.append(
            f'<rect x="{_fmt(x_pix)}" y="{_fmt(y_pix)}" width="{_fmt(w_pix)}" '
            f'height="{_fmt(h_pix)}" fill="{_BAR_FILL}" stroke="{_BAR_EDGE}" '
            f'stroke-width="0.5"/>'
        )

    if points.shape[0] >= 2:
        steps = " ".join(
            f"L {_fmt(sx(float(px)))},{_fmt(sy(float(py)))}" for px, py in points[1:]
        )
        start = f"M {_fmt(sx(float(points[0, 0])))},{_fmt(sy(float(points[0, 1])))}"
        parts.append(
            f'<path d="{start} {steps}" fill="none" stroke="{_CURVE_COLOR}" '
            f'stroke-width="2"/>'
        )

    axis_y = _fmt(sy(0.0))
    parts.append(
        f'<line x1="{_fmt(_LEFT)}" y1="{axis_y}" x2="{_fmt(_LEFT + plot_w)}" '
        f'y2="{axis_y}" stroke="{_AXIS_COLOR}" stroke-width="1.5"/>'
    )
    parts.append(
        f'<line x1="{_fmt(_LEFT)}" y1="{_fmt(_TOP)}" x2="{_fmt(_LEFT)}" '
        f'y2="{axis_y}" stroke="{_AXIS_COLOR}" stroke-width="1.5"/>'
    )

    for tick in x_ticks:
        x_pix = _fmt(sx(float(tick)))
        parts.append(
            f'<line x1="{x_pix}" y1="{axis_y}" x2="{x_pix}" '
            f'y2="{_fmt(sy(0.0) + 6)}" stroke="{_AXIS_COLOR}" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x_pix}" y="{_fmt(sy(0.0) + 22)}" font-family="sans-serif" '
            f'font-size="12" text-anchor="middle" fill="{_AXIS_COLOR}">'
            f"{escape(_fmt_tick(float(tick)))}</text>"
        )
    for tick in y_ticks:
        y_pix = _fmt(sy(float(tick)))
        parts.append(
            f'<line x1="{_fmt(_LEFT - 6)}" y1="{y_pix}" x2="{_fmt(_LEFT)}" '
            f'y2="{y_pix}" stroke="{_AXIS_COLOR}" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(_LEFT - 10)}" y="{y_pix}" font-family="sans-serif" '
            f'font-size="12" text-anchor="end" dominant-baseline="middle" '
            f'fill="{_AXIS_COLOR}">{escape(_fmt_tick(float(tick)))}</text>'
        )

    parts.append(
        f'<text x="{_fmt(_LEFT + plot_w / 2)}" y="{_fmt(_HEIGHT - 18)}" '
        f'font-family="sans-serif" font-size="14" text-anchor="middle" '
        f'fill="{_AXIS_COLOR}">{escape(x_label)}</text>'
    )
    parts.append(
        f'<text x="20" y="{_fmt(_TOP + plot_h / 2)}" font-family="sans-serif" '
        f'font-size="14" text-anchor="middle" fill="{_AXIS_COLOR}" '
        f'transform="rotate(-90 20 {_fmt(_TOP + plot_h / 2)})">{escape(y_label)}</text>'
    )
    if title:
        parts.append(
            f'<text x="{_fmt(_LEFT + plot_w / 2)}" y="26" font-family="sans-serif" '
            f'font-size="16" text-anchor="middle" fill="{_AXIS_COLOR}">'
            f"{escape(title)}</text>"
        )

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
