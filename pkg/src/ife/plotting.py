"""Standalone SVG rendering of the estimated effect paths.

One panel per treated unit: the effect path as a single polyline path, a
shaded band for the chosen interval family, and a horizontal zero line.
Hand-rolled markup with fixed numeric formatting keeps the output
byte-deterministic.
"""

from __future__ import annotations

import warnings
from xml.sax.saxutils import escape

from .pipeline import EstimateResult

__all__ = ["emit_plot"]

_PANEL_W = 480
_PANEL_H = 220
_MARGIN_L = 56
_MARGIN_R = 16
_MARGIN_T = 30
_MARGIN_B = 34


def _f(v: float) -> str:
    return f"{v:.2f}"


def _panel(
    unit: str,
    times: list[str],
    delta: list[float],
    band: list[tuple[float, float]] | None,
    y_offset: int,
) -> str:
    x0, x1 = _MARGIN_L, _PANEL_W - _MARGIN_R
    y0, y1 = y_offset + _PANEL_H - _MARGIN_B, y_offset + _MARGIN_T  # y grows downward

    values = list(delta) + [0.0]
    if band:
        values += [v for pair in band for v in pair]
    lo, hi = min(values), max(values)
    pad = 0.05 * (hi - lo if hi > lo else max(abs(hi), 1.0))
    lo, hi = lo - pad, hi + pad

    n = len(times)
    def sx(i: int) -> float:
        return x0 if n == 1 else x0 + (x1 - x0) * i / (n - 1)

    def sy(v: float) -> float:
        return y0 + (y1 - y0) * (v - lo) / (hi - lo)

    parts = [f'<g class="panel" data-unit="{escape(unit)}">']
    parts.append(
        f'<text x="{_f((x0 + x1) / 2)}" y="{_f(y_offset + 16)}" text-anchor="middle" '
        f'font-size="13" font-family="sans-serif">unit {escape(unit)}</text>'
    )
    if band:
        pts = [f"{_f(sx(i))},{_f(sy(hi_v))}" for i, (_, hi_v) in enumerate(band)]
        pts += [f"{_f(sx(i))},{_f(sy(lo_v))}" for i, (lo_v, _) in reversed(list(enumerate(band)))]
        parts.append(
            f'<polygon class="band" points="{" ".join(pts)}" fill="#9ecae1" '
            f'fill-opacity="0.45" stroke="none"/>'
        )
    parts.append(
        f'<line class="zero" x1="{_f(x0)}" y1="{_f(sy(0.0))}" x2="{_f(x1)}" '
        f'y2="{_f(sy(0.0))}" stroke="#888888" stroke-dasharray="4,3" stroke-width="1"/>'
    )
    d_attr = " ".join(
        f"{'M' if i == 0 else 'L'} {_f(sx(i))} {_f(sy(v))}" for i, v in enumerate(delta)
    )
    parts.append(
        f'<path class="effect" d="{d_attr}" fill="none" stroke="#08519c" stroke-width="2"/>'
    )
    # axes
    parts.append(
        f'<line x1="{_f(x0)}" y1="{_f(y0)}" x2="{_f(x1)}" y2="{_f(y0)}" '
        f'stroke="#000000" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{_f(x0)}" y1="{_f(y0)}" x2="{_f(x0)}" y2="{_f(y1)}" '
        f'stroke="#000000" stroke-width="1"/>'
    )
    for i, t in enumerate(times):
        parts.append(
            f'<text x="{_f(sx(i))}" y="{_f(y0 + 16)}" text-anchor="middle" '
            f'font-size="11" font-family="sans-serif">{escape(t)}</text>'
        )
    for v in (lo, hi):
        parts.append(
            f'<text x="{_f(x0 - 6)}" y="{_f(sy(v) + 4)}" text-anchor="end" '
            f'font-size="11" font-family="sans-serif">{v:.3g}</text>'
        )
    parts.append("</g>")
    return "\n".join(parts)


def emit_plot(
    result: EstimateResult, family: str = "eq", alpha: float | None = None
) -> str:
    """Render the per-unit effect paths with interval bands as an SVG document.

    ``family`` selects the band ("eq" or "sy"); if the requested intervals
    are unavailable the band is dropped with a warning and the point path is
    still drawn.
    """
    panel = result.panel
    if alpha is None:
        alpha = next(iter(result.intervals), None)
    intervals = result.intervals.get(alpha) if alpha is not None else None
    if family not in ("eq", "sy"):
        warnings.warn(f"unknown interval family {family!r}; drawing point path only")
        intervals = None
    elif intervals is None and result.intervals:
        warnings.warn("requested interval level unavailable; drawing point path only")

    units: list[str] = []
    blocks: list[str] = []
    for j in range(panel.n_treated):
        unit = panel.unit_labels[panel.n_control + j]
        ks = [
            k
            for k in range(panel.n_post)
            if panel.treated_mask[panel.n_pre + k, panel.n_control + j]
        ]
        if not ks:
            continue
        times = [panel.time_labels[panel.n_pre + k] for k in ks]
        delta = [float(result.effects.delta[k, j]) for k in ks]
        band = None
        if intervals is not None:
            lo = intervals.eq_lower if family == "eq" else intervals.sy_lower
            hi = intervals.eq_upper if family == "eq" else intervals.sy_upper
            band = [(float(lo[k, j]), float(hi[k, j])) for k in ks]
        blocks.append(_panel(unit, times, delta, band, len(units) * _PANEL_H))
        units.append(unit)
    if not units:
        raise ValueError("no treated cells to plot")

    height = len(units) * _PANEL_H
    body = "\n".join(blocks)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_PANEL_W}" '
        f'height="{height}" viewBox="0 0 {_PANEL_W} {height}">\n{body}\n</svg>\n'
    )
