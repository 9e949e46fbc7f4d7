"""Self-contained SVG line charts of run traces."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .io import atomic_write_text, write_trace_csv

__all__ = ["CHART_FLOOR", "PlotData", "emit_plot_data", "render_svg"]

CHART_FLOOR = 1e-16
WIDTH, HEIGHT = 640, 400
MARGIN = 60
SERIES = (("residual", "#1f77b4"), ("disagreement", "#d62728"))


@dataclass
class PlotData:
    svg_path: Path
    csv_path: Path | None
    clamped: int


def _log_values(trace, attr):
    out, clamped = [], 0
    for rec in trace:
        v = getattr(rec, attr)
        if v is None or math.isnan(v):
            out.append(None)
            continue
        v = abs(v) if attr == "residual" else v
        if v <= CHART_FLOOR:
            clamped += 1
            v = CHART_FLOOR
        out.append(math.log10(v))
    return out, clamped


def render_svg(trace, title: str = "") -> tuple[str, int]:
    """SVG text and the number of points clamped to the chart floor.

    The residual is drawn as ``|residual|`` so that small negative values
    from rounding stay on the chart.
    """
    if not trace:
        raise ValueError("cannot plot an empty trace")
    ks = [rec.k for rec in trace]
    series, clamped = {}, 0
    for name, _ in SERIES:
        series[name], c = _log_values(trace, name)
        clamped += c
    finite = [v for vals in series.values() for v in vals if v is not None]
    lo = math.floor(min(finite)) if finite else -16
    hi = math.ceil(max(finite)) if finite else 0
    if hi == lo:
        hi = lo + 1
    k_lo, k_hi = ks[0], ks[-1] if ks[-1] > ks[0] else ks[0] + 1
    plot_w, plot_h = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(k):
        return MARGIN + plot_w * (k - k_lo) / (k_hi - k_lo)

    def py(v):
        return MARGIN + plot_h * (hi - v) / (hi - lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>',
    ]
    step = max(1, (hi - lo) // 8)
    for e in range(lo, hi + 1, step):
        y = py(e)
        parts.append(f'<line x1="{MARGIN}" y1="{y:.2f}" x2="{WIDTH - MARGIN}" y2="{y:.2f}" stroke="#ddd"/>')
        parts.append(f'<text x="{MARGIN - 6}" y="{y + 4:.2f}" text-anchor="end">1e{e}</text>')
    parts.append(f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 18}">{k_lo}</text>')
    parts.append(f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 18}" text-anchor="end">{k_hi}</text>')
    parts.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle">step k</text>')
    if title:
        parts.append(f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle">{_escape(title)}</text>')
    for idx, (name, colour) in enumerate(SERIES):
        pts = [f"{px(k):.2f},{py(v):.2f}" for k, v in zip(ks, series[name]) if v is not None]
        if pts:
            parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{" ".join(pts)}"/>')
        ly = MARGIN + 16 + 16 * idx
        parts.append(f'<line x1="{WIDTH - MARGIN - 110}" y1="{ly - 4}" x2="{WIDTH - MARGIN - 90}" y2="{ly - 4}" stroke="{colour}"/>')
        parts.append(f'<text x="{WIDTH - MARGIN - 85}" y="{ly}">{name}</text>')
    if clamped:
        parts.append(f'<text x="{MARGIN + 6}" y="{HEIGHT - MARGIN - 6}">{clamped} point(s) clamped at 1e-16</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n", clamped


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit_plot_data(trace, svg_path, csv_path=None, title: str = "") -> PlotData:
    """Write the SVG chart (and optionally the trace CSV) atomically.

    Raises
    ------
    ValueError
        If ``trace`` is empty.
    """
    svg, clamped = render_svg(trace, title)
    svg_path = Path(svg_path)
    atomic_write_text(svg_path, svg)
    if csv_path is not None:
        csv_path = Path(csv_path)
        write_trace_csv(csv_path, trace)
    return PlotData(svg_path, csv_path, clamped)
