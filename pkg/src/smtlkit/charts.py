"""Tiny hand-rolled SVG line charts for experiment reports.

The simulation summaries are a handful of short series (one point per grid
size, one line per policy), which a few dozen SVG elements cover fine, so
the experiment front end stays free of plotting dependencies.  Output is a
complete standalone document, deterministic for identical input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

_PALETTE = ("#c0392b", "#2867a0", "#2e8b57", "#8e44ad", "#b8860b", "#16767d")


@dataclass(frozen=True)
class ChartSeries:
    """One polyline: a label and its (x, y) points in data coordinates.

    Points accept anything float() does (ints, Fractions, floats).
    """

    label: str
    points: tuple[tuple[float, float], ...]
    color: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "points", tuple((float(x), float(y)) for x, y in self.points)
        )
        if not self.points:
            raise ValueError(f"series {self.label!r} has no points")


@dataclass(frozen=True)
class _Layout:
    width: int
    height: int
    left: int = 62
    right: int = 16
    top: int = 34
    bottom: int = 46

    @property
    def plot_width(self) -> float:
        return self.width - self.left - self.right

    @property
    def plot_height(self) -> float:
        return self.height - self.top - self.bottom


def _num(value: float) -> str:
    text = f"{value:.6g}"
    return "0" if text == "-0" else text


def _span(values: list[float]) -> tuple[float, float]:
    lo, hi = min(values), max(values)
    if lo == hi:
        pad = max(abs(lo) * 0.1, 0.5)
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.05
    return lo - pad, hi + pad


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    step = (hi - lo) / (count - 1)
    return [lo + step * i for i in range(count)]


def line_chart(
    series: Sequence[ChartSeries],
    title: str,
    x_label: str,
    y_label: str,
    width: int = 640,
    height: int = 420,
) -> str:
    """Render series as an SVG line chart with axes, ticks, and a legend.

    X ticks sit at the union of the data's x positions (the charts here plot
    against a few discrete grid sizes); y ticks are five evenly spaced
    values over the padded data range.
    """
    if not series:
        raise ValueError("a chart needs at least one series")
    layout = _Layout(width, height)
    xs = sorted({x for s in series for x, _ in s.points})
    ys = [y for s in series for _, y in s.points]
    x_lo, x_hi = _span(xs)
    y_lo, y_hi = _span(ys)

    def px(x: float) -> float:
        return layout.left + (x - x_lo) / (x_hi - x_lo) * layout.plot_width

    def py(y: float) -> float:
        return layout.top + (y_hi - y) / (y_hi - y_lo) * layout.plot_height

    parts: list[str] = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">'
    )
    parts.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    parts.append(
        f'<text x="{width / 2:g}" y="20" text-anchor="middle" font-size="15">'
        f"{escape(title)}</text>"
    )

    bottom_y = layout.top + layout.plot_height
    right_x = layout.left + layout.plot_width
    axis = 'stroke="#333" stroke-width="1"'
    parts.append(f'<line x1="{layout.left}" y1="{layout.top}" x2="{layout.left}" y2="{bottom_y:g}" {axis}/>')
    parts.append(f'<line x1="{layout.left}" y1="{bottom_y:g}" x2="{right_x:g}" y2="{bottom_y:g}" {axis}/>')

    for x in xs:
        parts.append(
            f'<line x1="{px(x):g}" y1="{bottom_y:g}" x2="{px(x):g}" y2="{bottom_y + 4:g}" {axis}/>'
        )
        parts.append(
            f'<text x="{px(x):g}" y="{bottom_y + 18:g}" text-anchor="middle">{_num(x)}</text>'
        )
    for y in _ticks(y_lo, y_hi):
        parts.append(
            f'<line x1="{layout.left - 4}" y1="{py(y):g}" x2="{layout.left}" y2="{py(y):g}" {axis}/>'
        )
        parts.append(
            f'<line x1="{layout.left}" y1="{py(y):g}" x2="{right_x:g}" y2="{py(y):g}" '
            'stroke="#ddd" stroke-width="0.5"/>'
        )
        parts.append(
            f'<text x="{layout.left - 8}" y="{py(y) + 4:g}" text-anchor="end">{_num(y)}</text>'
        )

    parts.append(
        f'<text x="{layout.left + layout.plot_width / 2:g}" y="{height - 8}" '
        f'text-anchor="middle">{escape(x_label)}</text>'
    )
    parts.append(
        f'<text x="16" y="{layout.top + layout.plot_height / 2:g}" text-anchor="middle" '
        f'transform="rotate(-90 16 {layout.top + layout.plot_height / 2:g})">'
        f"{escape(y_label)}</text>"
    )

    for idx, s in enumerate(series):
        color = s.color or _PALETTE[idx % len(_PALETTE)]
        coords = " ".join(f"{px(x):g},{py(y):g}" for x, y in s.points)
        parts.append(
            f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        for x, y in s.points:
            parts.append(f'<circle cx="{px(x):g}" cy="{py(y):g}" r="3" fill="{color}"/>')

    legend_x = right_x - 120
    legend_y = layout.top + 8
    for idx, s in enumerate(series):
        color = s.color or _PALETTE[idx % len(_PALETTE)]
        y = legend_y + idx * 18
        parts.append(
            f'<line x1="{legend_x}" y1="{y:g}" x2="{legend_x + 22}" y2="{y:g}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(f'<text x="{legend_x + 28}" y="{y + 4:g}">{escape(s.label)}</text>')

    parts.append("</svg>")
    return "\n".join(parts)
