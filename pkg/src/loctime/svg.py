"""Minimal static SVG line plots, written without any external renderer.

Only what the experiment artifacts need: one cartesian panel, several
polyline series with markers, linear or log10 axes, tick labels and a
small legend.  Output is a plain UTF-8 ``<svg>`` document.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigError

__all__ = ["Series", "line_plot"]

_PALETTE = ("#1f6fb2", "#c44e52", "#55a868", "#8172b2", "#937860")

_WIDTH = 640
_HEIGHT = 420
_MARGIN_L = 70
_MARGIN_R = 20
_MARGIN_T = 40
_MARGIN_B = 55


@dataclass(frozen=True)
class Series:
    """One plotted curve: label plus equally long x and y sequences."""

    label: str
    x: tuple[float, ...]
    y: tuple[float, ...]

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        y = tuple(float(v) for v in self.y)
        if len(x) != len(y) or not x:
            raise ConfigError("series needs matching nonempty x and y")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)


def _escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))


def _transform(values, log: bool, label: str):
    if not log:
        return [float(v) for v in values]
    out = []
    for v in values:
        if v <= 0.0:
            raise ConfigError(
                f"log axis {label} requires positive data, got {v}")
        out.append(math.log10(v))
    return out


def _ticks(lo: float, hi: float, log: bool):
    """(position, text) pairs; decade ticks on log axes."""
    if log:
        first = math.ceil(lo - 1e-9)
        last = math.floor(hi + 1e-9)
        if first > last:
            first = last = round(0.5 * (lo + hi))
        return [(float(k), f"1e{k:+03d}") for k in range(first, last + 1)]
    if hi == lo:
        return [(lo, f"{lo:g}")]
    span = hi - lo
    step = 10.0 ** math.floor(math.log10(span / 4.0))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if span / (step * mult) <= 6.0:
            step *= mult
            break
    first = math.ceil(lo / step)
    return [(k * step, f"{k * step:.6g}")
            for k in range(first, math.floor(hi / step) + 1)]


def line_plot(series: Sequence[Series], *, title: str = "",
              xlabel: str = "", ylabel: str = "",
              log_x: bool = False, log_y: bool = False) -> str:
    """Render the series into an SVG document string."""
    if not series:
        raise ConfigError("line_plot needs at least one series")
    xs = [_transform(s.x, log_x, "x") for s in series]
    ys = [_transform(s.y, log_y, "y") for s in series]
    x_lo = min(min(v) for v in xs)
    x_hi = max(max(v) for v in xs)
    y_lo = min(min(v) for v in ys)
    y_hi = max(max(v) for v in ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pad_x = 0.04 * (x_hi - x_lo)
    pad_y = 0.06 * (y_hi - y_lo)
    x_lo, x_hi = x_lo - pad_x, x_hi + pad_x
    y_lo, y_hi = y_lo - pad_y, y_hi + pad_y

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def px(v: float) -> float:
        return _MARGIN_L + plot_w * (v - x_lo) / (x_hi - x_lo)

    def py(v: float) -> float:
        return _MARGIN_T + plot_h * (y_hi - v) / (y_hi - y_lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="#444" stroke-width="1"/>',
    ]
    if title:
        parts.append(
            f'<text x="{_WIDTH / 2:.1f}" y="24" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{_escape(title)}</text>')

    bottom = _MARGIN_T + plot_h
    for pos, text in _ticks(x_lo, x_hi, log_x):
        if not (x_lo <= pos <= x_hi):
            continue
        x = px(pos)
        parts.append(f'<line x1="{x:.1f}" y1="{bottom}" x2="{x:.1f}" '
                     f'y2="{bottom + 5}" stroke="#444"/>')
        parts.append(f'<text x="{x:.1f}" y="{bottom + 19}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11">{_escape(text)}</text>')
    for pos, text in _ticks(y_lo, y_hi, log_y):
        if not (y_lo <= pos <= y_hi):
            continue
        y = py(pos)
        parts.append(f'<line x1="{_MARGIN_L - 5}" y1="{y:.1f}" '
                     f'x2="{_MARGIN_L}" y2="{y:.1f}" stroke="#444"/>')
        parts.append(f'<text x="{_MARGIN_L - 8}" y="{y + 4:.1f}" '
                     f'text-anchor="end" font-family="sans-serif" '
                     f'font-size="11">{_escape(text)}</text>')
    if xlabel:
        parts.append(f'<text x="{_MARGIN_L + plot_w / 2:.1f}" '
                     f'y="{_HEIGHT - 12}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="13">'
                     f'{_escape(xlabel)}</text>')
    if ylabel:
        cy = _MARGIN_T + plot_h / 2
        parts.append(f'<text x="16" y="{cy:.1f}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="13" '
                     f'transform="rotate(-90 16 {cy:.1f})">'
                     f'{_escape(ylabel)}</text>')

    for i, (s, tx, ty) in enumerate(zip(series, xs, ys)):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(tx, ty))
        parts.append(f'<polyline points="{pts}" fill="none" '
                     f'stroke="{color}" stroke-width="1.6"/>')
        for a, b in zip(tx, ty):
            parts.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" '
                         f'r="2.6" fill="{color}"/>')
        ly = _MARGIN_T + 16 + 16 * i
        lx = _MARGIN_L + plot_w - 150
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 28}" y="{ly}" '
                     f'font-family="sans-serif" font-size="12">'
                     f'{_escape(s.label)}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
