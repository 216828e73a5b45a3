"""Minimal SVG charts (polylines and markers) rendered from a jinja2 template."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from jinja2 import Environment, PackageLoader, select_autoescape

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"]
WIDTH, HEIGHT = 640, 420
MARGIN = {"left": 64, "right": 20, "top": 36, "bottom": 48}

_env = Environment(
    loader=PackageLoader("omtube", "templates"),
    autoescape=select_autoescape(["svg", "xml", "j2"]),
    trim_blocks=True,
    lstrip_blocks=True,
)


@dataclass
class Series:
    label: str
    xs: Sequence[float]
    ys: Sequence[float]
    kind: str = "line"  # line | points | squares


def _bounds(values: np.ndarray) -> tuple[float, float]:
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    step = (hi - lo) / (n - 1)
    digits = max(0, -int(math.floor(math.log10(step))) + 1)
    return [round(lo + k * step, digits) for k in range(n)]


def render_chart(
    title: str, series: Sequence[Series], x_label: str, y_label: str
) -> str:
    cleaned = []
    for s in series:
        xs = np.asarray(s.xs, dtype=float)
        ys = np.asarray(s.ys, dtype=float)
        keep = np.isfinite(xs) & np.isfinite(ys)
        cleaned.append((s, xs[keep], ys[keep]))
    all_x = np.concatenate([c[1] for c in cleaned] or [np.zeros(1)])
    all_y = np.concatenate([c[2] for c in cleaned] or [np.zeros(1)])
    if all_x.size == 0:
        all_x, all_y = np.zeros(1), np.zeros(1)
    x_lo, x_hi = _bounds(all_x)
    y_lo, y_hi = _bounds(all_y)
    plot_w = WIDTH - MARGIN["left"] - MARGIN["right"]
    plot_h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x: Any) -> Any:
        return MARGIN["left"] + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: Any) -> Any:
        return MARGIN["top"] + (y_hi - y) / (y_hi - y_lo) * plot_h

    drawn = []
    for k, (s, xs, ys) in enumerate(cleaned):
        points = [(round(float(a), 2), round(float(b), 2)) for a, b in zip(px(xs), py(ys))]
        drawn.append(
            {
                "label": s.label,
                "kind": s.kind,
                "color": PALETTE[k % len(PALETTE)],
                "points": points,
                "polyline": " ".join(f"{a},{b}" for a, b in points),
            }
        )
    return _env.get_template("chart.svg.j2").render(
        title=title,
        width=WIDTH,
        height=HEIGHT,
        margin=MARGIN,
        plot_w=plot_w,
        plot_h=plot_h,
        x_label=x_label,
        y_label=y_label,
        x_ticks=[(round(float(px(t)), 2), t) for t in _ticks(x_lo, x_hi)],
        y_ticks=[(round(float(py(t)), 2), t) for t in _ticks(y_lo, y_hi)],
        series=drawn,
    )


def write_chart(
    path: Path, title: str, series: Sequence[Series], x_label: str, y_label: str
) -> Path:
    path.write_text(render_chart(title, series, x_label, y_label))
    return path
