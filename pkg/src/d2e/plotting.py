"""Minimal static SVG renderer for metrics curves.

Hand-rolled rather than delegating to a plotting library so that output
bytes are a pure function of the inputs (the idempotency contract covers
plots too).  Renders per-seed series as polylines plus a mean band when
several series share x-values.
"""

from __future__ import annotations

import json

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
WIDTH, HEIGHT = 720, 440
MARGIN = 56


def read_metric_series(path: str, field: str = "eval_return",
                       phases: tuple[str, ...] = ("eval", "eval_final")) -> tuple[list, list]:
    xs, ys = [], []
    with open(path) as f:
        for line in f:
            row = json.loads(line)
            if row.get("phase") in phases and field in row:
                xs.append(row["iteration"])
                ys.append(row[field])
    return xs, ys


def _scale(vals, lo, hi, out_lo, out_hi):
    vals = np.asarray(vals, dtype=np.float64)
    span = hi - lo if hi > lo else 1.0
    return out_lo + (vals - lo) / span * (out_hi - out_lo)


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def render_series_svg(series: list[dict], title: str, x_label: str, y_label: str) -> str:
    """series: [{"label": str, "x": [...], "y": [...]}], returns SVG text."""
    all_x = [v for s in series for v in s["x"]] or [0.0, 1.0]
    all_y = [v for s in series for v in s["y"]] or [0.0, 1.0]
    x_lo, x_hi = float(min(all_x)), float(max(all_x))
    y_lo, y_hi = float(min(all_y)), float(max(all_y))
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" font-size="16" '
        f'font-family="sans-serif">{title}</text>',
    ]
    # axes
    x0, x1 = MARGIN, WIDTH - MARGIN // 2
    y0, y1 = HEIGHT - MARGIN, MARGIN // 2 + 16
    parts.append(
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="#444" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="#444" stroke-width="1"/>'
    )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        yv = y_lo + frac * (y_hi - y_lo)
        xp = float(_scale([xv], x_lo, x_hi, x0, x1)[0])
        yp = float(_scale([yv], y_lo, y_hi, y0, y1)[0])
        parts.append(
            f'<text x="{_fmt(xp)}" y="{y0 + 18}" text-anchor="middle" font-size="11" '
            f'font-family="sans-serif">{_fmt(xv)}</text>'
        )
        parts.append(
            f'<text x="{x0 - 8}" y="{_fmt(yp + 4)}" text-anchor="end" font-size="11" '
            f'font-family="sans-serif">{_fmt(yv)}</text>'
        )
    parts.append(
        f'<text x="{(x0 + x1) // 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-size="13" font-family="sans-serif">{x_label}</text>'
    )
    parts.append(
        f'<text x="16" y="{(y0 + y1) // 2}" text-anchor="middle" font-size="13" '
        f'font-family="sans-serif" transform="rotate(-90 16 {(y0 + y1) // 2})">{y_label}</text>'
    )

    # mean band across series sharing x grids
    if len(series) > 1:
        common = sorted(set.intersection(*(set(s["x"]) for s in series)))
        if len(common) >= 2:
            stacked = np.array([
                [s["y"][s["x"].index(x)] for x in common] for s in series
            ])
            mean = stacked.mean(axis=0)
            sd = stacked.std(axis=0)
            xs_px = _scale(common, x_lo, x_hi, x0, x1)
            hi_px = _scale(mean + sd, y_lo, y_hi, y0, y1)
            lo_px = _scale(mean - sd, y_lo, y_hi, y0, y1)
            pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs_px, hi_px))
            pts_back = " ".join(
                f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs_px[::-1], lo_px[::-1])
            )
            parts.append(
                f'<polygon points="{pts} {pts_back}" fill="#1f77b4" opacity="0.15"/>'
            )
            mean_px = _scale(mean, y_lo, y_hi, y0, y1)
            pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs_px, mean_px))
            parts.append(
                f'<polyline points="{pts}" fill="none" stroke="#1f77b4" '
                f'stroke-width="2.5" stroke-dasharray="6,3"/>'
            )

    for k, s in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        xs_px = _scale(s["x"], x_lo, x_hi, x0, x1)
        ys_px = _scale(s["y"], y_lo, y_hi, y0, y1)
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(xs_px, ys_px))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"/>'
        )
        ly = 40 + 16 * k
        parts.append(
            f'<line x1="{x1 - 150}" y1="{ly}" x2="{x1 - 120}" y2="{ly}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{x1 - 114}" y="{ly + 4}" font-size="11" '
            f'font-family="sans-serif">{s["label"]}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
