"""Minimal static SVG line plots of membrane voltage."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _polyline(t: np.ndarray, v: np.ndarray, x0, y0, w, h, vmin, vmax, color) -> str:
    xs = x0 + (t - t[0]) / max(t[-1] - t[0], 1e-12) * w
    ys = y0 + h - (np.clip(v, vmin, vmax) - vmin) / (vmax - vmin) * h
    pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in zip(xs, ys))
    return f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{pts}"/>'


def voltage_svg(
    t: np.ndarray,
    traces: Sequence[np.ndarray],
    labels: Sequence[str],
    *,
    width: int = 800,
    row_height: int = 140,
    vmin: float = -90.0,
    vmax: float = 50.0,
    max_points: int = 2000,
) -> str:
    """One panel per neuron, shared time axis, fixed voltage range."""
    stride = max(1, len(t) // max_points)
    ts = np.asarray(t)[::stride]
    margin = 50
    height = row_height * len(traces) + 30
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    w = width - margin - 10
    h = row_height - 25
    for k, (v, label) in enumerate(zip(traces, labels)):
        y0 = 10 + k * row_height
        zero = y0 + h - (0.0 - vmin) / (vmax - vmin) * h
        parts.append(f'<line x1="{margin}" y1="{zero:.1f}" x2="{margin + w}" y2="{zero:.1f}" stroke="#ccc"/>')
        parts.append(_polyline(ts, np.asarray(v)[::stride], margin, y0, w, h, vmin, vmax, COLORS[k % len(COLORS)]))
        parts.append(f'<text x="4" y="{y0 + h / 2:.1f}">{label}</text>')
    parts.append(f'<text x="{margin}" y="{height - 6}">0 ms</text>')
    parts.append(f'<text x="{margin + w - 60}" y="{height - 6}">{ts[-1]:g} ms</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_voltage_svg(path: str | Path, result) -> None:
    traces = [result.v(nid) for nid in result.neuron_ids]
    Path(path).write_text(voltage_svg(result.t, traces, [f"V{nid}" for nid in result.neuron_ids]))
