"""Static SVG rendering of a trajectory: XY tool path and per-joint positions.

Output is plain text with fixed precision so identical input gives identical bytes.
"""

from __future__ import annotations

import numpy as np

from .planner import JointTrajectory

COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")
PANEL_W, PANEL_H, PAD = 400.0, 360.0, 40.0


def _scale(values: np.ndarray, lo: float, span: float) -> tuple[float, float]:
    vmin, vmax = float(np.min(values)), float(np.max(values))
    if vmax - vmin < 1e-12:
        vmin, vmax = vmin - 0.5, vmax + 0.5
    return vmin, span / (vmax - vmin)


def _polyline(xs, ys, color: str) -> str:
    pts = " ".join(f"{x:.3f},{y:.3f}" for x, y in zip(xs, ys))
    return f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{pts}"/>'


def render_svg(traj: JointTrajectory) -> str:
    width = 2 * PANEL_W + 3 * PAD
    height = PANEL_H + 2 * PAD
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {width:.0f} {height:.0f}">',
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    x0, y0 = PAD, PAD
    out.append(f'<rect x="{x0:.0f}" y="{y0:.0f}" width="{PANEL_W:.0f}" height="{PANEL_H:.0f}" fill="none" stroke="#888"/>')
    out.append(f'<text x="{x0:.0f}" y="{y0 - 10:.0f}" font-size="12">tool path XY [mm]</text>')
    if traj.poses is not None:
        px = traj.poses[:, 0] * 1000.0
        py = traj.poses[:, 1] * 1000.0
        # equal aspect ratio for the path view
        span = max(float(np.ptp(px)), float(np.ptp(py)), 1e-9)
        k = 0.9 * min(PANEL_W, PANEL_H) / span
        cx, cy = (px.max() + px.min()) / 2, (py.max() + py.min()) / 2
        xs = x0 + PANEL_W / 2 + (px - cx) * k
        ys = y0 + PANEL_H / 2 - (py - cy) * k
        out.append(_polyline(xs, ys, "#000000"))
    x1 = 2 * PAD + PANEL_W
    out.append(f'<rect x="{x1:.0f}" y="{y0:.0f}" width="{PANEL_W:.0f}" height="{PANEL_H:.0f}" fill="none" stroke="#888"/>')
    out.append(f'<text x="{x1:.0f}" y="{y0 - 10:.0f}" font-size="12">joint positions q1..q6 [m] vs t [s]</text>')
    tmin, tk = _scale(traj.t, x1, PANEL_W)
    qmin, qk = _scale(traj.joints, y0, PANEL_H)
    for i in range(6):
        xs = x1 + (traj.t - tmin) * tk
        ys = y0 + PANEL_H - (traj.joints[:, i] - qmin) * qk
        out.append(_polyline(xs, ys, COLORS[i]))
        out.append(
            f'<text x="{x1 + PANEL_W - 30:.0f}" y="{y0 + 15 + 14 * i:.0f}" font-size="11" fill="{COLORS[i]}">q{i + 1}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
