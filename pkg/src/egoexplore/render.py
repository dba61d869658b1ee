"""Post-hoc images: explored map with trajectory glyphs, and reward curves."""

from __future__ import annotations

import numpy as np

from .world import HEADING_VECTORS, Floorplan, Pose

COLORS = {
    "occupied": (40, 40, 40),
    "unknown": (150, 150, 150),
    "explored": (255, 255, 255),
    "false_free": (90, 120, 220),
    "trajectory": (220, 30, 30),
    "start": (30, 170, 40),
}


def _triangle_mask(size: int, heading: int) -> np.ndarray:
    """Filled isosceles triangle in a (size, size) box pointing along a heading, image rows = -y."""
    c = (size - 1) / 2
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    # local coordinates: u along the heading, v across, y up
    dx, dy = HEADING_VECTORS[heading]
    px, py = xx - c, c - yy
    u = px * dx + py * dy
    v = -px * dy + py * dx
    half = size / 2
    # apex at u = +half, base at u = -half spanning |v| <= half * 0.8
    t = (u + half) / (2 * half)
    return (t >= 0) & (t <= 1) & (np.abs(v) <= (1 - t) * half * 0.8 + 0.25)


def trajectory_image(plan: Floorplan, world_map: np.ndarray | None, poses: list[Pose], scale: int = 2,
                     glyph_cells: int = 5) -> tuple[np.ndarray, int]:
    """RGB image (north up) and the number of pose glyphs drawn; the first pose is the start."""
    H, W = plan.occupancy.shape
    img = np.empty((H, W, 3), dtype=np.uint8)
    img[:] = COLORS["unknown"]
    img[plan.occupancy] = COLORS["occupied"]
    if world_map is not None:
        img[world_map & plan.free] = COLORS["explored"]
        img[world_map & plan.occupancy] = COLORS["false_free"]
    img = img[::-1].repeat(scale, axis=0).repeat(scale, axis=1)
    size = max(3, glyph_cells * scale)
    drawn = 0
    # start drawn last so it stays visible
    order = list(range(1, len(poses))) + ([0] if poses else [])
    for i in order:
        p = poses[i]
        mask = _triangle_mask(size, int(p.heading))
        r0 = (H - 1 - p.iy) * scale + scale // 2 - size // 2
        c0 = p.ix * scale + scale // 2 - size // 2
        rs, cs = max(r0, 0), max(c0, 0)
        re, ce = min(r0 + size, img.shape[0]), min(c0 + size, img.shape[1])
        if rs >= re or cs >= ce:
            continue
        sub = mask[rs - r0:re - r0, cs - c0:ce - c0]
        img[rs:re, cs:ce][sub] = COLORS["start" if i == 0 else "trajectory"]
        drawn += 1
    return img, drawn


def _line(img: np.ndarray, r0, c0, r1, c1, color) -> None:
    n = int(max(abs(r1 - r0), abs(c1 - c0))) + 1
    rr = np.rint(np.linspace(r0, r1, n)).astype(int)
    cc = np.rint(np.linspace(c0, c1, n)).astype(int)
    ok = (rr >= 0) & (rr < img.shape[0]) & (cc >= 0) & (cc < img.shape[1])
    img[rr[ok], cc[ok]] = color


def curve_image(raw, smoothed, width: int = 640, height: int = 360, margin: int = 24) -> np.ndarray:
    """Raw series in light red, smoothed series in dark red, on a white canvas with axes."""
    raw = np.asarray(raw, dtype=np.float64)
    smoothed = np.asarray(smoothed, dtype=np.float64)
    img = np.full((height, width, 3), 255, dtype=np.uint8)
    x0, x1, y0, y1 = margin, width - margin, height - margin, margin
    _line(img, y0, x0, y0, x1, (0, 0, 0))
    _line(img, y0, x0, y1, x0, (0, 0, 0))
    if len(raw) == 0:
        return img
    lo = float(min(raw.min(), smoothed.min()))
    hi = float(max(raw.max(), smoothed.max()))
    span = hi - lo if hi > lo else 1.0
    mid = 0.5 if hi == lo else None

    def to_px(i, v):
        fx = i / max(len(raw) - 1, 1)
        fy = mid if mid is not None else (v - lo) / span
        return y0 - fy * (y0 - y1), x0 + fx * (x1 - x0)

    for series, color in ((raw, (245, 170, 170)), (smoothed, (170, 20, 20))):
        pts = [to_px(i, v) for i, v in enumerate(series)]
        if len(pts) == 1:
            _line(img, pts[0][0], pts[0][1], pts[0][0], pts[0][1], color)
        for (ra, ca), (rb, cb) in zip(pts, pts[1:]):
            _line(img, ra, ca, rb, cb, color)
    return img
