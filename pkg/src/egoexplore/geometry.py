"""Pinhole inverse perspective mapping onto the floor grid, plus grid sight lines.

Robot frame: ``forward`` along the heading, ``left`` 90 degrees counter-clockwise,
both measured from the robot (and camera) ground position. Cell offsets in the
robot frame are integers because poses sit on cell centres.

Local grids (the per-frame projection ``M_t``) are square arrays in egocentric
layout: the robot sits at the centre cell ``(R, R)``, forward points to
decreasing row index and left to decreasing column index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@dataclass(frozen=True)
class CameraModel:
    image_width_px: int = 257
    image_height_px: int = 257
    focal_px: float = 128.5  # 90 degree horizontal FOV at 257 px
    principal_u: float | None = None  # defaults to the image centre
    principal_v: float | None = None
    height_m: float = 1.2
    pitch_rad: float = math.radians(30.0)
    max_range_m: float = 10.0

    def __post_init__(self):
        if self.focal_px <= 0:
            raise ValueError("focal_px must be positive")
        if not 0 <= self.pitch_rad < math.pi / 2:
            raise ValueError("pitch_rad must lie in [0, pi/2)")
        if self.height_m <= 0:
            raise ValueError("height_m must be positive")
        if self.image_width_px < 1 or self.image_height_px < 1:
            raise ValueError("image must have at least one pixel")
        if self.max_range_m <= 0:
            raise ValueError("max_range_m must be positive")

    @property
    def cu(self) -> float:
        return (self.image_width_px - 1) / 2 if self.principal_u is None else self.principal_u

    @property
    def cv(self) -> float:
        return (self.image_height_px - 1) / 2 if self.principal_v is None else self.principal_v

    @property
    def shape(self) -> tuple[int, int]:
        return self.image_height_px, self.image_width_px

    @property
    def horizon_row(self) -> float:
        """Image row of rays parallel to the floor; rows ``v <= horizon_row`` never see it."""
        return self.cv - self.focal_px * math.tan(self.pitch_rad)

    def ground_points(self):
        """Per-pixel floor intersection ``(forward_m, left_m, hits_floor)`` in the robot frame.

        Pixel ``(u, v)`` has its centre at image coordinates ``(u, v)``.
        """
        v, u = np.mgrid[0:self.image_height_px, 0:self.image_width_px].astype(np.float64)
        xc = (u - self.cu) / self.focal_px
        yc = (v - self.cv) / self.focal_px
        sp, cp = math.sin(self.pitch_rad), math.cos(self.pitch_rad)
        down = sp + yc * cp  # downward component of the (unnormalised) ray
        hits = (down > 0) & (v > self.horizon_row)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(hits, self.height_m / np.where(hits, down, 1.0), np.nan)
        forward = scale * (cp - yc * sp)
        left = -scale * xc
        return forward, left, hits

    def azimuths(self) -> np.ndarray:
        """Horizontal ray direction of every pixel, radians from forward (left positive)."""
        v, u = np.mgrid[0:self.image_height_px, 0:self.image_width_px].astype(np.float64)
        xc = (u - self.cu) / self.focal_px
        yc = (v - self.cv) / self.focal_px
        sp, cp = math.sin(self.pitch_rad), math.cos(self.pitch_rad)
        return np.arctan2(-xc, cp - yc * sp)


def local_radius_cells(max_range_m: float, cell_size_m: float) -> int:
    return int(math.floor(max_range_m / cell_size_m + 0.5)) + 1


@dataclass(frozen=True, eq=False)
class LocalProjection:
    """Pose-independent pixel -> robot-frame cell lookup.

    ``mapped`` marks pixels whose floor point lies within range; for those,
    ``cell_forward`` / ``cell_left`` hold the integer cell offsets. Every
    mapped pixel contributes with unit weight.
    """

    camera: CameraModel
    cell_size_m: float
    max_range_m: float
    mapped: np.ndarray  # bool (H, W)
    cell_forward: np.ndarray  # int (H, W), 0 where unmapped
    cell_left: np.ndarray
    radius: int  # local grid half-size in cells
    pixel_index: np.ndarray  # flat indices of mapped pixels
    local_index: np.ndarray  # flat local-grid index per mapped pixel
    covered: np.ndarray  # (k, 2) unique (forward, left) offsets receiving >= 1 pixel
    pixel_cover_row: np.ndarray  # row in ``covered`` per mapped pixel

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.camera.shape

    def offset(self, u: int, v: int):
        """``(forward, left)`` cell offset for pixel ``(u, v)`` or None."""
        if not self.mapped[v, u]:
            return None
        return int(self.cell_forward[v, u]), int(self.cell_left[v, u])


def build_projection(cam: CameraModel, cell_size_m: float = 0.05, max_range_m: float | None = None) -> LocalProjection:
    return _build_projection(cam, float(cell_size_m), float(cam.max_range_m if max_range_m is None else max_range_m))


@lru_cache(maxsize=16)
def _build_projection(cam: CameraModel, cell_size_m: float, max_range_m: float) -> LocalProjection:
    fwd, left, hits = cam.ground_points()
    with np.errstate(invalid="ignore"):
        dist = np.hypot(fwd, left)
        mapped = hits & (dist <= max_range_m)
    cf = np.zeros(cam.shape, dtype=np.int64)
    cl = np.zeros(cam.shape, dtype=np.int64)
    cf[mapped] = np.floor(fwd[mapped] / cell_size_m + 0.5).astype(np.int64)
    cl[mapped] = np.floor(left[mapped] / cell_size_m + 0.5).astype(np.int64)
    R = local_radius_cells(max_range_m, cell_size_m)
    side = 2 * R + 1
    pix = np.flatnonzero(mapped)
    f, l = cf.ravel()[pix], cl.ravel()[pix]
    local = (R - f) * side + (R - l)
    uniq, inverse = np.unique(local, return_inverse=True)
    covered = np.stack([R - uniq // side, R - uniq % side], axis=1)
    for a in (mapped, cf, cl, pix, local, covered, inverse):
        a.setflags(write=False)
    return LocalProjection(cam, cell_size_m, max_range_m, mapped, cf, cl, R, pix, local, covered, inverse)


def project_values(values: np.ndarray, proj: LocalProjection) -> np.ndarray:
    """Accumulate arbitrary per-pixel values into the robot-frame local grid (no clamping)."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != proj.shape:
        raise ValueError(f"image shape {values.shape} does not match projection {proj.shape}")
    acc = np.bincount(proj.local_index, weights=values.ravel()[proj.pixel_index], minlength=proj.side * proj.side)
    return acc.reshape(proj.side, proj.side)


def project(img, proj: LocalProjection) -> np.ndarray:
    """Local grid ``M_t``: per cell, the sum of free-space confidence of pixels landing there.

    Only the free-space channel is ever projected.
    """
    conf = img.confidence if hasattr(img, "confidence") else img
    conf = np.asarray(conf)
    if conf.ndim == 3:
        conf = conf[..., 0]
    return project_values(conf, proj)


def local_to_offsets(proj_or_radius, rows, cols):
    """Local-grid indices -> robot-frame ``(forward, left)`` offsets."""
    R = proj_or_radius.radius if hasattr(proj_or_radius, "radius") else int(proj_or_radius)
    return R - np.asarray(rows), R - np.asarray(cols)


# ---------------------------------------------------------------------------
# Sight lines
# ---------------------------------------------------------------------------

def grid_traversal(a: int, b: int) -> list[tuple[int, int]]:
    """Cells whose open square the segment from cell centre (0, 0) to (a, b) passes through.

    Cells are unit squares centred on integer points. A segment that only
    touches a cell corner does not enter that cell. Returned in order from
    (0, 0) to (a, b), both included. Exact integer arithmetic.
    """
    sx = 1 if a > 0 else -1
    sy = 1 if b > 0 else -1
    na, nb = abs(a), abs(b)
    x = y = 0
    out = [(0, 0)]
    i = j = 0  # boundaries crossed along x and y
    # the i-th x boundary is crossed at t = (2i + 1) / (2 na); compare scaled by 2 na nb
    while i < na or j < nb:
        kx = (2 * i + 1) * nb if i < na else None
        ky = (2 * j + 1) * na if j < nb else None
        if ky is None or (kx is not None and kx < ky):
            x += sx
            i += 1
        elif kx is None or ky < kx:
            y += sy
            j += 1
        else:  # corner: pass diagonally
            x += sx
            y += sy
            i += 1
            j += 1
        out.append((x, y))
    return out


@dataclass(frozen=True, eq=False)
class SightLines:
    """Robot-frame traversals from the camera cell to a set of target cells.

    Row ``k`` lists the cells entered by the segment to ``targets[k]`` in
    order, excluding the camera cell and including the target as the last
    entry. Stored flat (CSR style) for vectorised occupancy queries.
    """

    targets: np.ndarray  # (k, 2) (forward, left)
    cells: np.ndarray  # (nnz, 2) (forward, left)
    indptr: np.ndarray  # (k + 1,)

    @property
    def reach(self) -> int:
        if "_reach" not in self.__dict__:
            self.__dict__["_reach"] = int(np.abs(self.cells).max()) + 1 if len(self.cells) else 1
        return self.__dict__["_reach"]

    def _flat_offsets(self, heading: int, row_stride: int) -> tuple[np.ndarray, int]:
        cache = self.__dict__.setdefault("_flat", {})
        key = (int(heading), row_stride)
        if key not in cache:
            from .world import Pose
            dx, dy = Pose(0, 0, heading).robot_to_world(self.cells[:, 0], self.cells[:, 1])
            off = (dy * row_stride + dx).astype(np.intp)
            lo = int(off.min()) if off.size else 0
            cache[key] = (off - lo, lo)
        return cache[key]

    def occupancy_along(self, pose, plan) -> np.ndarray:
        """Occupancy (uint8) of every stored cell for a robot at ``pose``; off-grid counts as Occupied."""
        pad = self.reach
        flat = plan.padded_occupancy(pad)
        stride = plan.width_cells + 2 * pad
        base = (pose.iy + pad) * stride + (pose.ix + pad)
        off, lo = self._flat_offsets(pose.heading, stride)
        return flat[base + lo:].take(off)

    def blocked(self, pose, plan) -> np.ndarray:
        """Per target: True if any cell up to and including the target is Occupied."""
        occ = self.occupancy_along(pose, plan)
        out = np.zeros(len(self.targets), dtype=bool)
        if occ.size:
            nz = np.diff(self.indptr) > 0
            out[nz] = np.logical_or.reduceat(occ.view(bool), self.indptr[:-1][nz])
        return out

    def first_hit(self, pose, plan) -> np.ndarray:
        """Per target: index into ``cells`` of the first Occupied cell along the line, -1 if none."""
        occ = self.occupancy_along(pose, plan).view(bool)
        first = np.full(len(self.targets), -1, dtype=np.int64)
        if occ.size:
            nz = np.diff(self.indptr) > 0
            pos = np.where(occ, np.arange(occ.size), occ.size)
            hit = np.minimum.reduceat(pos, self.indptr[:-1][nz])
            first[nz] = np.where(hit < occ.size, hit, -1)
        return first


def build_sight_lines(targets: np.ndarray) -> SightLines:
    targets = np.asarray(targets, dtype=np.int64).reshape(-1, 2)
    rows = []
    for a, b in targets.tolist():
        rows.append(grid_traversal(a, b)[1:])
    lengths = np.array([len(r) for r in rows], dtype=np.int64)
    indptr = np.concatenate([[0], np.cumsum(lengths)])
    cells = np.array([c for r in rows for c in r], dtype=np.int64).reshape(-1, 2)
    for a in (targets, cells, indptr):
        a.setflags(write=False)
    return SightLines(targets, cells, indptr)


@lru_cache(maxsize=16)
def _covered_sight_lines(proj: LocalProjection) -> SightLines:
    return build_sight_lines(proj.covered)


def covered_sight_lines(proj: LocalProjection) -> SightLines:
    """Sight lines to every cell that receives at least one mapped pixel (cached per projection)."""
    return _covered_sight_lines(proj)


def far_endpoints(cam: CameraModel, cell_size_m: float, max_range_m: float) -> np.ndarray:
    """Per pixel, the cell at ``max_range_m`` along its horizontal viewing direction, (H, W, 2)."""
    az = cam.azimuths()
    f = np.floor(max_range_m * np.cos(az) / cell_size_m + 0.5).astype(np.int64)
    l = np.floor(max_range_m * np.sin(az) / cell_size_m + 0.5).astype(np.int64)
    return np.stack([f, l], axis=-1)


def frame_to_world_cells(pose, forward, left):
    """Robot-frame cell offsets -> absolute world cells ``(ix, iy)``."""
    dx, dy = pose.robot_to_world(np.asarray(forward), np.asarray(left))
    return pose.ix + dx, pose.iy + dy
