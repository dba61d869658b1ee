"""Synthetic free-space camera: what a perfect floor segmenter would output, plus noise.

A pixel is free when its viewing ray meets the floor within range, on a Free
cell, and the straight line from the camera's ground position to that cell
crosses no Occupied cell. Walls and clutter are treated as full height, so
anything behind them is hidden.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .geometry import (
    CameraModel,
    LocalProjection,
    build_projection,
    build_sight_lines,
    covered_sight_lines,
    far_endpoints,
)
from .world import CellClass, Floorplan, Pose

__all__ = [
    "CameraModel",
    "SegImage",
    "SensorNoise",
    "corrupt",
    "render_free_space",
    "render_semantic",
]


@dataclass(frozen=True, eq=False)
class SegImage:
    """Per-pixel free-space confidence plus the ground truth it was derived from.

    ``confidence`` is (H, W) for a free-space image or (H, W, K) for a semantic
    image whose channel 0 is free space.
    """

    confidence: np.ndarray
    truth: np.ndarray  # bool (H, W)

    @property
    def height(self) -> int:
        return self.truth.shape[0]

    @property
    def width(self) -> int:
        return self.truth.shape[1]

    @property
    def free_confidence(self) -> np.ndarray:
        return self.confidence if self.confidence.ndim == 2 else self.confidence[..., 0]

    def to_gray(self) -> np.ndarray:
        """8-bit view of the free-space channel for debugging dumps."""
        return np.round(self.free_confidence * 255).astype(np.uint8)


@dataclass(frozen=True)
class SensorNoise:
    flip_prob: float = 0.0
    blur_radius_px: int = 0
    confidence_jitter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError("flip_prob must lie in [0, 1]")
        if self.blur_radius_px < 0 or self.confidence_jitter < 0:
            raise ValueError("blur radius and jitter must be non-negative")

    @property
    def is_identity(self) -> bool:
        return self.flip_prob == 0 and self.blur_radius_px == 0 and self.confidence_jitter == 0


def render_free_space(plan: Floorplan, pose: Pose, cam: CameraModel, proj: LocalProjection | None = None) -> SegImage:
    proj = proj or build_projection(cam, plan.cell_size_m)
    lines = covered_sight_lines(proj)
    clear = ~lines.blocked(pose, plan)
    truth = np.zeros(cam.shape, dtype=bool)
    truth.ravel()[proj.pixel_index] = clear[proj.pixel_cover_row]
    return SegImage(confidence=truth.astype(np.float64), truth=truth)


def corrupt(img: SegImage, noise: SensorNoise, rng: np.random.Generator | None = None) -> SegImage:
    """Perturb the free-space confidence; the truth channel is passed through untouched.

    Order: label flips, box blur, additive Gaussian jitter, clamp to [0, 1].
    With ``rng`` omitted the stream is seeded from ``noise.seed``.
    """
    if noise.is_identity:
        return img
    rng = np.random.default_rng(noise.seed) if rng is None else rng
    conf = img.free_confidence.astype(np.float64, copy=True)
    if noise.flip_prob > 0:
        flip = rng.random(conf.shape) < noise.flip_prob
        conf[flip] = 1.0 - conf[flip]
    if noise.blur_radius_px > 0:
        conf = ndimage.uniform_filter(conf, size=2 * noise.blur_radius_px + 1, mode="nearest")
    if noise.confidence_jitter > 0:
        conf = conf + rng.normal(0.0, noise.confidence_jitter, conf.shape)
    conf = np.clip(conf, 0.0, 1.0)
    if img.confidence.ndim == 3:
        full = img.confidence.copy()
        full[..., 0] = conf
        conf = full
    return replace(img, confidence=conf)


@lru_cache(maxsize=8)
def _far_lines(proj: LocalProjection):
    """Sight lines to the range limit for pixels whose floor point is not mapped."""
    ends = far_endpoints(proj.camera, proj.cell_size_m, proj.max_range_m)
    flat = ends.reshape(-1, 2)
    unmapped = np.flatnonzero(~proj.mapped.ravel())
    uniq, inverse = np.unique(flat[unmapped], axis=0, return_inverse=True)
    return unmapped, build_sight_lines(uniq), inverse.ravel()


def _hit_classes(lines, first, pose: Pose, plan: Floorplan) -> np.ndarray:
    """Class of the first Occupied cell per line; WALL when nothing is hit."""
    out = np.full(len(first), CellClass.WALL, dtype=np.uint8)
    hit = first >= 0
    f, l = lines.cells[first[hit], 0], lines.cells[first[hit], 1]
    dx, dy = pose.robot_to_world(f, l)
    ix, iy = pose.ix + dx, pose.iy + dy
    inside = plan.in_bounds(ix, iy)
    cls = np.full(len(ix), CellClass.WALL, dtype=np.uint8)
    cls[inside] = plan.cell_class[iy[inside], ix[inside]]
    out[hit] = cls
    return out


def semantic_labels(plan: Floorplan, pose: Pose, cam: CameraModel, proj: LocalProjection | None = None) -> np.ndarray:
    """Per-pixel CellClass: FLOOR for free pixels, else the class of the first obstacle seen."""
    proj = proj or build_projection(cam, plan.cell_size_m)
    labels = np.full(cam.image_height_px * cam.image_width_px, CellClass.WALL, dtype=np.uint8)

    near = covered_sight_lines(proj)
    first = near.first_hit(pose, plan)
    row_cls = _hit_classes(near, first, pose, plan)
    row_cls[first < 0] = CellClass.FLOOR
    labels[proj.pixel_index] = row_cls[proj.pixel_cover_row]

    unmapped, far, inverse = _far_lines(proj)
    far_first = far.first_hit(pose, plan)
    labels[unmapped] = _hit_classes(far, far_first, pose, plan)[inverse]
    return labels.reshape(cam.shape)


def render_semantic(plan: Floorplan, pose: Pose, cam: CameraModel, num_classes: int,
                    proj: LocalProjection | None = None) -> SegImage:
    """One-hot K-channel image; classes beyond K-1 fold into the last channel."""
    available = len(plan.classes_present())
    if num_classes < 2:
        raise ValueError("num_classes must be at least 2")
    if num_classes > available:
        raise ValueError(f"num_classes={num_classes} exceeds the {available} labels present in this world")
    labels = semantic_labels(plan, pose, cam, proj)
    channel = np.minimum(labels, num_classes - 1)
    conf = np.zeros(cam.shape + (num_classes,), dtype=np.float64)
    np.put_along_axis(conf, channel[..., None].astype(np.int64), 1.0, axis=-1)
    return SegImage(confidence=conf, truth=labels == CellClass.FLOOR)
