"""Egocentric accumulative (AEM) and binary (BEM) maps.

Both maps are square, robot-centred and heading-up: the robot always sits on
the centre cell facing decreasing row index, its left towards decreasing
column index. Robot motion is applied to the maps as the opposite motion of
their content. Translations are whole cells and rotations are quarter turns,
so every transform is an exact permutation of the overlapping cells; cells
shifted in from outside start empty.

Operations mutate the pair in place (one owner per episode) and return it.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import pnm
from .world import Action, Pose, step_cells

AEM_DTYPE = np.float32


@dataclass
class MapConfig:
    map_side_cells: int = 1025
    bem_threshold: float = 0.8
    stamp_value: float = 20.0
    state_side: int = 257
    coarse_stride: int = 3

    def validate(self) -> None:
        if self.map_side_cells % 2 != 1:
            raise ValueError("map_side_cells must be odd so the robot has a centre cell")
        if self.state_side % 2 != 1:
            raise ValueError("state_side must be odd")
        if self.map_side_cells < self.coarse_stride * (self.state_side - 1) + 1:
            raise ValueError("map too small for the coarse state window")


class EgoMapPair:
    def __init__(self, side: int = 1025, cell_size_m: float = 0.05):
        if side % 2 != 1:
            raise ValueError("map side must be odd")
        self.aem = np.zeros((side, side), dtype=AEM_DTYPE)
        self.bem = np.zeros((side, side), dtype=bool)
        self.cell_size_m = cell_size_m

    @property
    def side(self) -> int:
        return self.aem.shape[0]

    @property
    def center(self) -> int:
        return self.side // 2

    def copy(self) -> "EgoMapPair":
        out = EgoMapPair.__new__(EgoMapPair)
        out.aem = self.aem.copy()
        out.bem = self.bem.copy()
        out.cell_size_m = self.cell_size_m
        return out

    def __repr__(self):
        return f"EgoMapPair(side={self.side}, bem_cells={int(self.bem.sum())})"


def _shift(arr: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """``out[r, c] = arr[r - dr, c - dc]``, zero/False where the source is outside."""
    if dr == 0 and dc == 0:
        return arr
    n, m = arr.shape
    out = np.zeros_like(arr)
    if abs(dr) >= n or abs(dc) >= m:
        return out
    dst_r = slice(max(dr, 0), n + min(dr, 0))
    src_r = slice(max(-dr, 0), n + min(-dr, 0))
    dst_c = slice(max(dc, 0), m + min(dc, 0))
    src_c = slice(max(-dc, 0), m + min(-dc, 0))
    out[dst_r, dst_c] = arr[src_r, src_c]
    return out


def shift_rotate(maps: EgoMapPair, forward_cells: int, left_cells: int, quarter_turns: int) -> EgoMapPair:
    """Apply a robot motion: translate by (forward, left) cells, then turn CCW by quarter turns."""
    # content moves opposite to the robot: forward motion pushes it down the rows
    maps.aem = _shift(maps.aem, forward_cells, left_cells)
    maps.bem = _shift(maps.bem, forward_cells, left_cells)
    q = quarter_turns % 4
    if q:
        # robot turning left makes the scene turn clockwise in the heading-up view
        maps.aem = np.ascontiguousarray(np.rot90(maps.aem, k=-q))
        maps.bem = np.ascontiguousarray(np.rot90(maps.bem, k=-q))
    return maps


def action_motion(action: Action, cell_size_m: float = 0.05) -> tuple[int, int, int]:
    """``(forward_cells, left_cells, quarter_turns)`` of an action."""
    action = Action(action)
    n = step_cells(cell_size_m)
    f, l = action.robot_direction
    return f * n, l * n, action.quarter_turns


def apply_action_transform(maps: EgoMapPair, action: Action, collided: bool) -> EgoMapPair:
    if collided:
        return maps
    return shift_rotate(maps, *action_motion(action, maps.cell_size_m))


def _window(maps: EgoMapPair, radius: int):
    """Overlap of a centred (2 radius + 1)^2 local grid with the map: (map slices, local slices)."""
    c, n = maps.center, maps.side
    lo, hi = c - radius, c + radius + 1
    m0, m1 = max(lo, 0), min(hi, n)
    return (slice(m0, m1), slice(m0, m1)), (slice(m0 - lo, m1 - lo), slice(m0 - lo, m1 - lo))


def integrate(maps: EgoMapPair, m_t: np.ndarray, threshold: float = 0.8) -> EgoMapPair:
    """``A += M_t`` and ``B |= (M_t > threshold)`` over the robot-centred window."""
    m_t = np.asarray(m_t)
    if m_t.ndim != 2 or m_t.shape[0] != m_t.shape[1] or m_t.shape[0] % 2 != 1:
        raise ValueError(f"local grid must be square with odd side, got {m_t.shape}")
    (mr, mc), (lr, lc) = _window(maps, m_t.shape[0] // 2)
    local = m_t[lr, lc]
    maps.aem[mr, mc] += local.astype(AEM_DTYPE)
    maps.bem[mr, mc] |= local > threshold
    return maps


def _ego_indices(maps: EgoMapPair, offsets) -> tuple[np.ndarray, np.ndarray]:
    off = np.asarray(offsets, dtype=np.int64).reshape(-1, 2)
    rows = maps.center - off[:, 0]
    cols = maps.center - off[:, 1]
    keep = (rows >= 0) & (rows < maps.side) & (cols >= 0) & (cols < maps.side)
    return rows[keep], cols[keep]


def stamp_trajectory(maps: EgoMapPair, robot_footprint, value: float = 20.0) -> EgoMapPair:
    """Mark the cells under the robot (robot-frame ``(forward, left)`` offsets) as visited and free."""
    r, c = _ego_indices(maps, robot_footprint)
    np.add.at(maps.aem, (r, c), AEM_DTYPE(value))
    maps.bem[r, c] = True
    return maps


def stamp_collision(maps: EgoMapPair, attempted_footprint, value: float = 20.0) -> EgoMapPair:
    """Penalise cells the robot failed to reach; the BEM is left untouched."""
    r, c = _ego_indices(maps, attempted_footprint)
    np.add.at(maps.aem, (r, c), -AEM_DTYPE(value))
    return maps


def extract_state(maps: EgoMapPair, side: int = 257, stride: int = 3) -> np.ndarray:
    """(side, side, 2) crop of the AEM: fine window at stride 1 and coarse window at ``stride``."""
    half = side // 2
    c = maps.center
    if c - stride * half < 0 or c + stride * half >= maps.side:
        raise ValueError(f"map side {maps.side} too small for a {side} window at stride {stride}")
    fine = maps.aem[c - half:c + half + 1, c - half:c + half + 1]
    coarse = maps.aem[c - stride * half:c + stride * half + 1:stride, c - stride * half:c + stride * half + 1:stride]
    return np.stack([fine, coarse], axis=-1)


def _world_axes(ego: np.ndarray, heading: int) -> np.ndarray:
    """View of ``ego`` indexed ``[c + dy, c + dx]`` by world offsets from the robot."""
    if heading == 0:  # east: forward = +x, left = +y
        return ego[::-1, ::-1].T
    if heading == 1:
        return ego[::-1, :]
    if heading == 2:
        return ego.T
    return ego[:, ::-1]


def world_anchored(ego: np.ndarray, pose: Pose, shape: tuple[int, int], fill=0) -> np.ndarray:
    """Re-register an egocentric array into a world grid of ``shape`` for a robot at ``pose``."""
    H, W = shape
    side = ego.shape[0]
    c = side // 2
    a = _world_axes(ego, int(pose.heading))
    out = np.full(shape, fill, dtype=ego.dtype)
    r0, c0 = c - pose.iy, c - pose.ix  # ego-view index of world cell (0, 0)
    ys, ye = max(0, -r0), min(H, side - r0)
    xs, xe = max(0, -c0), min(W, side - c0)
    if ys < ye and xs < xe:
        out[ys:ye, xs:xe] = a[r0 + ys:r0 + ye, c0 + xs:c0 + xe]
    return out


def world_anchored_map(maps: EgoMapPair, true_pose: Pose, shape: tuple[int, int]) -> np.ndarray:
    """The BEM placed in the world frame assuming the robot sits at ``true_pose``."""
    return world_anchored(maps.bem, true_pose, shape, fill=False)


def export_maps(maps: EgoMapPair, stem) -> dict:
    """Write BEM and linearly scaled AEM graymaps plus a key = value sidecar with the AEM range."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    pnm.write_pgm(stem.with_name(stem.name + "_bem.pgm"), maps.bem.astype(np.uint8) * 255)
    lo, hi = float(maps.aem.min()), float(maps.aem.max())
    span = hi - lo if hi > lo else 1.0
    pnm.write_pgm(stem.with_name(stem.name + "_aem.pgm"), np.round((maps.aem - lo) / span * 255))
    meta = {"aem_min": lo, "aem_max": hi, "side": maps.side, "cell_size_m": maps.cell_size_m}
    stem.with_name(stem.name + "_aem.cfg").write_text("".join(f"{k} = {v!r}\n" for k, v in meta.items()))
    return meta
