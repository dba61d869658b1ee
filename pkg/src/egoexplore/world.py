"""Indoor worlds: occupancy floorplans, procedural generation, pose graph, motion.

Coordinate conventions
----------------------
Grids are indexed ``[iy, ix]``. Cell ``(ix, iy)`` is centred at
``(ix * cell_size, iy * cell_size)`` metres, ``x`` grows east and ``y`` grows
north. Poses therefore live on cell centres and every pose coordinate is an
integer multiple of the cell size.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterator

import numpy as np
from scipy import ndimage

from . import pnm


class Heading(IntEnum):
    EAST = 0
    NORTH = 1
    WEST = 2
    SOUTH = 3

    @property
    def vector(self) -> tuple[int, int]:
        return HEADING_VECTORS[self]

    def rotated(self, quarter_turns: int) -> "Heading":
        return Heading((self + quarter_turns) % 4)


HEADING_VECTORS = ((1, 0), (0, 1), (-1, 0), (0, -1))


class Action(IntEnum):
    FORWARD = 0
    BACKWARD = 1
    STRAFE_LEFT = 2
    STRAFE_RIGHT = 3
    TURN_LEFT = 4
    TURN_RIGHT = 5

    @property
    def is_turn(self) -> bool:
        return self >= Action.TURN_LEFT

    @property
    def quarter_turns(self) -> int:
        """Heading change in quarter turns (counter-clockwise positive)."""
        return {Action.TURN_LEFT: 1, Action.TURN_RIGHT: -1}.get(self, 0)

    @property
    def robot_direction(self) -> tuple[int, int]:
        """Unit translation in the robot frame as ``(forward, left)``."""
        return _ROBOT_DIRECTIONS[self]

    @property
    def inverse(self) -> "Action":
        return _INVERSE_ACTIONS[self]


_ROBOT_DIRECTIONS = {
    Action.FORWARD: (1, 0),
    Action.BACKWARD: (-1, 0),
    Action.STRAFE_LEFT: (0, 1),
    Action.STRAFE_RIGHT: (0, -1),
    Action.TURN_LEFT: (0, 0),
    Action.TURN_RIGHT: (0, 0),
}
_INVERSE_ACTIONS = {
    Action.FORWARD: Action.BACKWARD,
    Action.BACKWARD: Action.FORWARD,
    Action.STRAFE_LEFT: Action.STRAFE_RIGHT,
    Action.STRAFE_RIGHT: Action.STRAFE_LEFT,
    Action.TURN_LEFT: Action.TURN_RIGHT,
    Action.TURN_RIGHT: Action.TURN_LEFT,
}

NUM_ACTIONS = len(Action)
TRANSLATION_M = 0.40


@dataclass(frozen=True, order=True)
class Pose:
    """Grid pose: cell indices plus one of four cardinal headings."""

    ix: int
    iy: int
    heading: Heading = Heading.EAST

    def __post_init__(self):
        object.__setattr__(self, "ix", int(self.ix))
        object.__setattr__(self, "iy", int(self.iy))
        object.__setattr__(self, "heading", Heading(int(self.heading) % 4))

    def meters(self, cell_size_m: float) -> tuple[float, float]:
        return self.ix * cell_size_m, self.iy * cell_size_m

    def robot_to_world(self, forward, left):
        """Rotate robot-frame offsets ``(forward, left)`` into world-axis offsets ``(dx, dy)``."""
        fx, fy = HEADING_VECTORS[self.heading]
        lx, ly = HEADING_VECTORS[(self.heading + 1) % 4]
        return forward * fx + left * lx, forward * fy + left * ly

    def world_to_robot(self, dx, dy):
        fx, fy = HEADING_VECTORS[self.heading]
        lx, ly = HEADING_VECTORS[(self.heading + 1) % 4]
        return dx * fx + dy * fy, dx * lx + dy * ly


class CellClass(IntEnum):
    FLOOR = 0
    WALL = 1
    CLUTTER = 2
    DOOR = 3


class Region(IntEnum):
    NONE = 0
    ROOM = 1
    CORRIDOR = 2


@dataclass(frozen=True, eq=False)
class Floorplan:
    occupancy: np.ndarray  # bool [iy, ix], True = Occupied
    region: np.ndarray  # uint8 Region codes
    cell_class: np.ndarray  # uint8 CellClass codes
    cell_size_m: float = 0.05
    seed: int | None = None

    def __post_init__(self):
        for name in ("occupancy", "region", "cell_class"):
            arr = getattr(self, name)
            if arr.shape != self.occupancy.shape:
                raise ValueError(f"{name} shape {arr.shape} != occupancy shape {self.occupancy.shape}")
            arr.setflags(write=False)

    @property
    def height_cells(self) -> int:
        return self.occupancy.shape[0]

    @property
    def width_cells(self) -> int:
        return self.occupancy.shape[1]

    @property
    def free(self) -> np.ndarray:
        return ~self.occupancy

    def in_bounds(self, ix, iy):
        return (ix >= 0) & (ix < self.width_cells) & (iy >= 0) & (iy < self.height_cells)

    def occupied_at(self, ix, iy) -> np.ndarray:
        """Occupancy lookup that treats everything outside the grid as Occupied."""
        ix = np.asarray(ix)
        iy = np.asarray(iy)
        inside = self.in_bounds(ix, iy)
        out = np.ones(np.broadcast(ix, iy).shape, dtype=bool)
        out[inside] = self.occupancy[iy[inside], ix[inside]]
        return out

    def padded_occupancy(self, pad: int) -> np.ndarray:
        """Flattened uint8 occupancy with ``pad`` Occupied cells added on every side (cached)."""
        cache = self.__dict__.setdefault("_padded", {})
        if pad not in cache:
            g = np.ones((self.height_cells + 2 * pad, self.width_cells + 2 * pad), dtype=np.uint8)
            g[pad:pad + self.height_cells, pad:pad + self.width_cells] = self.occupancy
            cache[pad] = g.ravel()
        return cache[pad]

    def classes_present(self) -> set[CellClass]:
        return {CellClass(c) for c in np.unique(self.cell_class)}


# ---------------------------------------------------------------------------
# Robot footprint
# ---------------------------------------------------------------------------

def footprint_offsets(radius_m: float, cell_size_m: float) -> np.ndarray:
    """Cell offsets (k, 2) as ``(dx, dy)`` whose square intersects the robot disc.

    A cell merely tangent to the disc is not part of the footprint.
    """
    r = radius_m / cell_size_m
    n = int(math.ceil(r + 0.5))
    d = np.arange(-n, n + 1)
    dx, dy = np.meshgrid(d, d, indexing="xy")
    gx = np.maximum(np.abs(dx) - 0.5, 0.0)
    gy = np.maximum(np.abs(dy) - 0.5, 0.0)
    keep = gx * gx + gy * gy < r * r
    return np.stack([dx[keep], dy[keep]], axis=1)


def footprint_cells(pose: Pose, radius_m: float, cell_size_m: float) -> np.ndarray:
    off = footprint_offsets(radius_m, cell_size_m)
    return off + np.array([pose.ix, pose.iy])


def step_cells(cell_size_m: float) -> int:
    n = TRANSLATION_M / cell_size_m
    if abs(n - round(n)) > 1e-9:
        raise ValueError(f"translation {TRANSLATION_M} m is not a whole number of {cell_size_m} m cells")
    return int(round(n))


# ---------------------------------------------------------------------------
# Procedural generation
# ---------------------------------------------------------------------------

@dataclass
class WorldGenParams:
    width_m: float = 16.0
    height_m: float = 12.0
    cell_size_m: float = 0.05
    wall_thickness_m: float = 0.2
    corridor_width_m: float = 1.6
    corridor_span_min: float = 0.75  # fraction of the interior width the corridor spans
    door_width_m: float = 1.0
    min_rooms: int = 2
    max_rooms: int = 6
    min_room_width_m: float = 2.6
    min_room_depth_m: float = 2.6
    max_room_depth_m: float = 5.0
    clutter_density: float = 0.08
    clutter_min_m: float = 0.3
    clutter_max_m: float = 1.0
    interior_door_prob: float = 0.5
    closed_door_prob: float = 0.3
    robot_radius_m: float = 0.15

    def cells(self, meters: float) -> int:
        return max(1, int(round(meters / self.cell_size_m)))

    def validate(self) -> None:
        diameter = 2 * self.robot_radius_m
        if self.corridor_width_m < diameter:
            raise ValueError(
                f"corridor_width_m={self.corridor_width_m} is narrower than the robot diameter {diameter}")
        if self.door_width_m < 3 * diameter:
            raise ValueError(
                f"door_width_m={self.door_width_m} must be at least 3x the robot diameter ({3 * diameter})")
        if not 0.0 <= self.clutter_density < 1.0:
            raise ValueError("clutter_density must lie in [0, 1)")
        if self.min_rooms < 2 or self.max_rooms < self.min_rooms:
            raise ValueError("need 2 <= min_rooms <= max_rooms")
        if self.min_room_depth_m > self.max_room_depth_m:
            raise ValueError("min_room_depth_m exceeds max_room_depth_m")
        if self.clutter_min_m > self.clutter_max_m:
            raise ValueError("clutter_min_m exceeds clutter_max_m")
        if not (0 <= self.interior_door_prob <= 1 and 0 <= self.closed_door_prob <= 1):
            raise ValueError("door probabilities must lie in [0, 1]")
        if self.min_room_width_m < self.door_width_m + 2 * self.wall_thickness_m:
            raise ValueError("min_room_width_m too small to hold a doorway")
        step_cells(self.cell_size_m)


@dataclass
class _Room:
    x0: int
    x1: int  # exclusive
    y0: int
    y1: int  # exclusive
    door_x0: int = 0
    door_side: int = 1  # +1: room above corridor, -1: below
    keepout: list = field(default_factory=list)


def _split_widths(rng, total: int, n: int, min_w: int, wall: int) -> list[int] | None:
    """Random widths of n rooms separated by walls filling ``total`` cells."""
    free = total - (n - 1) * wall - n * min_w
    if free < 0:
        return None
    cuts = np.sort(rng.integers(0, free + 1, size=n - 1))
    parts = np.diff(np.concatenate([[0], cuts, [free]]))
    return [int(min_w + p) for p in parts]


def generate_floorplan(seed: int, params: WorldGenParams | None = None) -> Floorplan:
    """Rooms-and-corridor floorplan, deterministic in ``(seed, params)``."""
    p = params or WorldGenParams()
    p.validate()
    rng = np.random.default_rng(seed)
    W, H = p.cells(p.width_m), p.cells(p.height_m)
    t = p.cells(p.wall_thickness_m)
    cw = p.cells(p.corridor_width_m)
    dw = p.cells(p.door_width_m)
    min_w = p.cells(p.min_room_width_m)
    dmin, dmax = p.cells(p.min_room_depth_m), p.cells(p.max_room_depth_m)

    occ = np.ones((H, W), dtype=bool)
    cls = np.full((H, W), CellClass.WALL, dtype=np.uint8)
    region = np.zeros((H, W), dtype=np.uint8)

    slack = H - 2 * t - cw
    if slack < dmin + t:
        raise ValueError("world too small for a corridor with rooms")
    if slack >= 2 * (dmin + t):
        # rooms fit on both sides of the corridor
        cy0 = int(rng.integers(2 * t + dmin, H - 2 * t - dmin - cw + 1))
    else:
        cy0 = t
    cy1 = cy0 + cw

    interior_w = W - 2 * t
    span = int(round(interior_w * rng.uniform(p.corridor_span_min, 1.0)))
    span = max(span, min(interior_w, 2 * min_w + t))
    cx0 = t + int(rng.integers(0, interior_w - span + 1))
    cx1 = cx0 + span

    occ[cy0:cy1, cx0:cx1] = False
    cls[cy0:cy1, cx0:cx1] = CellClass.FLOOR
    region[cy0:cy1, cx0:cx1] = Region.CORRIDOR

    strips = []
    space_above = (H - t) - (cy1 + t)
    space_below = (cy0 - t) - t
    if space_above >= dmin:
        strips.append(+1)
    if space_below >= dmin:
        strips.append(-1)
    if not strips:
        raise ValueError("no space for rooms beside the corridor")

    max_per_strip = max(1, (span + t) // (min_w + t))
    capacity = max_per_strip * len(strips)
    if capacity < p.min_rooms:
        raise ValueError(f"world fits at most {capacity} rooms, fewer than min_rooms={p.min_rooms}")
    n_rooms = int(rng.integers(p.min_rooms, min(p.max_rooms, capacity) + 1))
    counts = {s: 0 for s in strips}
    order = list(strips)
    for i in range(n_rooms):
        # fill strips evenly, respecting capacity
        s = order[i % len(order)]
        if counts[s] >= max_per_strip:
            s = next(o for o in order if counts[o] < max_per_strip)
        counts[s] += 1

    rooms: list[_Room] = []
    for side in strips:
        n = counts[side]
        if n == 0:
            continue
        widths = _split_widths(rng, span, n, min_w, t)
        avail = space_above if side > 0 else space_below
        x = cx0
        strip_rooms = []
        for w in widths:
            depth = int(rng.integers(dmin, min(dmax, avail) + 1))
            if side > 0:
                y0, y1 = cy1 + t, cy1 + t + depth
            else:
                y0, y1 = cy0 - t - depth, cy0 - t
            room = _Room(x, x + w, y0, y1, door_side=side)
            occ[y0:y1, x:x + w] = False
            cls[y0:y1, x:x + w] = CellClass.FLOOR
            region[y0:y1, x:x + w] = Region.ROOM
            # doorway through the corridor wall
            dx0 = int(rng.integers(x + t, x + w - t - dw + 1))
            room.door_x0 = dx0
            wy0, wy1 = (cy1, cy1 + t) if side > 0 else (cy0 - t, cy0)
            occ[wy0:wy1, dx0:dx0 + dw] = False
            cls[wy0:wy1, dx0:dx0 + dw] = CellClass.FLOOR
            region[wy0:wy1, dx0:dx0 + dw] = Region.ROOM
            approach = p.cells(1.2)
            if side > 0:
                room.keepout.append((dx0 - t, dx0 + dw + t, y0, y0 + approach))
            else:
                room.keepout.append((dx0 - t, dx0 + dw + t, y1 - approach, y1))
            strip_rooms.append(room)
            x += w + t
        # interior doorways between neighbouring rooms of a strip
        for a, b in zip(strip_rooms, strip_rooms[1:]):
            if rng.random() >= p.interior_door_prob:
                continue
            oy0, oy1 = max(a.y0, b.y0), min(a.y1, b.y1)
            if oy1 - oy0 < dw + 2 * t:
                continue
            dy0 = int(rng.integers(oy0 + t, oy1 - t - dw + 1))
            wx0, wx1 = a.x1, b.x0
            if rng.random() < p.closed_door_prob:
                cls[dy0:dy0 + dw, wx0:wx1] = CellClass.DOOR
                continue
            occ[dy0:dy0 + dw, wx0:wx1] = False
            cls[dy0:dy0 + dw, wx0:wx1] = CellClass.FLOOR
            region[dy0:dy0 + dw, wx0:wx1] = Region.ROOM
            depth = p.cells(0.8)
            a.keepout.append((a.x1 - depth, a.x1, dy0 - t, dy0 + dw + t))
            b.keepout.append((b.x0, b.x0 + depth, dy0 - t, dy0 + dw + t))
        rooms.extend(strip_rooms)

    if p.clutter_density > 0:
        for room in rooms:
            _place_clutter(rng, p, room, occ, cls)

    _remove_isolated(occ)
    cls[occ & (cls == CellClass.FLOOR)] = CellClass.CLUTTER
    cls[~occ] = CellClass.FLOOR
    region[occ] = Region.NONE
    # boundary always occupied
    occ[0, :] = occ[-1, :] = True
    occ[:, 0] = occ[:, -1] = True
    return Floorplan(occupancy=occ, region=region, cell_class=cls, cell_size_m=p.cell_size_m, seed=seed)


def _place_clutter(rng, p: WorldGenParams, room: _Room, occ, cls) -> None:
    area = (room.x1 - room.x0) * (room.y1 - room.y0)
    target = p.clutter_density * area
    smin, smax = p.cells(p.clutter_min_m), p.cells(p.clutter_max_m)
    placed = 0
    keep = np.zeros_like(occ)
    for kx0, kx1, ky0, ky1 in room.keepout:
        keep[max(ky0, 0):max(ky1, 0), max(kx0, 0):max(kx1, 0)] = True
    for _ in range(60):
        if placed >= target:
            break
        bw, bh = (int(v) for v in rng.integers(smin, smax + 1, size=2))
        if bw >= room.x1 - room.x0 or bh >= room.y1 - room.y0:
            continue
        bx = int(rng.integers(room.x0, room.x1 - bw + 1))
        by = int(rng.integers(room.y0, room.y1 - bh + 1))
        if keep[by:by + bh, bx:bx + bw].any():
            continue
        trial = occ[room.y0:room.y1, room.x0:room.x1].copy()
        trial[by - room.y0:by - room.y0 + bh, bx - room.x0:bx - room.x0 + bw] = True
        _, ncomp = ndimage.label(~trial)
        if ncomp != 1:
            continue
        newly = ~occ[by:by + bh, bx:bx + bw]
        occ[by:by + bh, bx:bx + bw] = True
        cls[by:by + bh, bx:bx + bw] = CellClass.CLUTTER
        placed += int(newly.sum())


_FOUR = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])


def _remove_isolated(occ: np.ndarray) -> None:
    while True:
        free = ~occ
        nbrs = ndimage.correlate(free.astype(np.int32), _FOUR, mode="constant", cval=0)
        lonely = free & (nbrs == 0)
        if not lonely.any():
            return
        occ[lonely] = True


# ---------------------------------------------------------------------------
# Traversability graph and stepping
# ---------------------------------------------------------------------------

def valid_positions(plan: Floorplan, robot_radius_m: float) -> np.ndarray:
    """Cells where the robot disc lies entirely on Free cells."""
    if robot_radius_m < plan.cell_size_m:
        raise ValueError("robot_radius must be at least one cell")
    off = footprint_offsets(robot_radius_m, plan.cell_size_m)
    n = int(np.abs(off).max())
    mask = np.zeros((2 * n + 1, 2 * n + 1), dtype=bool)
    mask[off[:, 1] + n, off[:, 0] + n] = True
    blocked = ndimage.binary_dilation(plan.occupancy, structure=mask, border_value=1)
    return ~blocked


class TraversabilityGraph:
    """Directed pose graph over valid robot positions.

    Nodes are all (cell, heading) pairs whose footprint is Free; edges are
    stored implicitly as per-direction "can translate" masks.
    """

    def __init__(self, plan: Floorplan, robot_radius_m: float):
        self.plan = plan
        self.robot_radius_m = robot_radius_m
        self.step = step_cells(plan.cell_size_m)
        self.valid = valid_positions(plan, robot_radius_m)
        self.valid.setflags(write=False)
        H, W = self.valid.shape
        self._can_move = []
        for dx, dy in HEADING_VECTORS:
            ok = self.valid.copy()
            for k in range(1, self.step + 1):
                ok &= _shifted(self.valid, dx * k, dy * k)
            ok.setflags(write=False)
            self._can_move.append(ok)

    @property
    def num_positions(self) -> int:
        return int(self.valid.sum())

    @property
    def num_nodes(self) -> int:
        return 4 * self.num_positions

    @property
    def num_edges(self) -> int:
        # each node has two turn edges plus one translation edge per world
        # direction it can move in, taken over all four headings
        return 2 * self.num_nodes + 4 * int(sum(m.sum() for m in self._can_move))

    def __bool__(self) -> bool:
        return self.num_positions > 0

    def has_node(self, pose: Pose) -> bool:
        ok = self.plan.in_bounds(pose.ix, pose.iy)
        return bool(ok and self.valid[pose.iy, pose.ix])

    def can_move(self, world_dir: int) -> np.ndarray:
        return self._can_move[world_dir]

    def target(self, pose: Pose, action: Action) -> Pose | None:
        """Edge target of ``(pose, action)`` or None when the edge is absent."""
        if not self.has_node(pose):
            return None
        if action.is_turn:
            return Pose(pose.ix, pose.iy, pose.heading.rotated(action.quarter_turns))
        dx, dy = pose.robot_to_world(*action.robot_direction)
        world_dir = HEADING_VECTORS.index((dx, dy))
        if not self._can_move[world_dir][pose.iy, pose.ix]:
            return None
        return Pose(pose.ix + dx * self.step, pose.iy + dy * self.step, pose.heading)

    def nodes(self) -> Iterator[Pose]:
        iy, ix = np.nonzero(self.valid)
        for y, x in zip(iy.tolist(), ix.tolist()):
            for h in Heading:
                yield Pose(x, y, h)

    def edges(self) -> Iterator[tuple[Pose, Action, Pose]]:
        for node in self.nodes():
            for a in Action:
                tgt = self.target(node, a)
                if tgt is not None:
                    yield node, a, tgt

    def positions(self, region: Region | None = None) -> np.ndarray:
        """Valid cells as (k, 2) ``(ix, iy)``, optionally restricted to a region label."""
        mask = self.valid
        if region is not None:
            mask = mask & (self.plan.region == region)
        iy, ix = np.nonzero(mask)
        return np.stack([ix, iy], axis=1)


def _shifted(mask: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """``out[y, x] = mask[y + dy, x + dx]`` with False outside."""
    H, W = mask.shape
    out = np.zeros_like(mask)
    ys = slice(max(0, -dy), min(H, H - dy))
    xs = slice(max(0, -dx), min(W, W - dx))
    ys_src = slice(max(0, dy), min(H, H + dy))
    xs_src = slice(max(0, dx), min(W, W + dx))
    out[ys, xs] = mask[ys_src, xs_src]
    return out


def build_graph(plan: Floorplan, robot_radius_m: float = 0.15) -> TraversabilityGraph:
    return TraversabilityGraph(plan, robot_radius_m)


@dataclass(frozen=True, eq=False)
class StepResult:
    pose: Pose
    collided: bool
    attempted_footprint: np.ndarray  # (k, 2) world cells (ix, iy); empty unless collided


_EMPTY_CELLS = np.zeros((0, 2), dtype=np.int64)


def step(plan: Floorplan, pose: Pose, action: Action, robot_radius_m: float = 0.15) -> StepResult:
    """Execute one action. A blocked translation leaves the robot where it is."""
    action = Action(action)
    if action.is_turn:
        return StepResult(Pose(pose.ix, pose.iy, pose.heading.rotated(action.quarter_turns)), False, _EMPTY_CELLS)
    n = step_cells(plan.cell_size_m)
    dx, dy = pose.robot_to_world(*action.robot_direction)
    off = footprint_offsets(robot_radius_m, plan.cell_size_m)
    swept = np.concatenate([off + [pose.ix + dx * k, pose.iy + dy * k] for k in range(n + 1)])
    if not plan.occupied_at(swept[:, 0], swept[:, 1]).any():
        return StepResult(Pose(pose.ix + dx * n, pose.iy + dy * n, pose.heading), False, _EMPTY_CELLS)
    here = {tuple(c) for c in (off + [pose.ix, pose.iy]).tolist()}
    target = off + [pose.ix + dx * n, pose.iy + dy * n]
    attempted = np.array([c for c in target.tolist() if tuple(c) not in here], dtype=np.int64).reshape(-1, 2)
    return StepResult(pose, True, attempted)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

# gray level per (cell class, region) in the stored graymap
GRAY_LEVELS = {
    "wall": 0,
    "door": 64,
    "clutter": 96,
    "room": 200,
    "corridor": 255,
}


def floorplan_to_gray(plan: Floorplan) -> np.ndarray:
    g = np.zeros(plan.occupancy.shape, dtype=np.uint8)
    g[plan.cell_class == CellClass.DOOR] = GRAY_LEVELS["door"]
    g[plan.cell_class == CellClass.CLUTTER] = GRAY_LEVELS["clutter"]
    g[(~plan.occupancy) & (plan.region == Region.ROOM)] = GRAY_LEVELS["room"]
    g[(~plan.occupancy) & (plan.region == Region.CORRIDOR)] = GRAY_LEVELS["corridor"]
    return g[::-1]  # north up


def save_floorplan(plan: Floorplan, stem, params: WorldGenParams | None = None) -> tuple[Path, Path]:
    """Write ``<stem>.pgm`` (ASCII graymap) and ``<stem>.cfg`` (key = value sidecar)."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    pgm_path, cfg_path = stem.with_suffix(".pgm"), stem.with_suffix(".cfg")
    pnm.write_pgm(pgm_path, floorplan_to_gray(plan), ascii=True, comment="egoexplore floorplan, north up")
    lines = [
        "# egoexplore floorplan sidecar",
        "# the graymap stores one cell per pixel, first row = northmost",
        f"format_version = 1",
        f"cell_size_m = {plan.cell_size_m!r}",
        f"width_cells = {plan.width_cells}",
        f"height_cells = {plan.height_cells}",
        f"seed = {'' if plan.seed is None else plan.seed}",
    ]
    lines += [f"gray.{k} = {v}" for k, v in GRAY_LEVELS.items()]
    if params is not None:
        lines += [f"gen.{k} = {v!r}" for k, v in asdict(params).items()]
    cfg_path.write_text("\n".join(lines) + "\n")
    return pgm_path, cfg_path


def _read_kv(path: Path) -> dict[str, str]:
    out = {}
    for raw in path.read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}: malformed line {raw!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def load_floorplan(stem) -> Floorplan:
    stem = Path(stem)
    meta = _read_kv(stem.with_suffix(".cfg"))
    gray = pnm.read_pnm(stem.with_suffix(".pgm"))[::-1]
    if gray.shape != (int(meta["height_cells"]), int(meta["width_cells"])):
        raise ValueError(f"{stem}: graymap size {gray.shape} disagrees with sidecar")
    levels = {k[len("gray."):]: int(v) for k, v in meta.items() if k.startswith("gray.")} or GRAY_LEVELS
    cls = np.full(gray.shape, CellClass.WALL, dtype=np.uint8)
    region = np.zeros(gray.shape, dtype=np.uint8)
    cls[gray == levels["door"]] = CellClass.DOOR
    cls[gray == levels["clutter"]] = CellClass.CLUTTER
    room = gray == levels["room"]
    corr = gray == levels["corridor"]
    cls[room | corr] = CellClass.FLOOR
    region[room] = Region.ROOM
    region[corr] = Region.CORRIDOR
    seed = meta.get("seed", "")
    return Floorplan(
        occupancy=~(room | corr),
        region=region,
        cell_class=cls,
        cell_size_m=float(meta["cell_size_m"]),
        seed=int(seed) if seed else None,
    )
