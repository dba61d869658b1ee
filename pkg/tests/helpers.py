"""Small hand-built worlds shared by the tests."""

import numpy as np

from egoexplore.world import CellClass, Floorplan, Region

# one PASS/FAIL line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def plan_from_occupancy(occ: np.ndarray, clutter: np.ndarray | None = None) -> Floorplan:
    occ = np.asarray(occ, dtype=bool)
    region = np.where(occ, Region.NONE, Region.ROOM).astype(np.uint8)
    cls = np.where(occ, CellClass.WALL, CellClass.FLOOR).astype(np.uint8)
    if clutter is not None:
        cls[clutter & occ] = CellClass.CLUTTER
    return Floorplan(occ, region, cls)


def open_room(width_cells: int = 100, height_cells: int = 100) -> Floorplan:
    occ = np.zeros((height_cells, width_cells), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    return plan_from_occupancy(occ)


def open_plane(side: int = 480) -> Floorplan:
    """Free everywhere; big enough that a centred camera never reaches the edge."""
    return plan_from_occupancy(np.zeros((side, side), dtype=bool))
