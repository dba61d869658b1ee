"""Step reward and the TP - FP explored-area score."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .world import Floorplan


@dataclass
class RewardConfig:
    new_cell_reward: float = 1.0
    fp_pixel_penalty: float = -0.01
    collision_penalty: float = -100.0
    label_threshold: float = 0.8  # a pixel counts as "labelled free" above this confidence

    def __post_init__(self):
        if not (self.fp_pixel_penalty <= 0 <= self.new_cell_reward and self.collision_penalty <= 0):
            raise ValueError("penalties must be <= 0 <= new_cell_reward")


@dataclass(frozen=True)
class StepReward:
    new_free_cells: int
    fp_pixels: int
    collided: bool
    total: float


def count_fp_pixels(img, threshold: float = 0.8) -> int:
    """Pixels labelled free (confidence above threshold) whose ground truth is not free."""
    return int(np.count_nonzero((img.free_confidence > threshold) & ~img.truth))


def step_reward(prev_world_map: np.ndarray, new_world_map: np.ndarray, img, collided: bool,
                cfg: RewardConfig, plan: Floorplan) -> StepReward:
    if prev_world_map.shape != new_world_map.shape or new_world_map.shape != plan.occupancy.shape:
        raise ValueError("world maps must match the floorplan grid")
    gained = new_world_map & ~prev_world_map & plan.free
    n_new = int(np.count_nonzero(gained))
    n_fp = count_fp_pixels(img, cfg.label_threshold) if img is not None else 0
    total = cfg.new_cell_reward * n_new + cfg.fp_pixel_penalty * n_fp + cfg.collision_penalty * bool(collided)
    return StepReward(n_new, n_fp, bool(collided), float(total))


def correct_cells(world_map: np.ndarray, plan: Floorplan) -> int:
    return int(np.count_nonzero(world_map & plan.free))


def eval_score(final_world_map: np.ndarray, plan: Floorplan) -> float:
    """Correctly mapped free area minus area wrongly mapped as free, in square metres."""
    if final_world_map.shape != plan.occupancy.shape:
        raise ValueError("world map must match the floorplan grid")
    tp = np.count_nonzero(final_world_map & plan.free)
    fp = np.count_nonzero(final_world_map & plan.occupancy)
    return float((int(tp) - int(fp)) * plan.cell_size_m ** 2)
