"""Gaussian odometry noise and its quantisation onto the map lattice."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NoiseSpec:
    trans_mean_m: float = 0.0
    trans_std_m: float = 0.0
    rot_mean_rad: float = 0.0
    rot_std_rad: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.trans_std_m < 0 or self.rot_std_rad < 0:
            raise ValueError("noise standard deviations must be non-negative")

    @property
    def is_zero(self) -> bool:
        return not (self.trans_mean_m or self.trans_std_m or self.rot_mean_rad or self.rot_std_rad)

    def label(self) -> str:
        if self.is_zero:
            return "none"
        parts = []
        if self.trans_mean_m or self.trans_std_m:
            parts.append(f"TN {self.trans_mean_m * 100:g}cm,{self.trans_std_m * 100:g}cm")
        if self.rot_mean_rad or self.rot_std_rad:
            parts.append(f"ON {math.degrees(self.rot_mean_rad):g}deg,{math.degrees(self.rot_std_rad):g}deg")
        return " ".join(parts)


def apply_pose_noise(true_delta, spec: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    """Believed motion ``(forward_m, left_m, dtheta_rad)`` = true motion + per-component Gaussian noise."""
    true_delta = np.asarray(true_delta, dtype=np.float64)
    noise = np.array([
        rng.normal(spec.trans_mean_m, spec.trans_std_m) if spec.trans_std_m else spec.trans_mean_m,
        rng.normal(spec.trans_mean_m, spec.trans_std_m) if spec.trans_std_m else spec.trans_mean_m,
        rng.normal(spec.rot_mean_rad, spec.rot_std_rad) if spec.rot_std_rad else spec.rot_mean_rad,
    ])
    return true_delta + noise


class OdometryIntegrator:
    """Turns noisy continuous motion into exact lattice transforms without losing the remainder.

    The map frame only supports whole-cell shifts and quarter turns. Each
    step, the believed motion is expressed in the current map frame
    (including any sub-quarter heading error), added to the carried
    remainder, and rounded; what rounding leaves behind is carried on.
    """

    def __init__(self, spec: NoiseSpec, cell_size_m: float, rng: np.random.Generator):
        self.spec = spec
        self.cell_size_m = cell_size_m
        self.rng = rng
        self.residual = np.zeros(2)  # forward, left in metres, map frame
        self.heading_residual = 0.0  # believed heading minus map "up", radians

    def motion(self, forward_cells: int, left_cells: int, quarter_turns: int) -> tuple[int, int, int]:
        if self.spec.is_zero:
            return forward_cells, left_cells, quarter_turns
        s = self.cell_size_m
        true = (forward_cells * s, left_cells * s, quarter_turns * math.pi / 2)
        f, l, dth = apply_pose_noise(true, self.spec, self.rng)
        c, sn = math.cos(self.heading_residual), math.sin(self.heading_residual)
        total = self.residual + np.array([c * f - sn * l, sn * f + c * l])
        cells = np.round(total / s)
        self.residual = total - cells * s
        theta = self.heading_residual + dth
        q = int(round(theta / (math.pi / 2)))
        self.heading_residual = theta - q * math.pi / 2
        if q % 4:
            # the map turns by q quarter turns: re-express the remainder in the new frame
            ang = -q * math.pi / 2
            ca, sa = round(math.cos(ang)), round(math.sin(ang))
            rf, rl = self.residual
            self.residual = np.array([ca * rf - sa * rl, sa * rf + ca * rl])
        return int(cells[0]), int(cells[1]), q
