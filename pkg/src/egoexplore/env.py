"""One robot exploring one floorplan: the per-step sense / map / act / reward loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import mapping
from .geometry import CameraModel, build_projection, covered_sight_lines, project
from .mapping import EgoMapPair, MapConfig
from .noise import NoiseSpec, OdometryIntegrator
from .reward import RewardConfig, StepReward, correct_cells, eval_score, step_reward
from .sensor import SegImage, SensorNoise, corrupt, render_free_space
from .world import Action, Floorplan, Pose, TraversabilityGraph, footprint_offsets, step


@dataclass
class EnvConfig:
    camera: CameraModel = field(default_factory=CameraModel)
    maps: MapConfig = field(default_factory=MapConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    sensor_noise: SensorNoise = field(default_factory=SensorNoise)
    robot_radius_m: float = 0.15
    episode_len: int = 200


@dataclass
class StepRecord:
    t: int
    pose: Pose
    action: int
    collided: bool
    new_free_cells: int
    fp_pixels: int
    reward: float


class ExplorationEnv:
    """Episode state for a single robot; not shared between workers.

    ``reset`` and ``step`` both end by sensing at the (new) pose and folding
    the frame into the maps, so the reward of an action includes the view it
    led to. ``observe`` returns the state tensor of the current maps.

    Under odometry noise the agent's maps move by believed motion, while a
    separate reference map pair moves by true motion and alone feeds the
    reward and the score. Without noise the two are the same object.
    """

    def __init__(self, plan: Floorplan, graph: TraversabilityGraph, cfg: EnvConfig):
        cfg.maps.validate()
        self.plan = plan
        self.graph = graph
        self.cfg = cfg
        self.proj = build_projection(cfg.camera, plan.cell_size_m)
        covered_sight_lines(self.proj)  # warm the cache
        self.footprint = footprint_offsets(cfg.robot_radius_m, plan.cell_size_m)
        self.maps: EgoMapPair | None = None

    def reset(self, start: Pose, noise: NoiseSpec | None = None, seed: int = 0) -> None:
        if not self.graph.has_node(start):
            raise ValueError(f"start pose {start} is not a graph node")
        self.pose = start
        self.t = 0
        self.noise = noise or NoiseSpec()
        self.maps = EgoMapPair(self.cfg.maps.map_side_cells, self.plan.cell_size_m)
        self.ref_maps = self.maps if self.noise.is_zero else EgoMapPair(self.cfg.maps.map_side_cells,
                                                                         self.plan.cell_size_m)
        ss = np.random.SeedSequence([seed, 0x5E50])
        sensor_seq, odo_seq = ss.spawn(2)
        self._sensor_rng = np.random.default_rng(sensor_seq)
        self.odometry = OdometryIntegrator(self.noise, self.plan.cell_size_m, np.random.default_rng(odo_seq))
        self._state = None
        self._img = self._sense_and_integrate(arrived=True)
        self.world_map = self._world_map()
        self.initial_correct = correct_cells(self.world_map, self.plan)
        self.poses = [start]
        self.records: list[StepRecord] = []

    @property
    def done(self) -> bool:
        return self.t >= self.cfg.episode_len

    def _world_map(self) -> np.ndarray:
        return mapping.world_anchored_map(self.ref_maps, self.pose, self.plan.occupancy.shape)

    def sense(self) -> SegImage:
        img = render_free_space(self.plan, self.pose, self.cfg.camera, self.proj)
        return corrupt(img, self.cfg.sensor_noise, self._sensor_rng)

    def _sense_and_integrate(self, arrived: bool) -> SegImage:
        img = self.sense()
        m_t = project(img, self.proj)
        for maps in self._map_pairs():
            mapping.integrate(maps, m_t, self.cfg.maps.bem_threshold)
            if arrived:
                mapping.stamp_trajectory(maps, self.footprint, self.cfg.maps.stamp_value)
        return img

    def _map_pairs(self) -> list[EgoMapPair]:
        return [self.maps] if self.ref_maps is self.maps else [self.maps, self.ref_maps]

    def observe(self) -> np.ndarray:
        """State tensor of the current maps."""
        if self._state is None:
            self._state = mapping.extract_state(self.maps, self.cfg.maps.state_side, self.cfg.maps.coarse_stride)
        return self._state

    def step(self, action) -> StepReward:
        if self.done:
            raise RuntimeError("episode is over")
        action = Action(int(action))
        res = step(self.plan, self.pose, action, self.cfg.robot_radius_m)
        if res.collided:
            off = self.pose.world_to_robot(res.attempted_footprint[:, 0] - self.pose.ix,
                                           res.attempted_footprint[:, 1] - self.pose.iy)
            mapping.stamp_collision(self.maps, np.stack(off, axis=1), self.cfg.maps.stamp_value)
            motion = (0, 0, 0)
        else:
            motion = mapping.action_motion(action, self.plan.cell_size_m)
        mapping.shift_rotate(self.maps, *self.odometry.motion(*motion))
        if self.ref_maps is not self.maps:
            mapping.shift_rotate(self.ref_maps, *motion)
        self.pose = res.pose
        self._img = self._sense_and_integrate(arrived=not res.collided and not action.is_turn)
        self._state = None
        new_world = self._world_map()
        r = step_reward(self.world_map, new_world, self._img, res.collided, self.cfg.reward, self.plan)
        self.world_map = new_world
        self.records.append(StepRecord(self.t, self.pose, int(action), res.collided, r.new_free_cells,
                                       r.fp_pixels, r.total))
        self.poses.append(self.pose)
        self.t += 1
        return r

    def score(self) -> float:
        return eval_score(self.world_map, self.plan)

    @property
    def collisions(self) -> int:
        return sum(r.collided for r in self.records)

    @property
    def fp_pixels(self) -> int:
        return sum(r.fp_pixels for r in self.records)

    @property
    def episode_return(self) -> float:
        return float(sum(r.reward for r in self.records))
