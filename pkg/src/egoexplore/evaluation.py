"""Start-point sweeps stratified by rooms and corridors, with optional odometry noise.

Every episode's world, start pose, sensor stream and odometry stream come
from seeds that depend only on the sweep seed and the episode index, so two
policies evaluated with the same arguments see identical conditions.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .env import EnvConfig, ExplorationEnv
from .noise import NoiseSpec, apply_pose_noise  # noqa: F401  (re-exported)
from .trainer import Actor, EpisodeLog, World, run_episode, sample_start
from .world import Region

STRATA = {"rooms": (Region.ROOM,), "corridors": (Region.CORRIDOR,), "both": (Region.ROOM, Region.CORRIDOR)}

EPISODE_FIELDS = ["policy", "mode", "stratum", "episode", "world_seed", "start_ix", "start_iy", "start_heading",
                  "explored_area_m2", "episode_return", "collisions", "fp_pixels", "noise"]


@dataclass
class EpisodeRecord:
    policy: str
    mode: str
    stratum: str
    episode: int
    world_seed: int
    start_ix: int
    start_iy: int
    start_heading: int
    explored_area_m2: float
    episode_return: float
    collisions: int
    fp_pixels: int
    noise: str


@dataclass
class StratumStats:
    mean: float
    std: float
    count: int


@dataclass
class EvalReport:
    policy: str
    mode: str
    noise: NoiseSpec
    records: list[EpisodeRecord] = field(default_factory=list)

    def strata(self) -> list[str]:
        return sorted({r.stratum for r in self.records})

    def stats(self, stratum: str | None = None) -> StratumStats:
        xs = np.array([r.explored_area_m2 for r in self.records if stratum in (None, r.stratum)], dtype=np.float64)
        if len(xs) == 0:
            return StratumStats(math.nan, math.nan, 0)
        return StratumStats(float(xs.mean()), float(xs.std(ddof=1)) if len(xs) > 1 else 0.0, len(xs))

    def mean(self, stratum: str | None = None) -> float:
        return self.stats(stratum).mean

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=EPISODE_FIELDS)
            w.writeheader()
            for r in self.records:
                w.writerow(asdict(r))

    @classmethod
    def read_csv(cls, path) -> "EvalReport":
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: empty report")
        ints = {"episode", "world_seed", "start_ix", "start_iy", "start_heading", "collisions", "fp_pixels"}
        floats = {"explored_area_m2", "episode_return"}
        recs = [EpisodeRecord(**{k: int(v) if k in ints else float(v) if k in floats else v for k, v in row.items()})
                for row in rows]
        return cls(recs[0].policy, recs[0].mode, NoiseSpec(), recs)


def summary_table(reports: list[EvalReport]) -> str:
    """Plain-text table: one row per report, mean (std) explored area per stratum."""
    strata = sorted({s for rep in reports for s in rep.strata()})
    head = ["policy", "mode", "noise"] + [f"{s} m2" for s in strata] + ["episodes"]
    rows = []
    for rep in reports:
        cells = [rep.policy, rep.mode, rep.noise.label()]
        for s in strata:
            st = rep.stats(s)
            cells.append(f"{st.mean:.2f} ({st.std:.2f})" if st.count else "-")
        cells.append(str(len(rep.records)))
        rows.append(cells)
    widths = [max(len(r[i]) for r in [head] + rows) for i in range(len(head))]
    fmt = lambda r: "  ".join(c.ljust(w) for c, w in zip(r, widths))  # noqa: E731
    return "\n".join([fmt(head), fmt(["-" * w for w in widths])] + [fmt(r) for r in rows])


@dataclass(frozen=True)
class StartSpec:
    stratum: str
    episode: int
    world_index: int
    pose: object
    episode_seed: int
    action_seed: int


def start_set(worlds: list[World], stratum: str, count: int, seed: int = 0) -> list[StartSpec]:
    """``count`` starts per region of the stratum, cycling over worlds; a pure function of its arguments."""
    if stratum not in STRATA:
        raise ValueError(f"unknown stratum {stratum!r}; choose from {sorted(STRATA)}")
    out = []
    for region in STRATA[stratum]:
        name = "rooms" if region == Region.ROOM else "corridors"
        for i in range(count):
            k = i % len(worlds)
            rng = np.random.default_rng([seed, int(region), i])
            pose = sample_start(worlds[k].graph, region, rng)
            out.append(StartSpec(name, i, k, pose, int(rng.integers(2 ** 31)), int(rng.integers(2 ** 31))))
    return out


def sweep(actor: Actor, worlds: list[World], stratum: str = "both", noise: NoiseSpec | None = None,
          episodes_per_start: int = 1, starts_per_stratum: int = 200, seed: int = 0,
          env_cfg: EnvConfig | None = None, keep_logs: bool = False) -> EvalReport | tuple[EvalReport, list[EpisodeLog]]:
    """Run one episode per (start, repeat) and score it from the true poses."""
    noise = noise or NoiseSpec()
    env_cfg = env_cfg or EnvConfig()
    envs = [ExplorationEnv(w.plan, w.graph, env_cfg) for w in worlds]
    mode = getattr(actor, "name", "policy")
    policy = getattr(actor, "policy_id", mode)
    report = EvalReport(policy, mode, noise)
    logs = []
    for st in start_set(worlds, stratum, starts_per_stratum, seed):
        for rep in range(episodes_per_start):
            # noise stream: the noise seed mixed with the episode, so a zero NoiseSpec changes nothing
            ep_seed = int(np.random.SeedSequence([st.episode_seed, rep, noise.seed]).generate_state(1)[0])
            ep = run_episode(envs[st.world_index], actor, st.pose, np.random.default_rng([st.action_seed, rep]),
                             world_seed=worlds[st.world_index].seed, noise=noise, episode_seed=ep_seed,
                             keep_env=keep_logs)
            report.records.append(EpisodeRecord(
                policy=policy, mode=mode, stratum=st.stratum, episode=st.episode * episodes_per_start + rep,
                world_seed=worlds[st.world_index].seed, start_ix=st.pose.ix, start_iy=st.pose.iy,
                start_heading=int(st.pose.heading), explored_area_m2=ep.explored_area_m2,
                episode_return=ep.total_reward, collisions=ep.collisions, fp_pixels=ep.fp_pixels,
                noise=noise.label()))
            if keep_logs:
                logs.append(ep)
    return (report, logs) if keep_logs else report
