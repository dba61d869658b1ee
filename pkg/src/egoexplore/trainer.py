"""n-step advantage actor-critic training with synchronous workers.

Each round every worker advances its own episode by up to ``local_steps``
transitions using the same parameter snapshot; the resulting gradients are
then applied one at a time in worker order. Rollouts may run on a thread pool;
since workers share nothing but the read-only snapshot, the outcome does not
depend on scheduling.
"""

from __future__ import annotations

import csv
import json
import logging
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterator

import numpy as np
import torch

from . import agent
from .agent import NetConfig, PolicyNet
from .env import EnvConfig, ExplorationEnv
from .mapping import EgoMapPair
from .noise import NoiseSpec
from .world import Floorplan, Pose, Region, TraversabilityGraph, WorldGenParams, build_graph, generate_floorplan

log = logging.getLogger(__name__)

CURVE_FIELDS = ["step", "worker_id", "episode_return", "explored_area_m2", "collisions", "fp_pixels"]
EVAL_FIELDS = ["step", "mean_explored_area_m2", "mean_return", "episodes"]


@dataclass
class TrainConfig:
    episode_len: int = 200
    local_steps: int = 20
    discount: float = 0.99
    learning_rate: float = 2e-5
    adam_eps: float = 1e-8
    entropy_coeff: float = 0.01
    entropy_final: float | None = None  # if set, entropy_coeff decays linearly to this value by total_steps
    entropy_anneal_start: int = 0
    value_coeff: float = 0.5
    max_grad_norm: float = 40.0
    reward_scale: float = 1.0  # applied to rewards for learning only; logs stay in raw units
    num_workers: int = 4
    worlds_per_worker: int = 2
    total_steps: int = 2_000_000
    eval_every: int = 20_000
    eval_episodes: int = 8
    checkpoint_every: int = 20_000
    room_start_fraction: float = 0.5
    world_seed_base: int = 0
    eval_world_seed_base: int = 1_000_000
    num_eval_worlds: int = 4
    seed: int = 0

    def validate(self) -> None:
        if not 1 <= self.local_steps <= self.episode_len:
            raise ValueError("need 1 <= local_steps <= episode_len")
        if not 0 < self.discount <= 1:
            raise ValueError("discount must lie in (0, 1]")
        if self.learning_rate < 0 or self.total_steps < 0:
            raise ValueError("learning_rate and total_steps must be non-negative")
        if self.num_workers < 1 or self.worlds_per_worker < 1:
            raise ValueError("need at least one worker and one world per worker")
        if self.entropy_final is not None and not 0 <= self.entropy_anneal_start <= self.total_steps:
            raise ValueError("entropy_anneal_start must lie in [0, total_steps]")
        if not 0 <= self.room_start_fraction <= 1:
            raise ValueError("room_start_fraction must lie in [0, 1]")
        train = set(self.train_world_seeds())
        if train & set(self.eval_world_seeds()):
            raise ValueError("held-out evaluation worlds overlap the training worlds")

    def entropy_at(self, step: int) -> float:
        if self.entropy_final is None or step <= self.entropy_anneal_start:
            return self.entropy_coeff
        span = self.total_steps - self.entropy_anneal_start
        frac = min(1.0, (step - self.entropy_anneal_start) / span)
        return self.entropy_coeff + frac * (self.entropy_final - self.entropy_coeff)

    def train_world_seeds(self) -> list[int]:
        return [self.world_seed_base + i for i in range(self.num_workers * self.worlds_per_worker)]

    def eval_world_seeds(self) -> list[int]:
        return [self.eval_world_seed_base + i for i in range(self.num_eval_worlds)]


@dataclass
class Rollout:
    states: list
    actions: list[int]
    rewards: list[float]
    values: list[float]
    bootstrap_value: float = 0.0
    terminal: bool = False

    def __len__(self):
        return len(self.rewards)


def compute_returns(rewards, values, bootstrap_value: float, discount: float) -> tuple[np.ndarray, np.ndarray]:
    """``R_i = r_i + discount * R_{i+1}`` from ``R_n = bootstrap``; advantage ``R_i - V(s_i)``."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if rewards.shape != values.shape or rewards.ndim != 1 or len(rewards) == 0:
        raise ValueError("rewards and values must be equal-length non-empty 1-D sequences")
    if not np.isfinite(rewards).all():
        raise ValueError("rewards must be finite")
    out = np.empty_like(rewards)
    acc = float(bootstrap_value)
    for i in range(len(rewards) - 1, -1, -1):
        acc = rewards[i] + discount * acc
        out[i] = acc
    return out, out - values


def rollout_returns(rollout: Rollout, discount: float) -> tuple[np.ndarray, np.ndarray]:
    boot = 0.0 if rollout.terminal else rollout.bootstrap_value
    return compute_returns(rollout.rewards, rollout.values, boot, discount)


# acting ----------------------------------------------------------------------

class Actor:
    """Chooses actions for an episode; ``value`` is 0 for policies without a critic."""

    name = "actor"

    def act(self, state, rng: np.random.Generator) -> tuple[int, float]:
        raise NotImplementedError

    def value(self, state) -> float:
        return 0.0


class RandomActor(Actor):
    name = "random"

    def act(self, state, rng):
        return int(agent.sample_action(agent.random_policy(), rng)), 0.0


class NetActor(Actor):
    def __init__(self, net: PolicyNet, greedy: bool = False):
        self.net = net
        self.greedy = greedy
        self.name = "greedy" if greedy else "stochastic"

    def act(self, state, rng):
        out = agent.forward(self.net, state)
        return int(agent.sample_action(out.probs, rng, greedy=self.greedy)), out.value

    def value(self, state) -> float:
        return agent.forward(self.net, state).value


@dataclass
class EpisodeLog:
    start: Pose
    world_seed: int
    rewards: list[float]
    actions: list[int]
    poses: list[Pose]
    explored_area_m2: float
    collisions: int
    fp_pixels: int
    rollouts: int
    world_map: np.ndarray | None = field(default=None, repr=False)  # final BEM in world axes
    maps: EgoMapPair | None = field(default=None, repr=False)

    @property
    def total_reward(self) -> float:
        return float(sum(self.rewards))


def episode_rollouts(env: ExplorationEnv, actor: Actor, rng: np.random.Generator, local_steps: int,
                     reward_scale: float = 1.0) -> Iterator[Rollout]:
    """Advance an already reset ``env`` to the end of its episode, yielding one rollout per window."""
    while not env.done:
        ro = Rollout([], [], [], [])
        while len(ro) < local_steps and not env.done:
            s = env.observe()
            a, v = actor.act(s, rng)
            r = env.step(a)
            ro.states.append(s)
            ro.actions.append(a)
            ro.values.append(v)
            ro.rewards.append(r.total * reward_scale)
        ro.terminal = env.done
        if not ro.terminal:
            ro.bootstrap_value = actor.value(env.observe())
        yield ro


def finish_log(env: ExplorationEnv, world_seed: int, start: Pose, rollouts: int, keep_env: bool) -> EpisodeLog:
    return EpisodeLog(start=start, world_seed=world_seed, rewards=[r.reward for r in env.records],
                      actions=[r.action for r in env.records], poses=list(env.poses), explored_area_m2=env.score(),
                      collisions=env.collisions, fp_pixels=env.fp_pixels, rollouts=rollouts,
                      world_map=env.world_map.copy(), maps=env.maps.copy() if keep_env else None)


def run_episode(env: ExplorationEnv, actor: Actor, start: Pose, rng: np.random.Generator, *, world_seed: int = -1,
                local_steps: int = 20, noise: NoiseSpec | None = None, episode_seed: int = 0,
                on_rollout: Callable[[Rollout], None] | None = None, reward_scale: float = 1.0,
                keep_env: bool = False) -> EpisodeLog:
    """One full episode: exactly ``episode_len`` sense/act/step iterations.

    ``on_rollout`` receives each local-steps window as it completes, which is
    where a learner applies its update.
    """
    env.reset(start, noise=noise, seed=episode_seed)
    n = 0
    for ro in episode_rollouts(env, actor, rng, local_steps, reward_scale):
        n += 1
        if on_rollout is not None:
            on_rollout(ro)
    return finish_log(env, world_seed, start, n, keep_env)


def sample_start(graph: TraversabilityGraph, region: Region, rng: np.random.Generator) -> Pose:
    """Uniform over graph nodes whose cell lies in ``region``."""
    pos = graph.positions(region)
    if len(pos) == 0:
        raise ValueError(f"no valid start positions in {region.name}")
    ix, iy = pos[int(rng.integers(len(pos)))]
    return Pose(int(ix), int(iy), int(rng.integers(4)))


@dataclass
class World:
    seed: int
    plan: Floorplan
    graph: TraversabilityGraph


def make_world(seed: int, params: WorldGenParams | None = None, robot_radius_m: float = 0.15) -> World:
    plan = generate_floorplan(seed, params)
    return World(seed, plan, build_graph(plan, robot_radius_m))


# workers -----------------------------------------------------------------

class Worker:
    """Owns a private set of worlds, one environment per world and an RNG stream."""

    def __init__(self, wid: int, worlds: list[World], env_cfg: EnvConfig, cfg: TrainConfig, seq: np.random.SeedSequence):
        self.wid = wid
        self.worlds = worlds
        self.envs = [ExplorationEnv(w.plan, w.graph, env_cfg) for w in worlds]
        self.cfg = cfg
        self.rng = np.random.default_rng(seq)
        self.episodes = 0
        self._gen: Iterator[Rollout] | None = None
        self._env: ExplorationEnv | None = None

    def begin_episode(self, actor: Actor) -> None:
        k = self.episodes % len(self.worlds)
        region = Region.ROOM if self.rng.random() < self.cfg.room_start_fraction else Region.CORRIDOR
        start = sample_start(self.worlds[k].graph, region, self.rng)
        env = self.envs[k]
        env.reset(start, seed=int(self.rng.integers(2 ** 31)))
        self._env, self._world, self._start, self._count = env, self.worlds[k], start, 0
        self._gen = episode_rollouts(env, actor, self.rng, self.cfg.local_steps, self.cfg.reward_scale)

    def next_rollout(self) -> Rollout:
        self._count += 1
        return next(self._gen)

    @property
    def in_episode(self) -> bool:
        return self._env is not None and not self._env.done

    def end_episode(self) -> EpisodeLog:
        logrec = finish_log(self._env, self._world.seed, self._start, self._count, keep_env=False)
        self.episodes += 1
        self._gen = None
        self._env = None
        return logrec


def rollout_loss(net: PolicyNet, ro: Rollout, cfg: TrainConfig, entropy_coeff: float | None = None) -> torch.Tensor:
    returns, adv = rollout_returns(ro, cfg.discount)
    dt = next(net.parameters()).dtype
    states = torch.from_numpy(np.stack(ro.states)).to(dt)
    logits, values = net(states)
    return agent.actor_critic_loss(logits, values, torch.tensor(ro.actions, dtype=torch.long),
                                   torch.from_numpy(adv).to(dt), torch.from_numpy(returns).to(dt),
                                   cfg.entropy_coeff if entropy_coeff is None else entropy_coeff, cfg.value_coeff)


def rollout_gradient(net: PolicyNet, ro: Rollout, cfg: TrainConfig,
                     entropy_coeff: float | None = None) -> list[torch.Tensor]:
    loss = rollout_loss(net, ro, cfg, entropy_coeff)
    return list(torch.autograd.grad(loss, list(net.parameters())))


class ParameterStore:
    """Single shared parameter set; gradient applies are serialized by the caller."""

    def __init__(self, net: PolicyNet, cfg: TrainConfig):
        self.net = net
        self.cfg = cfg
        self.opt = torch.optim.Adam(net.parameters(), lr=cfg.learning_rate, eps=cfg.adam_eps)
        self.updates = 0

    def apply(self, grads: list[torch.Tensor]) -> None:
        if self.cfg.learning_rate == 0:
            self.updates += 1
            return
        for p, g in zip(self.net.parameters(), grads):
            p.grad = g.clone()
        if self.cfg.max_grad_norm > 0:
            torch.nn.utils.clip_grad_norm_(self.net.parameters(), self.cfg.max_grad_norm)
        self.opt.step()
        self.opt.zero_grad(set_to_none=True)
        self.updates += 1

    def adam_tensors(self) -> "OrderedDict[str, np.ndarray]":
        out = OrderedDict()
        for (name, p) in self.net.named_parameters():
            st = self.opt.state.get(p)
            if st:
                out["adam.m." + name] = st["exp_avg"].numpy()
                out["adam.v." + name] = st["exp_avg_sq"].numpy()
        return out

    def adam_step(self) -> int:
        st = [self.opt.state[p]["step"] for p in self.net.parameters() if p in self.opt.state]
        return int(st[0]) if st else 0

    def load_adam(self, tensors, step: int) -> None:
        for name, p in self.net.named_parameters():
            m, v = tensors.get("adam.m." + name), tensors.get("adam.v." + name)
            if m is None:
                continue
            self.opt.state[p] = {"step": torch.tensor(float(step)), "exp_avg": torch.from_numpy(m.copy()),
                                 "exp_avg_sq": torch.from_numpy(v.copy())}


# run directory ----------------------------------------------------------------

def smooth(values, factor: float = 0.85) -> np.ndarray:
    """Exponential smoothing ``s_i = factor * s_{i-1} + (1 - factor) * x_i`` seeded with ``s_0 = x_0``."""
    x = np.asarray(values, dtype=np.float64)
    out = np.empty_like(x)
    for i, v in enumerate(x):
        out[i] = v if i == 0 else factor * out[i - 1] + (1 - factor) * v
    return out


def _config_dict(cfg: TrainConfig, env_cfg: EnvConfig, net_cfg: NetConfig, world_params: WorldGenParams) -> dict:
    return {"train": asdict(cfg), "env": asdict(env_cfg), "net": asdict(net_cfg), "world": asdict(world_params)}


@dataclass
class TrainResult:
    run_dir: Path
    net: PolicyNet
    steps: int
    episodes: int
    curve_rows: list[dict]
    eval_rows: list[dict]


def _append_csv(path: Path, fields: list[str], rows: list[dict]) -> None:
    new = not path.exists()
    with path.open("a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        if new:
            w.writeheader()
        w.writerows(rows)


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def evaluate_greedy(net: PolicyNet, worlds: list[World], env_cfg: EnvConfig, cfg: TrainConfig) -> dict:
    """Fixed held-out starts so successive evaluations are comparable."""
    rng = np.random.default_rng([cfg.seed, 0xE7A1])
    actor = NetActor(net, greedy=True)
    areas, rets = [], []
    for i in range(cfg.eval_episodes):
        w = worlds[i % len(worlds)]
        region = Region.ROOM if i % 2 == 0 else Region.CORRIDOR
        start = sample_start(w.graph, region, rng)
        env = ExplorationEnv(w.plan, w.graph, env_cfg)
        ep = run_episode(env, actor, start, np.random.default_rng(i), world_seed=w.seed, episode_seed=i,
                         local_steps=cfg.local_steps)
        areas.append(ep.explored_area_m2)
        rets.append(ep.total_reward)
    return {"mean_explored_area_m2": float(np.mean(areas)), "mean_return": float(np.mean(rets)),
            "episodes": len(areas)}


def train(cfg: TrainConfig, run_dir, env_cfg: EnvConfig | None = None, net_cfg: NetConfig | None = None,
          world_params: WorldGenParams | None = None, resume: bool = False, extra_config: dict | None = None,
          progress: Callable[[str], None] | None = None) -> TrainResult:
    """Train until ``total_steps`` environment steps, in whole rounds of one episode per worker.

    The run directory holds ``policy.bin`` (network), ``trainer_state.bin``
    (optimizer moments), ``trainer_state.json`` (counters and RNG states),
    ``config.json``, ``curve.csv`` and ``eval.csv``. Checkpoints happen only at
    episode boundaries, which is where ``resume`` picks up.
    """
    cfg.validate()
    env_cfg = env_cfg or EnvConfig(episode_len=cfg.episode_len)
    env_cfg.episode_len = cfg.episode_len
    net_cfg = net_cfg or NetConfig(seed=cfg.seed)
    world_params = world_params or WorldGenParams()
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    say = progress or log.info
    torch.manual_seed(cfg.seed)

    net = PolicyNet(net_cfg)
    store = ParameterStore(net, cfg)
    seeds = cfg.train_world_seeds()
    worlds = [make_world(s, world_params, env_cfg.robot_radius_m) for s in seeds]
    seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.num_workers)
    workers = [Worker(w, worlds[w * cfg.worlds_per_worker:(w + 1) * cfg.worlds_per_worker], env_cfg, cfg, seqs[w])
               for w in range(cfg.num_workers)]
    eval_worlds: list[World] | None = None

    steps = 0
    next_eval = cfg.eval_every
    next_ckpt = cfg.checkpoint_every
    state_path = run_dir / "trainer_state.json"
    if resume and state_path.exists():
        meta = json.loads(state_path.read_text())
        agent.load_checkpoint(net, run_dir / "policy.bin")
        store.load_adam(agent.load_tensors(run_dir / "trainer_state.bin"), meta["adam_step"])
        store.updates = meta["updates"]
        steps, next_eval, next_ckpt = meta["steps"], meta["next_eval"], meta["next_ckpt"]
        for wk, st in zip(workers, meta["workers"]):
            wk.rng.bit_generator.state = st["rng"]
            wk.episodes = st["episodes"]
        say(f"resumed at step {steps}")
    else:
        for p in (run_dir / "curve.csv", run_dir / "eval.csv"):
            p.unlink(missing_ok=True)

    cfg_dict = _config_dict(cfg, env_cfg, net_cfg, world_params)
    if extra_config:
        cfg_dict.update(extra_config)
    (run_dir / "config.json").write_text(json.dumps(cfg_dict, indent=2, sort_keys=True, default=str))

    def checkpoint():
        try:
            agent.save_checkpoint(net, run_dir / "policy.bin")
            agent.save_tensors(run_dir / "trainer_state.bin", store.adam_tensors())
            meta = {"steps": steps, "next_eval": next_eval, "next_ckpt": next_ckpt, "updates": store.updates,
                    "adam_step": store.adam_step(),
                    "workers": [{"rng": wk.rng.bit_generator.state, "episodes": wk.episodes} for wk in workers]}
            tmp = state_path.with_name(state_path.name + ".tmp")
            tmp.write_text(json.dumps(meta, indent=1))
            tmp.replace(state_path)
        except OSError as exc:
            raise RuntimeError(f"could not write checkpoint to {run_dir}: {exc}") from exc

    checkpoint()
    actor = NetActor(net, greedy=False)
    pool = ThreadPoolExecutor(cfg.num_workers) if cfg.num_workers > 1 else None
    curve_rows, eval_rows = [], []
    try:
        while steps < cfg.total_steps:
            for wk in workers:
                wk.begin_episode(actor)
            while workers[0].in_episode:
                if pool is None:
                    ros = [wk.next_rollout() for wk in workers]
                else:
                    ros = list(pool.map(lambda wk: wk.next_rollout(), workers))
                # gradients all refer to the snapshot the rollouts were collected with
                ent = cfg.entropy_at(steps)
                grads = [rollout_gradient(net, ro, cfg, ent) for ro in ros]
                for g in grads:
                    store.apply(g)
                steps += sum(len(ro) for ro in ros)
            rows = []
            for wk in workers:
                ep = wk.end_episode()
                rows.append({"step": steps, "worker_id": wk.wid, "episode_return": ep.total_reward,
                             "explored_area_m2": ep.explored_area_m2, "collisions": ep.collisions,
                             "fp_pixels": ep.fp_pixels})
            _append_csv(run_dir / "curve.csv", CURVE_FIELDS, rows)
            curve_rows.extend(rows)
            say(f"step {steps}: mean area {np.mean([r['explored_area_m2'] for r in rows]):.2f} m2, "
                f"collisions {np.mean([r['collisions'] for r in rows]):.1f}")
            if cfg.eval_every > 0 and steps >= next_eval:
                if eval_worlds is None:
                    eval_worlds = [make_world(s, world_params, env_cfg.robot_radius_m) for s in cfg.eval_world_seeds()]
                row = {"step": steps, **evaluate_greedy(net, eval_worlds, env_cfg, cfg)}
                _append_csv(run_dir / "eval.csv", EVAL_FIELDS, [row])
                eval_rows.append(row)
                say(f"eval at {steps}: {row['mean_explored_area_m2']:.2f} m2")
                while next_eval <= steps:
                    next_eval += cfg.eval_every
            if cfg.checkpoint_every > 0 and steps >= next_ckpt:
                while next_ckpt <= steps:
                    next_ckpt += cfg.checkpoint_every
                checkpoint()
    finally:
        if pool is not None:
            pool.shutdown()
    checkpoint()
    return TrainResult(run_dir, net, steps, sum(wk.episodes for wk in workers), curve_rows, eval_rows)
