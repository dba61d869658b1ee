"""Run configuration: defaults <- INI file <- ``section.key=value`` overrides.

The file format is plain INI, one section per component::

    [train]
    learning_rate = 0.0003
    num_workers = 4

    [net]
    channels = 8, 16, 32, 32

Values are parsed according to the type of the field's default; ``none``
clears optional fields and tuples are comma separated.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .agent import NetConfig
from .env import EnvConfig
from .geometry import CameraModel
from .mapping import MapConfig
from .noise import NoiseSpec
from .reward import RewardConfig
from .sensor import SensorNoise
from .trainer import TrainConfig
from .world import WorldGenParams


class ConfigError(ValueError):
    pass


@dataclass
class EvalSettings:
    stratum: str = "both"
    starts_per_stratum: int = 200
    episodes_per_start: int = 1
    mode: str = "greedy"  # greedy, stochastic or both
    num_worlds: int = 4
    world_seed_base: int = 2_000_000  # disjoint from training and validation worlds
    seed: int = 0
    render_episodes: int = 2

    def validate(self) -> None:
        if self.stratum not in ("rooms", "corridors", "both"):
            raise ConfigError(f"eval.stratum must be rooms, corridors or both, not {self.stratum!r}")
        if self.mode not in ("greedy", "stochastic", "both"):
            raise ConfigError(f"eval.mode must be greedy, stochastic or both, not {self.mode!r}")
        if self.starts_per_stratum < 1 or self.episodes_per_start < 1 or self.num_worlds < 1:
            raise ConfigError("eval counts must be positive")

    def world_seeds(self) -> list[int]:
        return [self.world_seed_base + i for i in range(self.num_worlds)]


@dataclass
class RunConfig:
    world: WorldGenParams = field(default_factory=WorldGenParams)
    camera: CameraModel = field(default_factory=CameraModel)
    maps: MapConfig = field(default_factory=MapConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    sensor_noise: SensorNoise = field(default_factory=SensorNoise)
    net: NetConfig = field(default_factory=NetConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalSettings = field(default_factory=EvalSettings)
    odometry_noise: NoiseSpec = field(default_factory=NoiseSpec)

    def env_config(self) -> EnvConfig:
        return EnvConfig(camera=self.camera, maps=self.maps, reward=self.reward, sensor_noise=self.sensor_noise,
                         robot_radius_m=self.world.robot_radius_m, episode_len=self.train.episode_len)

    def validate(self) -> None:
        try:
            self.world.validate()
            self.maps.validate()
            self.net.validate()
            self.train.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        self.eval.validate()
        if set(self.eval.world_seeds()) & (set(self.train.train_world_seeds()) | set(self.train.eval_world_seeds())):
            raise ConfigError("evaluation worlds overlap training or validation worlds")

    def with_seed(self, seed: int) -> "RunConfig":
        """One seed flag drives network init, training streams and the evaluation start set."""
        return replace(self, net=replace(self.net, seed=seed), train=replace(self.train, seed=seed),
                       eval=replace(self.eval, seed=seed))


SECTIONS = [f.name for f in fields(RunConfig)]


def _parse(text: str, default, name: str):
    s = text.strip()
    if s.lower() == "none":
        return None
    try:
        if isinstance(default, bool):
            low = s.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(s)
        if isinstance(default, int):
            return int(s)
        if isinstance(default, float) or default is None:
            return float(s)
        if isinstance(default, tuple):
            return tuple(int(x) for x in s.replace("(", "").replace(")", "").split(",") if x.strip())
        return s
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r}") from None


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _section(cfg: RunConfig, name: str):
    if name not in SECTIONS:
        raise ConfigError(f"unknown config section [{name}]; known: {', '.join(SECTIONS)}")
    return getattr(cfg, name)


def apply_values(cfg: RunConfig, section: str, values: dict[str, str]) -> RunConfig:
    obj = _section(cfg, section)
    known = {f.name: f for f in fields(obj)}
    updates = {}
    for key, text in values.items():
        if key not in known:
            raise ConfigError(f"unknown key {section}.{key}")
        default = getattr(obj, key)
        updates[key] = _parse(text, default, f"{section}.{key}")
    try:
        new = replace(obj, **updates)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc
    return replace(cfg, **{section: new})


def load_config(path=None, overrides: list[str] | None = None) -> RunConfig:
    cfg = RunConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        parser.optionxform = str  # keep key case
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for sec in parser.sections():
            cfg = apply_values(cfg, sec, dict(parser[sec]))
    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        lhs, value = item.split("=", 1)
        sec, key = lhs.strip().split(".", 1)
        cfg = apply_values(cfg, sec, {key: value})
    return cfg


def to_ini(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser()
    parser.optionxform = str
    for name in SECTIONS:
        obj = getattr(cfg, name)
        parser[name] = {f.name: _format(getattr(obj, f.name)) for f in fields(obj)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def save_config(cfg: RunConfig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_ini(cfg))
    return path


def as_dict(cfg: RunConfig) -> dict:
    out = dataclasses.asdict(cfg)
    cam = out["camera"]
    cam["pitch_deg"] = math.degrees(cam["pitch_rad"])
    return out
