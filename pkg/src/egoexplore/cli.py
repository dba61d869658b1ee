"""egoexplore command line: genworld, train, eval, plot.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, agent, pnm, render
from .config import ConfigError, RunConfig, load_config, save_config
from .evaluation import summary_table, sweep
from .mapping import export_maps
from .trainer import CURVE_FIELDS, NetActor, RandomActor, make_world, read_csv, smooth, train
from .world import build_graph, floorplan_to_gray, generate_floorplan, save_floorplan

log = logging.getLogger("egoexplore")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _versions() -> dict:
    import scipy
    import torch
    return {"egoexplore": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "torch": torch.__version__}


def _prepare(args) -> tuple[RunConfig, Path]:
    cfg = load_config(args.config, args.set)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    cfg.validate()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_config(cfg, out / "config.ini")
    (out / "versions.json").write_text(json.dumps(_versions(), indent=2))
    return cfg, out


def cmd_genworld(args) -> int:
    cfg, out = _prepare(args)
    base = cfg.train.world_seed_base if args.seed is None else args.seed
    for seed in range(base, base + args.count):
        plan = generate_floorplan(seed, cfg.world)
        graph = build_graph(plan, cfg.world.robot_radius_m)
        pgm, _ = save_floorplan(plan, out / f"world_{seed}", cfg.world)
        preview, _ = render.trajectory_image(plan, None, [], scale=1)
        pnm.write_ppm(out / f"world_{seed}_preview.ppm", preview)
        print(f"world {seed}: {plan.width_cells}x{plan.height_cells} cells, "
              f"nodes={graph.num_nodes} edges={graph.num_edges} -> {pgm}")
    return 0


def cmd_train(args) -> int:
    cfg, out = _prepare(args)
    if args.total_steps is not None:
        cfg = replace(cfg, train=replace(cfg.train, total_steps=args.total_steps))
        save_config(cfg, out / "config.ini")
    res = train(cfg.train, out, env_cfg=cfg.env_config(), net_cfg=cfg.net, world_params=cfg.world,
                resume=args.resume, progress=print)
    print(f"trained {res.steps} steps over {res.episodes} episodes; checkpoint {out / 'policy.bin'}")
    return 0


def _actors(cfg: RunConfig, checkpoint) -> list:
    if checkpoint is None:
        return [RandomActor()]
    net = agent.PolicyNet(cfg.net)
    agent.load_checkpoint(net, checkpoint)
    modes = ["greedy", "stochastic"] if cfg.eval.mode == "both" else [cfg.eval.mode]
    actors = []
    for m in modes:
        a = NetActor(net, greedy=(m == "greedy"))
        a.policy_id = f"net:{Path(checkpoint).parent.name or 'policy'}"
        actors.append(a)
    return actors


def cmd_eval(args) -> int:
    if args.checkpoint is not None and not Path(args.checkpoint).exists():
        raise FileNotFoundError(f"checkpoint {args.checkpoint} not found")
    cfg, out = _prepare(args)
    if args.starts is not None:
        cfg = replace(cfg, eval=replace(cfg.eval, starts_per_stratum=args.starts))
        save_config(cfg, out / "config.ini")
    worlds = [make_world(s, cfg.world, cfg.world.robot_radius_m) for s in cfg.eval.world_seeds()]
    actors = _actors(cfg, args.checkpoint)
    if args.random_baseline and args.checkpoint is not None:
        actors.append(RandomActor())
    reports = []
    for actor in actors:
        rep, logs = sweep(actor, worlds, cfg.eval.stratum, noise=cfg.odometry_noise,
                          episodes_per_start=cfg.eval.episodes_per_start, starts_per_stratum=cfg.eval.starts_per_stratum,
                          seed=cfg.eval.seed, env_cfg=cfg.env_config(), keep_logs=True)
        tag = f"{actor.name}"
        rep.write_csv(out / f"episodes_{tag}.csv")
        for i, ep in enumerate(logs[:cfg.eval.render_episodes]):
            plan = worlds[[w.seed for w in worlds].index(ep.world_seed)].plan
            img, n = render.trajectory_image(plan, ep.world_map, ep.poses)
            pnm.write_ppm(out / f"trajectory_{tag}_{i}.ppm", img)
            if args.debug_dumps and ep.maps is not None:
                export_maps(ep.maps, out / f"maps_{tag}_{i}")
        reports.append(rep)
    table = summary_table(reports)
    (out / "summary.txt").write_text(table + "\n")
    print(table)
    if args.debug_dumps:
        _dump_first_frame(cfg, worlds, out)
    return 0


def _dump_first_frame(cfg: RunConfig, worlds, out: Path) -> None:
    from .env import ExplorationEnv
    from .evaluation import start_set
    st = start_set(worlds, "rooms", 1, cfg.eval.seed)[0]
    w = worlds[st.world_index]
    env = ExplorationEnv(w.plan, w.graph, cfg.env_config())
    env.reset(st.pose, seed=st.episode_seed)
    img = env.sense()
    pnm.write_pgm(out / "debug_segmentation.pgm", img.to_gray())
    pnm.write_pgm(out / "debug_floorplan.pgm", floorplan_to_gray(w.plan))


def cmd_plot(args) -> int:
    rows = read_csv(args.csv)
    if rows and args.column not in rows[0]:
        raise ValueError(f"{args.csv}: no column {args.column!r} (have {', '.join(rows[0])})")
    try:
        raw = np.array([float(r[args.column]) for r in rows])
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{args.csv}: malformed value in column {args.column!r}") from exc
    sm = smooth(raw, args.smoothing) if len(raw) else raw
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.csv).stem
    pnm.write_ppm(out / f"{stem}_{args.column}.ppm", render.curve_image(raw, sm))
    with (out / f"{stem}_{args.column}_smoothed.csv").open("w") as fh:
        fh.write("index,raw,smoothed\n")
        for i, (a, b) in enumerate(zip(raw, sm)):
            fh.write(f"{i},{float(a)!r},{float(b)!r}\n")
    print(f"plotted {len(raw)} points from {args.csv}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--seed", type=int, help="seed for worlds, network and evaluation starts")
    common.add_argument("--out-dir", default="out", help="output directory")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config value (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="egoexplore", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("genworld", parents=[common], help="generate floorplans")
    g.add_argument("--count", type=int, default=1)
    g.set_defaults(func=cmd_genworld)

    t = sub.add_parser("train", parents=[common], help="train the exploration policy")
    t.add_argument("--total-steps", type=int)
    t.add_argument("--resume", action="store_true", help="continue from the checkpoint in --out-dir")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", parents=[common], help="start-point sweep")
    e.add_argument("--checkpoint", help="policy.bin; omit to evaluate the random policy")
    e.add_argument("--starts", type=int, help="starts per stratum")
    e.add_argument("--random-baseline", action="store_true", help="also run the random policy on the same starts")
    e.add_argument("--debug-dumps", action="store_true", help="write segmentation and map images")
    e.set_defaults(func=cmd_eval)

    pl = sub.add_parser("plot", parents=[common], help="reward curve image from a CSV")
    pl.add_argument("--csv", required=True)
    pl.add_argument("--column", default="episode_return", choices=CURVE_FIELDS + ["mean_explored_area_m2", "mean_return"])
    pl.add_argument("--smoothing", type=float, default=0.85)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"egoexplore: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "count", 1) < 1 or getattr(args, "smoothing", 0.0) < 0 or getattr(args, "smoothing", 0.0) >= 1:
        print("egoexplore: error: --count must be >= 1 and --smoothing in [0, 1)", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"egoexplore: config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        log.debug("failure", exc_info=True)
        print(f"egoexplore: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
