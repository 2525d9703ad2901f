"""Command-line entry point: ``plantnav {train,eval,export-scores,gen-world}``.

Exit codes: 0 success, 2 configuration/schema error, 3 world or data error,
4 numerical abort during training.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import platform
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

import plantnav
from plantnav import qnet
from plantnav.config import RunConfig, load_run_config, run_config_to_dict
from plantnav.errors import (
    CheckpointError,
    ConfigError,
    LayoutMismatchError,
    NumericalError,
    PlantnavError,
    WorldError,
)
from plantnav.evaluation import evaluate, moving_average, net_policy
from plantnav.features import FEATURE_LAYOUT_HASH
from plantnav.trainer import ResumeInfo, resume_info_path, train
from plantnav.world import (
    BoxObstacle,
    Vec3,
    WindParams,
    World,
    default_world,
    dumps_world,
    load_world,
    world_to_dict,
)

log = logging.getLogger("plantnav")

EXIT_OK, EXIT_CONFIG, EXIT_WORLD, EXIT_NUMERIC = 0, 2, 3, 4
LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(ConfigError):
    pass


def _setup_logging() -> None:
    name = os.environ.get("PLANTNAV_LOG_LEVEL", "warn").lower()
    if name not in LOG_LEVELS:
        raise UsageError(f"PLANTNAV_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}, got {name!r}")
    logging.basicConfig(level=LOG_LEVELS[name], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _resolve_config(args) -> RunConfig:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    train_cfg = cfg.train
    if args.seed is not None:
        train_cfg = replace(train_cfg, seed=args.seed)
    world = args.world if args.world is not None else cfg.world
    out = args.out if args.out is not None else cfg.out
    return RunConfig(world, out, train_cfg)


def _load_world(cfg: RunConfig) -> World:
    if cfg.world is None:
        raise UsageError("no world file given (use --world or the config's \"world\" key)")
    return load_world(cfg.world)


def _versions() -> dict:
    return {"plantnav": plantnav.__version__, "numpy": np.__version__, "python": platform.python_version()}


def cmd_train(args) -> int:
    cfg = _resolve_config(args)
    if args.episodes is not None:
        try:
            cfg = RunConfig(cfg.world, cfg.out, replace(cfg.train, episodes=args.episodes))
        except ConfigError as exc:
            raise UsageError(f"--episodes: {exc}") from None
    if cfg.out is None:
        raise UsageError("no output directory given (use --out or the config's \"out\" key)")
    world = _load_world(cfg)

    init_net, resume = None, None
    if args.resume:
        init_net = qnet.load_checkpoint(args.resume, expected_layout=FEATURE_LAYOUT_HASH)
        if init_net.layer_sizes != cfg.train.layer_sizes:
            raise UsageError(f"checkpoint layer sizes {init_net.layer_sizes} != config {cfg.train.layer_sizes}")
        sidecar = resume_info_path(args.resume)
        if sidecar.exists():
            resume = ResumeInfo.from_dict(json.loads(sidecar.read_text()))

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config": run_config_to_dict(cfg),
        "world_document": world_to_dict(world),
        "resume": args.resume,
        "versions": _versions(),
    }
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    def progress(res):
        if (res.episode + 1) % 100 == 0:
            log.info("episode %d score %.1f %s stage %d", res.episode, res.score, res.termination.value, res.stage)

    result = train(world, cfg.train, out, init_net=init_net, resume=resume, on_episode=progress)
    log.info("finished %d episodes; final stage %d", len(result.episodes), result.final_stage)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    n = 100 if args.episodes is None else args.episodes
    if n < 1:
        raise UsageError("--episodes must be >= 1 for eval")
    if not args.checkpoint:
        raise UsageError("eval needs --checkpoint")
    if cfg.out is None:
        raise UsageError("no output directory given (use --out)")
    world = _load_world(cfg)
    net = qnet.load_checkpoint(args.checkpoint, expected_layout=FEATURE_LAYOUT_HASH)
    summary, trajs = evaluate(world, net_policy(net, cfg.train), n, cfg.train.seed, cfg.train)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = {"checkpoint": str(args.checkpoint), "seed": cfg.train.seed, **summary.to_dict()}
    (out / "eval_summary.json").write_text(json.dumps(doc, indent=2) + "\n")
    width = len(str(n - 1))
    for i, t in enumerate(trajs):
        t.write_csv(out / f"trajectory_{i:0{width}d}.csv")
    return EXIT_OK


def read_episode_log(path: Path) -> tuple[list[int], list[float]]:
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise UsageError(f"cannot read episode log {path}: {exc.strerror}") from None
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"episode", "score"} <= set(reader.fieldnames):
            raise UsageError(f"{path}: missing episode/score columns")
        episodes, scores = [], []
        for line, row in enumerate(reader, start=2):
            try:
                episodes.append(int(row["episode"]))
                scores.append(float(row["score"]))
            except (TypeError, ValueError):
                raise UsageError(f"{path}:{line}: malformed row") from None
    return episodes, scores


def cmd_export_scores(args) -> int:
    window = 100 if args.window is None else args.window
    if window < 1:
        raise UsageError("--window must be >= 1")
    if args.log:
        src = Path(args.log)
        dest_dir = Path(args.out) if args.out else src.parent
    elif args.out:
        dest_dir = Path(args.out)
        src = dest_dir / "episodes.csv"
    else:
        raise UsageError("export-scores needs --out (run directory) or --log")
    episodes, scores = read_episode_log(src)
    avg = moving_average(scores, window)
    dest_dir.mkdir(parents=True, exist_ok=True)
    with open(dest_dir / "scores_avg.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["episode", "score", "avg_score"])
        for e, s, a in zip(episodes, scores, avg):
            w.writerow([e, repr(s), repr(a)])
    return EXIT_OK


def cmd_gen_world(args) -> int:
    if args.default:
        world = default_world()
    else:
        if args.dims is None:
            raise UsageError("gen-world needs --default or --dims")
        obstacles = []
        for i, spec in enumerate(args.obstacle or []):
            if len(spec) not in (6, 7):
                raise UsageError(f"--obstacle {i}: expected CX CY CZ SX SY SZ [COLOR]")
            try:
                nums = [int(v) for v in spec[:6]]
            except ValueError:
                raise UsageError(f"--obstacle {i}: coordinates must be integers") from None
            obstacles.append(BoxObstacle(Vec3(*nums[:3]), Vec3(*nums[3:]), spec[6] if len(spec) == 7 else "gray"))
        dx, dy = args.wind_dir
        wind = WindParams(args.wind_speed, (dx, dy, 0.0), args.height_gain, args.drift_reference)
        world = World(Vec3(*args.dims), tuple(obstacles), wind, args.target_clearance)
    text = dumps_world(world)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration JSON")
    common.add_argument("--world", help="world JSON (overrides the config)")
    common.add_argument("--out", help="output directory (gen-world: output file)")
    common.add_argument("--seed", type=int)
    common.add_argument("--resume", help="checkpoint to continue training from")
    common.add_argument("--episodes", type=int, help="training episodes / evaluation rollouts")
    common.add_argument("--window", type=int, help="moving-average window for export-scores")

    parser = argparse.ArgumentParser(prog="plantnav", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("train", parents=[common], help="train a DQN")
    p.set_defaults(func=cmd_train)
    p = sub.add_parser("eval", parents=[common], help="greedy evaluation of a checkpoint")
    p.add_argument("--checkpoint", help="checkpoint file to evaluate")
    p.set_defaults(func=cmd_eval)
    p = sub.add_parser("export-scores", parents=[common], help="moving-average score export")
    p.add_argument("--log", help="episode log (default: <out>/episodes.csv)")
    p.set_defaults(func=cmd_export_scores)
    p = sub.add_parser("gen-world", parents=[common], help="write a world JSON file")
    p.add_argument("--default", action="store_true", help="emit the bundled default world")
    p.add_argument("--dims", type=int, nargs=3, metavar=("X", "Y", "Z"))
    p.add_argument("--obstacle", nargs="+", action="append", metavar="V",
                   help="box as CX CY CZ SX SY SZ [COLOR]; repeatable")
    p.add_argument("--wind-speed", type=float, default=30.0)
    p.add_argument("--wind-dir", type=float, nargs=2, default=(1.0, 0.0), metavar=("DX", "DY"))
    p.add_argument("--height-gain", type=float, default=0.5)
    p.add_argument("--drift-reference", type=float, default=120.0)
    p.add_argument("--target-clearance", type=int, default=3)
    p.set_defaults(func=cmd_gen_world)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        _setup_logging()
        return args.func(args)
    except (LayoutMismatchError, ConfigError) as exc:
        print(f"plantnav: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (WorldError, CheckpointError) as exc:
        print(f"plantnav: world/data error: {exc}", file=sys.stderr)
        return EXIT_WORLD
    except NumericalError as exc:
        print(f"plantnav: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except PlantnavError as exc:  # pragma: no cover - remaining contract errors
        print(f"plantnav: error: {exc}", file=sys.stderr)
        return EXIT_WORLD


if __name__ == "__main__":
    sys.exit(main())
