"""Command-line entry points: train, eval, and replay.

Outputs land under <out-root>/<run-id>/ with the validated config echoed
next to them, so any run is reproducible from (config echo, seed) alone.
The output root is --out, else $MERGESIM_OUT, else the config's out_dir.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, config_hash, load_config, save_config
from .mappo import evaluate, load_checkpoint, save_checkpoint, train
from .metrics import coil_tms, eval_summary, pet
from .replay import ReplayError, read_episode, write_episode


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _out_root(args, config: RunConfig) -> Path:
    if args.out:
        return Path(args.out)
    env_root = os.environ.get("MERGESIM_OUT")
    if env_root:
        return Path(env_root)
    return Path(config.out_dir)


def _apply_overrides(config: RunConfig, args) -> RunConfig:
    if getattr(args, "mode", None):
        config.env.mode = args.mode
    if getattr(args, "hetero", False):
        config.env.heterogeneous = True
    if getattr(args, "steps", None) is not None:
        config.train.total_steps = args.steps
    if getattr(args, "seed", None) is not None:
        config.train.seeds = [args.seed]
    if getattr(args, "no_sem", False):
        config.toggles.sem_enabled = False
    if getattr(args, "no_igm", False):
        config.toggles.igm_enabled = False
        config.toggles.sem_enabled = False  # the shield needs intents
    if getattr(args, "curriculum_from", None):
        config.toggles.curriculum_from = args.curriculum_from
    return config.validate()


def _run_tag(config: RunConfig) -> str:
    bits = [config.env.mode]
    if config.env.heterogeneous:
        bits.append("hetero")
    if not config.toggles.sem_enabled:
        bits.append("nosem")
    elif not config.toggles.igm_enabled:
        bits.append("noigm")
    bits.append(config_hash(config)[:8])
    return "-".join(bits)


def _metrics_files(out_dir: Path, records, layout) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = eval_summary(records, layout)
    _write_csv(
        out_dir / "summary.csv",
        ["episodes", "mean_return", "collision_rate", "average_speed", "mean_pet"],
        [[summary["episodes"], summary["mean_return"], summary["collision_rate"],
          summary["average_speed"], summary["mean_pet"]]],
    )
    _write_csv(out_dir / "pet.csv", ["pet_s"], [[v] for v in pet(records, layout)])
    grid = coil_tms(records, layout)
    n_windows = grid.speeds.shape[1]
    header = ["coil"] + [f"window_{w}" for w in range(n_windows)]
    rows = []
    for ci, coil in enumerate(grid.coils):
        rows.append([coil] + [float(grid.speeds[ci, w]) for w in range(n_windows)])
    _write_csv(out_dir / "tms.csv", header, rows)
    breakdown_rows = []
    for ci, coil in enumerate(grid.coils):
        breakdown_rows.append([coil] + [int(grid.breakdown[ci, w]) for w in range(n_windows)])
    _write_csv(out_dir / "tms_breakdown.csv", header, breakdown_rows)
    return summary


def cmd_train(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    tc = config.build_train_config()
    out_dir = _out_root(args, config) / f"train-{_run_tag(config)}"
    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    save_config(config, out_dir / "config.json")
    chash = config_hash(config)
    for seed in tc.seeds:
        init = None
        if tc.curriculum_from:
            init, meta = load_checkpoint(tc.curriculum_from)
            print(f"[seed {seed}] curriculum init from {tc.curriculum_from} (step {meta['step']})")
        env = config.build_env()
        eval_env = config.build_env()
        result = train(tc, env, eval_env, seed, init=init)
        ckpt_path = ckpt_dir / f"seed{seed}.npz"
        save_checkpoint(ckpt_path, result, seed=seed, step=result.total_steps, config_hash=chash)
        _write_csv(
            out_dir / f"curves_seed{seed}.csv",
            ["step", "mean_reward", "avg_speed", "collision_rate"],
            [[row["step"], row["mean_reward"], row["avg_speed"], row["collision_rate"]]
             for row in result.curve],
        )
        last = result.curve[-1]
        print(
            f"[seed {seed}] {result.total_steps} steps, final eval reward "
            f"{last['mean_reward']:.2f}, collision rate {last['collision_rate']:.3f} -> {ckpt_path}"
        )
    print(f"outputs in {out_dir}")
    return 0


def cmd_eval(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    if args.episodes <= 0:
        print("error: --episodes must be positive", file=sys.stderr)
        return 2
    policy, meta = load_checkpoint(args.checkpoint)
    obs_dim = config.env.n_obs_vehicles * 5
    expected = {"obs_dim": obs_dim, "n_actions": 5, "global_dim": 6 * obs_dim,
                "hidden": config.train.hidden}
    if meta["architecture"] != expected:
        print(
            f"error: checkpoint architecture {meta['architecture']} does not match "
            f"the configuration {expected}",
            file=sys.stderr,
        )
        return 2
    seed_base = (args.seed if args.seed is not None else config.train.seeds[0]) * 1_000_000
    out_dir = _out_root(args, config) / f"eval-{_run_tag(config)}-seed{args.seed if args.seed is not None else config.train.seeds[0]}"
    replay_dir = out_dir / "replays"
    replay_dir.mkdir(parents=True, exist_ok=True)
    save_config(config, out_dir / "config.json")
    env = config.build_env(record=True)
    _, _, _, records = evaluate(env, policy, args.episodes, seed_base=seed_base, record=True)
    for i, record in enumerate(records):
        write_episode(replay_dir / f"ep{i:04d}.jsonl", record)
    summary = _metrics_files(out_dir / "metrics", records, config.build_layout())
    print(
        f"{int(summary['episodes'])} episodes: mean return {summary['mean_return']:.2f}, "
        f"collision rate {summary['collision_rate']:.4f}, "
        f"average speed {summary['average_speed']:.2f} m/s"
    )
    print(f"outputs in {out_dir}")
    return 0


def cmd_replay(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    path = Path(args.log)
    paths = sorted(path.glob("*.jsonl")) if path.is_dir() else [path]
    if not paths:
        print(f"error: no replay logs at {path}", file=sys.stderr)
        return 2
    try:
        records = [read_episode(p) for p in paths]
    except ReplayError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    out_dir = _out_root(args, config) / f"replay-{_run_tag(config)}"
    summary = _metrics_files(out_dir / "metrics", records, config.build_layout())
    for p, record in zip(paths, records):
        corrections = sum(len(d.get("corrections", [])) for d in record.decisions)
        print(f"{p.name}: {record.n_steps} steps, terminal={record.terminal}, "
              f"corrections={corrections}")
    print(
        f"{int(summary['episodes'])} episodes: mean return {summary['mean_return']:.2f}, "
        f"collision rate {summary['collision_rate']:.4f}, "
        f"average speed {summary['average_speed']:.2f} m/s"
    )
    print(f"metrics in {out_dir / 'metrics'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mergesim",
        description="On-ramp merging simulator with intent sharing and a safety shield",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="JSON config file (defaults if omitted)")
        p.add_argument("--mode", choices=["easy", "hard"], default=None)
        p.add_argument("--hetero", action="store_true", help="heterogeneous HV styles")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--no-sem", action="store_true", help="disable the safety shield")
        p.add_argument("--no-igm", action="store_true", help="disable intent generation (and the shield)")
        p.add_argument("--out", default=None, help="output root (overrides $MERGESIM_OUT)")

    p_train = sub.add_parser("train", help="train the shared policy")
    common(p_train)
    p_train.add_argument("--steps", type=int, default=None, help="total decision steps per seed")
    p_train.add_argument("--curriculum-from", default=None, help="checkpoint to initialize from")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    common(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", type=int, default=30)
    p_eval.set_defaults(func=cmd_eval)

    p_replay = sub.add_parser("replay", help="recompute metrics from replay logs")
    common(p_replay)
    p_replay.add_argument("--log", required=True, help="replay .jsonl file or directory")
    p_replay.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
