"""Command-line entry point binding simulation, training and evaluation."""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, ToolkitConfig
from .env import CrossingEnv, PedVariant, format_record, trace_header, trace_step_record
from .evaluate import (
    SuiteConfig,
    gap_acceptance_curve,
    ped_benchmark,
    run_suite,
    scenario_gallery,
    write_gapcurve_csv,
    write_suite_outputs,
)
from .policy import CheckpointError
from .training import train

PAPER_SCALE_STEPS = {"ppo": 2_500_000, "sac": 250_000}
DESK_SCALE_STEPS = {"ppo": 300_000, "sac": 50_000}


def _out_dir(args) -> Path:
    base = args.out or os.environ.get("CROSSWALK_OUT", ".")
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_config(args) -> ToolkitConfig:
    if getattr(args, "config", None):
        return ToolkitConfig.load(args.config)
    return ToolkitConfig()


def cmd_train(args) -> int:
    cfg = _load_config(args)
    tc = dataclasses.replace(
        cfg.training,
        algo=args.algo or cfg.training.algo,
        phi_deg=args.svo if args.svo is not None else cfg.training.phi_deg)
    if args.steps:
        tc = dataclasses.replace(tc, total_steps=args.steps)
    elif args.paper_scale:
        tc = dataclasses.replace(tc, total_steps=PAPER_SCALE_STEPS[tc.algo])
    if args.no_curriculum:
        tc = dataclasses.replace(tc, curriculum=False)
    if args.checkpoint_every:
        tc = dataclasses.replace(tc, checkpoint_every=args.checkpoint_every)
    cfg = dataclasses.replace(cfg, training=tc)
    out = _out_dir(args)
    result = train(tc, seed=args.seed, out_dir=out, config_hash=cfg.hash(),
                   env_factory=_factory(cfg))
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"metrics:    {result.metrics_path}")
    return 0


def _factory(cfg: ToolkitConfig):
    from .training import default_env_factory
    return default_env_factory(cfg.scenario, cfg.pedestrian)


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    suite = dataclasses.replace(cfg.suite, suite=args.suite,
                                episodes=args.episodes or cfg.suite.episodes,
                                threads=args.threads)
    if args.seed is not None:
        suite = dataclasses.replace(suite, seed_base=args.seed)
    results = run_suite(suite, args.checkpoint, scenario=cfg.scenario,
                        ped_params=cfg.pedestrian)
    out = _out_dir(args)
    write_suite_outputs(out, suite, results, cfg.hash())
    for path, res in results.items():
        agg = res["aggregate"]
        print(f"{Path(path).name}: success={agg['success_rate']:.3f} "
              f"collisions={agg['collision_rate']:.3f} "
              f"min_dist={agg['mean_min_distance']:.2f} m "
              f"time={agg['mean_completion_time']:.2f} s")
    print(f"outputs in {out}")
    return 0


def cmd_gapcurve(args) -> int:
    cfg = _load_config(args)
    gaps = [float(g) for g in args.gaps.split(",")] if args.gaps else \
        [round(0.5 * k, 1) for k in range(1, 17)]
    curve = gap_acceptance_curve(gaps, approach_speed=args.speed,
                                 side=args.side, trials=args.trials,
                                 scenario=cfg.scenario, params=cfg.pedestrian,
                                 seed=args.seed or 0)
    out = _out_dir(args)
    write_gapcurve_csv(out / "gapcurve.csv", curve, cfg.hash(), args.seed or 0)
    for gap, p in curve:
        print(f"gap {gap:5.2f} s  P_cross {p:.3f}")
    print(f"wrote {out / 'gapcurve.csv'}")
    return 0


def cmd_pedbench(args) -> int:
    cfg = _load_config(args)
    stats = ped_benchmark(steps=args.steps, params=cfg.pedestrian)
    print(f"steps:  {stats['steps']}")
    print(f"median: {stats['median_ms']:.4f} ms")
    print(f"p95:    {stats['p95_ms']:.4f} ms")
    print(f"mean:   {stats['mean_ms']:.4f} ms")
    return 0


def cmd_gallery(args) -> int:
    cfg = _load_config(args)
    paths = scenario_gallery(_out_dir(args), scenario=cfg.scenario,
                             params=cfg.pedestrian, config_hash=cfg.hash())
    for p in paths:
        print(p)
    return 0


def cmd_rollout(args) -> int:
    cfg = _load_config(args)
    with open(args.actions, "r", encoding="utf-8") as fh:
        actions = json.load(fh)
    env = CrossingEnv(scenario=cfg.scenario, ped_params=cfg.pedestrian,
                      phi_deg=args.svo, variant=PedVariant(args.variant))
    env.reset(seed=args.seed)
    records = [trace_header(args.seed, cfg.hash(), args.svo, args.variant,
                            __version__)]
    for u in actions:
        _, _, done, info = env.step(float(u))
        records.append(trace_step_record(info))
        if done:
            break
    out_path = Path(args.out) if args.out else _out_dir(args) / "trace.jsonl"
    with open(out_path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(format_record(rec) + "\n")
    print(f"wrote {out_path} ({len(records) - 1} steps)")
    return 0


def cmd_env_bridge(args) -> int:
    from .bridge import serve
    cfg = _load_config(args)
    return serve(scenario=cfg.scenario, ped_params=cfg.pedestrian,
                 config_hash=cfg.hash())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crosswalk",
        description="Vehicle-pedestrian crossing simulation and SVO-shaped RL")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="toolkit config file")
        p.add_argument("--out", help="output directory (or $CROSSWALK_OUT)")

    p = sub.add_parser("train", help="train a policy")
    common(p)
    p.add_argument("--algo", choices=["ppo", "sac"], default=None)
    p.add_argument("--svo", type=float, default=None,
                   help="social value angle, degrees in [0, 90]")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--paper-scale", action="store_true",
                   help="use the full-scale step budget")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-curriculum", action="store_true")
    p.add_argument("--checkpoint-every", type=int, default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="run a test suite on checkpoints")
    common(p)
    p.add_argument("--checkpoint", nargs="+", required=True)
    p.add_argument("--suite", choices=["aware", "unaware"], default="aware")
    p.add_argument("--episodes", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="episode seed base")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("gapcurve", help="gap-acceptance curve")
    common(p)
    p.add_argument("--speed", type=float, default=10.0)
    p.add_argument("--side", choices=["near", "far"], default="near")
    p.add_argument("--gaps", help="comma-separated gaps in seconds")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gapcurve)

    p = sub.add_parser("pedbench", help="pedestrian step timing benchmark")
    common(p)
    p.add_argument("--steps", type=int, default=100_000)
    p.set_defaults(fn=cmd_pedbench)

    p = sub.add_parser("gallery", help="scripted interaction scenario traces")
    common(p)
    p.set_defaults(fn=cmd_gallery)

    p = sub.add_parser("rollout", help="replay a scripted action sequence")
    common(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--svo", type=float, default=0.0)
    p.add_argument("--variant", choices=[v.value for v in PedVariant],
                   default="aware")
    p.add_argument("--actions", required=True,
                   help="JSON file: list of normalised accelerations")
    p.set_defaults(fn=cmd_rollout)

    p = sub.add_parser("env-bridge",
                       help="serve the environment over stdio (NDJSON)")
    common(p)
    p.set_defaults(fn=cmd_env_bridge)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, CheckpointError, FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
