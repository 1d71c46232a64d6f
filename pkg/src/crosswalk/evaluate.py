"""Evaluation harness: gap-acceptance curve, test suites, scenario gallery,
and the per-step compute benchmark.

Suites use paired seeds: episode i is bit-identical across every evaluated
checkpoint, so per-episode metric differences are directly comparable.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .env import (
    COLLISION,
    GOAL,
    CrossingEnv,
    PedVariant,
    ScenarioConfig,
    format_record,
    sample_scenario,
    trace_header,
    trace_step_record,
)
from .pedestrian import (
    NEAR_SIDE,
    PedParams,
    PedestrianState,
    VehiclePose,
    pedestrian_step,
)
from .policy import PpoNet, SacNets, load_checkpoint, policy_from_checkpoint

CURB_DEPARTURE = 0.1  # m of movement off the curb that counts as initiation


# ------------------------------------------------------------ gap acceptance

def _gap_trial(gap: float, approach_speed: float, side: str,
               x_ped: float, scenario: ScenarioConfig,
               params: PedParams) -> bool:
    """One deterministic approach: does the pedestrian start crossing while
    the vehicle is still on its way?"""
    env = CrossingEnv(scenario=scenario, ped_params=params, phi_deg=0.0,
                      variant=PedVariant.AWARE)
    y_ped = -scenario.pavement_offset if side == "near" else scenario.pavement_offset
    ped = PedestrianState(
        p=np.array([x_ped, y_ped]), v=np.zeros(2), motivation=0.0,
        p0=np.array([x_ped, y_ped]), goal=np.array([x_ped, -y_ped]),
        side=NEAR_SIDE if side == "near" else "far")
    pose = VehiclePose(x=x_ped - gap * approach_speed - scenario.vehicle_half_length,
                       y=scenario.lane_center_y, v=approach_speed, a=0.0,
                       half_length=scenario.vehicle_half_length,
                       half_width=scenario.vehicle_half_width)
    env.reset_from(pose, ped)
    toward_goal = math.copysign(1.0, -y_ped)
    horizon = int((gap + 10.0) / scenario.dt)
    for _ in range(horizon):
        _, _, done, info = env.step(0.0)  # constant-speed approach
        departed = (info["y_p"] - y_ped) * toward_goal >= CURB_DEPARTURE
        if info["motivation"] > params.theta_f and departed:
            return True
        if info["x_v"] + scenario.vehicle_half_length >= info["x_p"]:
            return False  # vehicle arrived first
        if done:
            return False
    return False


def gap_acceptance_curve(gaps, approach_speed: float = 10.0, side: str = "near",
                         trials: int = 10, scenario: ScenarioConfig | None = None,
                         params: PedParams | None = None,
                         seed: int = 0) -> list[tuple[float, float]]:
    """Fraction of trials with crossing initiation before the vehicle arrives,
    per time gap. Trials vary the spawn point along the pavement (the model
    itself is deterministic, so the curve is a sharp threshold)."""
    scenario = scenario or ScenarioConfig()
    params = params or PedParams()
    rng = np.random.default_rng(seed)
    curve = []
    for gap in gaps:
        crossed = 0
        for _ in range(trials):
            x_ped = float(rng.uniform(0.3 * scenario.road_length,
                                      0.9 * scenario.road_length))
            crossed += _gap_trial(gap, approach_speed, side, x_ped, scenario,
                                  params)
        curve.append((float(gap), crossed / trials))
    return curve


def write_gapcurve_csv(path, curve, config_hash: str, seed: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# crosswalk={__version__} config={config_hash} seed={seed}\n")
        fh.write("gap_s,p_cross\n")
        for gap, p in curve:
            fh.write(f"{gap!r},{p!r}\n")


# ------------------------------------------------------------------ episodes

@dataclass
class EpisodeMetrics:
    index: int
    seed: int
    outcome: str
    completion_time: float        # s
    min_distance: float           # m, vehicle center to pedestrian
    max_jerk: float               # m/s^3 from commanded-acceleration diffs
    rms_jerk: float
    crossed_in_front: bool
    ep_reward: float


def act_fn_from_checkpoint(path):
    """Deterministic action function (and metadata) from a checkpoint file."""
    ck = load_checkpoint(path)
    net = policy_from_checkpoint(ck)
    if isinstance(net, PpoNet):
        def act(obs: np.ndarray) -> float:
            return float(np.clip(net.act(obs[None, :])[0, 0], -1.0, 1.0))
    else:
        assert isinstance(net, SacNets)

        def act(obs: np.ndarray) -> float:
            return float(net.act(obs[None, :])[0, 0])
    return act, ck


def run_episode(env: CrossingEnv, act, seed: int, side: str | None = None,
                index: int = 0, collect_trace: bool = False):
    """Roll one deterministic episode; returns metrics (and trace records)."""
    scenario = env.scenario
    obs = env.reset(seed=seed, side=side)
    min_dist = float(np.hypot(env.ped.p[0] - env.pose.x, env.ped.p[1] - env.pose.y))
    accels = []
    crossed_in_front = False
    total_reward = 0.0
    records = []
    done = False
    info = {}
    while not done:
        obs, bd, done, info = env.step(act(obs))
        total_reward += bd.r_total
        accels.append(info["a_cmd"])
        dist = math.hypot(info["x_p"] - info["x_v"], info["y_p"] - env.pose.y)
        min_dist = min(min_dist, dist)
        in_lane = abs(info["y_p"] - scenario.lane_center_y) <= scenario.lane_width / 2
        ahead = info["x_p"] > info["x_v"] + scenario.vehicle_half_length
        crossed_in_front = crossed_in_front or (in_lane and ahead)
        if collect_trace:
            records.append(trace_step_record(info))
    jerks = np.abs(np.diff(accels)) / scenario.dt if len(accels) > 1 else np.zeros(1)
    metrics = EpisodeMetrics(
        index=index, seed=seed, outcome=info["event"],
        completion_time=info["step"] * scenario.dt,
        min_distance=min_dist,
        max_jerk=float(jerks.max()),
        rms_jerk=float(np.sqrt(np.mean(jerks**2))),
        crossed_in_front=crossed_in_front,
        ep_reward=total_reward)
    return (metrics, records) if collect_trace else metrics


# -------------------------------------------------------------------- suites

@dataclass
class SuiteConfig:
    suite: str = "aware"            # "aware" or "unaware"
    episodes: int = 1000
    seed_base: int = 100_000
    threads: int = 1

    def __post_init__(self):
        if self.suite not in ("aware", "unaware"):
            raise ValueError(f"unknown suite {self.suite!r}")
        if self.episodes % 2:
            raise ValueError("episode count must be even (balanced directions)")


def _episode_side(i: int) -> str:
    # exact 50/50 split between crossing directions
    return "top" if i % 2 == 0 else "bottom"


def _suite_variant(suite: str) -> PedVariant:
    return PedVariant.AWARE if suite == "aware" else PedVariant.UNAWARE


def _suite_chunk(args):
    (ckpt_path, suite, seed_base, indices, scenario, ped_params) = args
    act, ck = act_fn_from_checkpoint(ckpt_path)
    env = CrossingEnv(scenario=scenario, ped_params=ped_params,
                      phi_deg=ck.phi_deg, variant=_suite_variant(suite))
    return [run_episode(env, act, seed=seed_base + i, side=_episode_side(i),
                        index=i) for i in indices]


def run_suite(cfg: SuiteConfig, checkpoint_paths,
              scenario: ScenarioConfig | None = None,
              ped_params: PedParams | None = None) -> dict:
    """Evaluate each checkpoint on the paired-seed episode set.

    Returns {checkpoint path: {"aggregate": {...}, "episodes": [EpisodeMetrics]}}.
    """
    scenario = scenario or ScenarioConfig()
    ped_params = ped_params or PedParams()
    results = {}
    for path in checkpoint_paths:
        indices = list(range(cfg.episodes))
        if cfg.threads > 1:
            chunks = np.array_split(indices, cfg.threads * 4)
            args = [(path, cfg.suite, cfg.seed_base, list(chunk), scenario,
                     ped_params) for chunk in chunks if len(chunk)]
            with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
                episode_lists = list(pool.map(_suite_chunk, args))
            episodes = [m for chunk in episode_lists for m in chunk]
        else:
            episodes = _suite_chunk((path, cfg.suite, cfg.seed_base, indices,
                                     scenario, ped_params))
        episodes.sort(key=lambda m: m.index)
        results[str(path)] = {
            "aggregate": aggregate_metrics(episodes),
            "episodes": episodes,
        }
    return results


def aggregate_metrics(episodes) -> dict:
    """Pure fold over per-episode records (recomputable from traces)."""
    n = len(episodes)
    return {
        "episodes": n,
        "success_rate": sum(m.outcome == GOAL for m in episodes) / n,
        "collision_rate": sum(m.outcome == COLLISION for m in episodes) / n,
        "mean_completion_time": float(np.mean([m.completion_time for m in episodes])),
        "mean_min_distance": float(np.mean([m.min_distance for m in episodes])),
        "mean_max_jerk": float(np.mean([m.max_jerk for m in episodes])),
        "mean_rms_jerk": float(np.mean([m.rms_jerk for m in episodes])),
        "crossed_in_front_rate": sum(m.crossed_in_front for m in episodes) / n,
        "mean_ep_reward": float(np.mean([m.ep_reward for m in episodes])),
    }


SUMMARY_COLUMNS = ("checkpoint", "algo", "phi_deg", "suite", "episodes",
                   "success_rate", "collision_rate", "mean_completion_time",
                   "mean_min_distance", "mean_max_jerk", "mean_rms_jerk",
                   "crossed_in_front_rate", "mean_ep_reward")


def write_suite_outputs(out_dir, cfg: SuiteConfig, results: dict,
                        config_hash: str) -> None:
    """summary.csv (per-checkpoint aggregates), episodes.jsonl (records),
    and sidecar schema files documenting every column."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "summary.csv", "w", encoding="utf-8") as fh:
        fh.write(f"# crosswalk={__version__} config={config_hash} seed={cfg.seed_base}\n")
        fh.write(",".join(SUMMARY_COLUMNS) + "\n")
        for path, res in results.items():
            ck = load_checkpoint(path)
            agg = res["aggregate"]
            cells = [Path(path).name, ck.algo, repr(ck.phi_deg), cfg.suite,
                     str(agg["episodes"])]
            cells += [repr(agg[c]) for c in SUMMARY_COLUMNS[5:]]
            fh.write(",".join(cells) + "\n")
    with open(out_dir / "episodes.jsonl", "w", encoding="utf-8") as fh:
        header = {"type": "header", "version": __version__,
                  "config_hash": config_hash, "seed": cfg.seed_base,
                  "suite": cfg.suite}
        fh.write(format_record(header) + "\n")
        for path, res in results.items():
            for m in res["episodes"]:
                rec = {"type": "episode", "checkpoint": Path(path).name}
                rec.update(asdict(m))
                fh.write(format_record(rec) + "\n")
    _write_schemas(out_dir)


def _write_schemas(out_dir: Path) -> None:
    schema = {
        "summary.csv": {
            "comment_line": "# crosswalk=<version> config=<config hash> seed=<seed base>",
            "columns": {
                "checkpoint": "checkpoint file name",
                "algo": "training algorithm tag (ppo/sac)",
                "phi_deg": "social value angle in degrees",
                "suite": "pedestrian variant used (aware/unaware)",
                "episodes": "episode count",
                "success_rate": "fraction of episodes ending at the road end without collision",
                "collision_rate": "fraction of episodes ending in collision",
                "mean_completion_time": "mean episode duration, seconds",
                "mean_min_distance": "mean over episodes of the minimum vehicle-pedestrian distance, m",
                "mean_max_jerk": "mean over episodes of max |d a_cmd/dt|, m/s^3",
                "mean_rms_jerk": "mean over episodes of RMS jerk, m/s^3",
                "crossed_in_front_rate": "fraction of episodes where the pedestrian entered the lane ahead of the front bumper",
                "mean_ep_reward": "mean undiscounted episode return (SVO-blended)",
            },
        },
        "episodes.jsonl": {
            "line_1": "header record {type, version, config_hash, seed, suite}",
            "record": "one JSON object per (checkpoint, episode) with EpisodeMetrics fields",
        },
        "gapcurve.csv": {
            "comment_line": "# crosswalk=<version> config=<config hash> seed=<seed>",
            "columns": {"gap_s": "time gap in seconds",
                        "p_cross": "fraction of trials with crossing initiation before vehicle arrival"},
        },
        "trace.jsonl": {
            "line_1": "header record {type, version, config_hash, seed, phi_deg, variant}",
            "record": {"t": "step index (dt=0.1 s)", "x_v": "vehicle center x, m",
                       "v_v": "vehicle speed, m/s", "a_cmd": "commanded acceleration, m/s^2",
                       "x_p": "pedestrian x, m", "y_p": "pedestrian y, m",
                       "vx_p": "pedestrian vx, m/s", "vy_p": "pedestrian vy, m/s",
                       "M": "motivation in [0,1]", "r_car": "ego reward term",
                       "r_p": "pedestrian reward term", "r_total": "blended reward",
                       "event": "running|collision|goal|timeout"},
        },
    }
    with open(out_dir / "schema.json", "w", encoding="utf-8") as fh:
        json.dump(schema, fh, indent=2)
        fh.write("\n")


# ------------------------------------------------------------------- gallery

GALLERY_MEDIUM_ACCELS = (-1.5, 0.0, 1.5)  # m/s^2, scripted approach profiles


def _gallery_cases(scenario: ScenarioConfig):
    # Fixed-vehicle showcases park the car on the road centerline so both
    # crossing directions face the same geometry; the driving classes keep
    # the lane placement. Yields (name, v0, accel, vehicle x, vehicle y,
    # pedestrian geometry).
    x0 = scenario.road_length / 2.0
    for direction in ("bottom", "top"):
        y = -scenario.pavement_offset if direction == "bottom" else scenario.pavement_offset
        lateral = {"p0": (x0, y), "goal": (x0, -y)}
        yield f"fixed_lateral_{direction}", 0.0, 0.0, x0, 0.0, lateral
        frontal = {"p0": (x0 + 8.0, 0.0), "goal": (x0 - 8.0, 0.0)}
        yield f"fixed_frontal_{direction}", 0.0, 0.0, x0, 0.0, frontal
        for v0 in (1.0, 3.0, 5.0):
            yield (f"slow_v{v0:g}_{direction}", v0, 0.0,
                   x0 - 3.0 * v0 - scenario.vehicle_half_length,
                   scenario.lane_center_y, lateral)
        for accel in GALLERY_MEDIUM_ACCELS:
            v0 = 12.5
            yield (f"medium_a{accel:+g}_{direction}", v0, accel,
                   x0 - 3.0 * v0 - scenario.vehicle_half_length,
                   scenario.lane_center_y, lateral)


def scenario_gallery(out_dir, scenario: ScenarioConfig | None = None,
                     params: PedParams | None = None,
                     config_hash: str = "default") -> list[Path]:
    """Scripted vehicle profiles against the full pedestrian model; one
    trace file per scenario class and crossing direction.

    Pure pedestrian-model showcase: no episode termination, the walker runs
    until it reaches its goal (event "goal") or the step budget ends
    ("timeout"). Reward columns are the would-be egoistic terms.
    """
    scenario = scenario or ScenarioConfig()
    params = params or PedParams()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, v0, accel, x_v, y_v, geometry in _gallery_cases(scenario):
        p0 = np.array(geometry["p0"], dtype=float)
        goal = np.array(geometry["goal"], dtype=float)
        near = (p0[1] < 0) == (scenario.lane_center_y < 0)
        ped = PedestrianState(p=p0.copy(), v=np.zeros(2), motivation=0.0,
                              p0=p0.copy(), goal=goal,
                              side=NEAR_SIDE if near else "far")
        pose = VehiclePose(x=x_v, y=y_v, v=v0, a=accel,
                           half_length=scenario.vehicle_half_length,
                           half_width=scenario.vehicle_half_width)
        header = trace_header("gallery", config_hash, 0.0, "aware", __version__)
        header["y_v"] = y_v  # vehicle lateral placement is fixed per scenario
        records = [header]
        horizon = scenario.max_steps
        for step in range(1, horizon + 1):
            v_new = min(max(pose.v + accel * scenario.dt, 0.0), scenario.v_ceiling)
            pose = VehiclePose(pose.x + v_new * scenario.dt, pose.y, v_new,
                               accel, pose.half_length, pose.half_width)
            ped = pedestrian_step(ped, pose, params, scenario.dt)
            reached = bool(np.linalg.norm(ped.p - goal) < 0.2)
            event = "goal" if reached else ("timeout" if step == horizon else "running")
            records.append({
                "type": "step", "t": step, "x_v": pose.x, "v_v": pose.v,
                "a_cmd": accel, "x_p": float(ped.p[0]), "y_p": float(ped.p[1]),
                "vx_p": float(ped.v[0]), "vy_p": float(ped.v[1]),
                "M": ped.motivation, "r_car": -0.4, "r_p": 0.0,
                "r_total": -0.4, "event": event})
            if reached:
                break
        path = out_dir / f"{name}.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(format_record(rec) + "\n")
        paths.append(path)
    _write_schemas(out_dir)
    return paths


# ----------------------------------------------------------------- benchmark

def ped_benchmark(steps: int = 100_000, seed: int = 0,
                  params: PedParams | None = None) -> dict:
    """Wall-time distribution of single pedestrian steps over random states."""
    if steps < 1000:
        raise ValueError("need at least 1000 steps for stable timing")
    params = params or PedParams()
    rng = np.random.default_rng(seed)
    pool = 512
    states = [PedestrianState(p=rng.uniform(-20, 60, 2), v=rng.uniform(-2, 2, 2),
                              motivation=float(rng.uniform(0, 1)),
                              p0=rng.uniform(-20, 60, 2),
                              goal=rng.uniform(-20, 60, 2),
                              side=NEAR_SIDE if rng.integers(2) else "far")
              for _ in range(pool)]
    poses = [VehiclePose(x=float(rng.uniform(0, 60)), y=-1.5,
                         v=float(rng.uniform(0, 18)),
                         a=float(rng.uniform(-2.9, 2.9))) for _ in range(pool)]
    samples = np.empty(steps)
    for i in range(steps):
        s = states[i % pool]
        pose = poses[(i * 7) % pool]
        t0 = time.perf_counter_ns()
        pedestrian_step(s, pose, params, 0.1)
        samples[i] = time.perf_counter_ns() - t0
    ms = samples / 1e6
    return {
        "steps": steps,
        "median_ms": float(np.median(ms)),
        "p95_ms": float(np.percentile(ms, 95)),
        "mean_ms": float(np.mean(ms)),
    }
