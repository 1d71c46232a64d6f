"""Training drivers: two-phase pedestrian curriculum, metrics log, checkpoints.

Both algorithms train against the crossing environment with a reckless
pedestrian for the first half of the step budget and the full situational
model for the second half (the curriculum that pulls high-SVO agents out of
the egoistic local optimum). Everything is seeded and single-threaded, so a
(config, seed) pair reproduces runs byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .buffers import ReplayBuffer, RolloutBuffer
from .env import CrossingEnv, PedVariant, ScenarioConfig
from .pedestrian import PedParams
from .policy import Adam, Checkpoint, PpoNet, SacNets, save_checkpoint
from .ppo import action_logprob, ppo_update
from .sac import sac_update, sample_action


class TrainingDiverged(RuntimeError):
    """A loss went non-finite; diagnostics are attached to the message."""


@dataclass
class TrainConfig:
    algo: str = "ppo"                 # "ppo" or "sac"
    phi_deg: float = 0.0              # social value angle, degrees
    total_steps: int = 300_000        # desk scale; 2.5e6/2.5e5 at paper scale
    gamma: float = 0.99
    lr: float = 3e-4
    # ppo
    horizon: int = 2048
    clip_eps: float = 0.2
    epochs: int = 10
    minibatch: int = 64
    gae_lambda: float = 0.95
    vf_coef: float = 0.5
    ent_coef: float = 0.0
    n_envs: int = 8               # parallel rollout environments (PPO)
    max_grad_norm: float = 0.5    # update-level gradient clipping (PPO)
    log_std_init: float = 0.0     # initial exploration spread (PPO)
    # sac
    alpha: float = 0.2
    tau: float = 0.005
    batch_size: int = 256
    replay_capacity: int = 0          # 0 -> equal to total_steps
    update_after: int = 256
    # exploration and curriculum
    action_noise_std: float = 0.1
    curriculum: bool = True
    # bookkeeping
    log_every: int = 2048
    checkpoint_every: int = 0         # 0 -> final checkpoint only

    def __post_init__(self):
        if self.algo not in ("ppo", "sac"):
            raise ValueError(f"unknown algorithm {self.algo!r}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if not 0.0 <= self.phi_deg <= 90.0:
            raise ValueError("phi must be within [0, 90] degrees")


METRICS_COLUMNS = ("step", "phase", "mean_ep_len", "mean_ep_reward",
                   "loss_pi", "loss_v", "loss_q", "lr")


@dataclass
class TrainResult:
    checkpoint_path: Path
    metrics_path: Path
    checkpoints: list = field(default_factory=list)


def variant_at(step: int, cfg: TrainConfig) -> PedVariant:
    if not cfg.curriculum:
        return PedVariant.AWARE
    return PedVariant.RECKLESS if step < cfg.total_steps // 2 else PedVariant.AWARE


def phase_at(step: int, cfg: TrainConfig) -> int:
    return 1 if step < cfg.total_steps // 2 else 2


class _MetricsLog:
    def __init__(self, path: Path, meta_line: str):
        self.path = path
        self._fh = open(path, "w", encoding="utf-8")
        self._fh.write(meta_line + "\n")
        self._fh.write(",".join(METRICS_COLUMNS) + "\n")
        self.rows = 0

    def write(self, step, phase, ep_len, ep_rew, stats, lr):
        cells = [str(step), str(phase), repr(float(ep_len)), repr(float(ep_rew)),
                 repr(float(stats.get("loss_pi", math.nan))),
                 repr(float(stats.get("loss_v", math.nan))),
                 repr(float(stats.get("loss_q", math.nan))),
                 repr(float(lr))]
        self._fh.write(",".join(cells) + "\n")
        self.rows += 1

    def close(self):
        self._fh.close()


class _EpisodeTracker:
    """Running means of episode length/return over the current log window."""

    def __init__(self):
        self.cur_len = 0
        self.cur_ret = 0.0
        self.window_lens: list[int] = []
        self.window_rets: list[float] = []
        self.last_mean_len = math.nan
        self.last_mean_ret = math.nan

    def step(self, reward: float, done: bool):
        self.cur_len += 1
        self.cur_ret += reward
        if done:
            self.window_lens.append(self.cur_len)
            self.window_rets.append(self.cur_ret)
            self.cur_len = 0
            self.cur_ret = 0.0

    def flush(self):
        if self.window_lens:
            self.last_mean_len = float(np.mean(self.window_lens))
            self.last_mean_ret = float(np.mean(self.window_rets))
            self.window_lens.clear()
            self.window_rets.clear()
        return self.last_mean_len, self.last_mean_ret


def default_env_factory(scenario: ScenarioConfig | None = None,
                        ped_params: PedParams | None = None):
    def make(phi_deg: float, variant: PedVariant, seed: int) -> CrossingEnv:
        return CrossingEnv(scenario=scenario, ped_params=ped_params,
                           phi_deg=phi_deg, variant=variant, seed=seed)
    return make


def _log_points(cfg: TrainConfig) -> set[int]:
    points = set(range(cfg.log_every, cfg.total_steps + 1, cfg.log_every))
    points.add(cfg.total_steps // 2)
    points.add(cfg.total_steps)
    return points


def train(cfg: TrainConfig, seed: int, out_dir, env_factory=None,
          config_hash: str = "default") -> TrainResult:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    factory = env_factory or default_env_factory()
    meta = _meta_line(config_hash, seed)
    if cfg.algo == "ppo":
        result = _train_ppo(cfg, seed, out_dir, factory, meta)
    else:
        result = _train_sac(cfg, seed, out_dir, factory, meta)
    _write_manifest(out_dir, cfg, seed, config_hash, result)
    return result


def _meta_line(config_hash: str, seed: int) -> str:
    from . import __version__
    return f"# crosswalk={__version__} config={config_hash} seed={seed}"


def _write_manifest(out_dir: Path, cfg: TrainConfig, seed: int,
                    config_hash: str, result: TrainResult) -> None:
    import json

    from . import __version__
    manifest = {
        "version": __version__,
        "config_hash": config_hash,
        "seed": seed,
        "algo": cfg.algo,
        "phi_deg": cfg.phi_deg,
        "total_steps": cfg.total_steps,
        "curriculum": cfg.curriculum,
        "files": sorted(p.name for p in result.checkpoints) + ["metrics.csv"],
    }
    with open(out_dir / "run_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_metrics(path) -> list[dict]:
    """Rows of the metrics CSV as dicts (comment lines skipped)."""
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = None
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                header = line.split(",")
                continue
            cells = line.split(",")
            row = {"step": int(cells[0]), "phase": int(cells[1])}
            for name, cell in zip(header[2:], cells[2:]):
                row[name] = float(cell)
            rows.append(row)
    return rows


def _checkpoint_arrays_ppo(net: PpoNet, opt: Adam) -> dict:
    arrays = {f"net.{n}": p.value for n, p in zip(net.param_names(), net.params())}
    for i, (m, v) in enumerate(zip(opt.m, opt.v)):
        arrays[f"adam.m.{i}"] = m
        arrays[f"adam.v.{i}"] = v
    arrays["adam.t"] = np.array([float(opt.t)])
    return arrays


def _checkpoint_arrays_sac(nets: SacNets, q_opt, v_opt, pi_opt) -> dict:
    arrays = {f"pi.{n}": p.value
              for n, p in zip(nets.policy_param_names(), nets.policy_params())}
    for i, p in enumerate(nets.q.params()):
        arrays[f"q.{i}"] = p.value
    for i, p in enumerate(nets.v.params()):
        arrays[f"v.{i}"] = p.value
    for i, t in enumerate(nets.v_target):
        arrays[f"vt.{i}"] = t
    for tag, opt in (("qo", q_opt), ("vo", v_opt), ("po", pi_opt)):
        for i, (m, v) in enumerate(zip(opt.m, opt.v)):
            arrays[f"{tag}.m.{i}"] = m
            arrays[f"{tag}.v.{i}"] = v
        arrays[f"{tag}.t"] = np.array([float(opt.t)])
    return arrays


def _save(out_dir: Path, name: str, cfg: TrainConfig, step: int, sizes,
          arrays: dict) -> Path:
    path = out_dir / name
    save_checkpoint(path, Checkpoint(algo=cfg.algo,
                                     phi_rad=math.radians(cfg.phi_deg),
                                     train_step=step, sizes=list(sizes),
                                     arrays=arrays))
    return path


def _train_ppo(cfg: TrainConfig, seed: int, out_dir: Path, factory,
               meta_line: str) -> TrainResult:
    n = cfg.n_envs
    if cfg.total_steps % n or cfg.log_every % n:
        raise ValueError("total_steps and log_every must be divisible by n_envs")
    rng = np.random.default_rng(seed)
    net = PpoNet(rng, log_std_init=cfg.log_std_init)
    opt = Adam(net.params(), lr=cfg.lr, max_grad_norm=cfg.max_grad_norm)
    envs = [factory(cfg.phi_deg, variant_at(0, cfg), seed * 1000 + i)
            for i in range(n)]
    buffer = RolloutBuffer(cfg.horizon, n_envs=n)
    log = _MetricsLog(out_dir / "metrics.csv", meta_line)
    trackers = [_EpisodeTracker() for _ in range(n)]
    log_points = _log_points(cfg)
    result = TrainResult(out_dir / "ckpt_final.bin", log.path)

    obs = np.stack([env.reset() for env in envs])
    last_stats: dict = {}
    try:
        for tick in range(cfg.total_steps // n):
            step = tick * n
            variant = variant_at(step, cfg)
            for env in envs:
                env.variant = variant

            mean = net.act(obs)
            log_std = np.clip(net.log_std.value, -20.0, 2.0)
            actions = mean + np.exp(log_std) * rng.normal(size=mean.shape)
            actions = actions + cfg.action_noise_std * rng.normal(size=mean.shape)
            logp = np.array([action_logprob(mean[i], log_std, actions[i])
                             for i in range(n)])
            values = net.value(obs)[:, 0]

            rewards = np.zeros(n)
            dones = np.zeros(n)
            next_obs = np.empty_like(obs)
            for i, env in enumerate(envs):
                o, bd, done, _ = env.step(float(actions[i, 0]))
                rewards[i] = bd.r_total
                dones[i] = float(done)
                trackers[i].step(bd.r_total, done)
                next_obs[i] = env.reset() if done else o
            buffer.add(obs, actions, logp, rewards, values, dones)
            obs = next_obs

            if buffer.full:
                last_values = net.value(obs)[:, 0] * (1.0 - dones)
                buffer.compute_advantages(cfg.gamma, cfg.gae_lambda, last_values)
                opt.progress = (step + n) / cfg.total_steps
                try:
                    last_stats = ppo_update(net, opt, buffer, rng, cfg.clip_eps,
                                            cfg.epochs, cfg.minibatch,
                                            cfg.vf_coef, cfg.ent_coef)
                except FloatingPointError as err:
                    raise TrainingDiverged(
                        f"step {step + n}: {err}; lr={opt.current_lr()}") from err
                buffer.reset()

            done_steps = step + n
            if done_steps in log_points:
                stats = [t.flush() for t in trackers]
                lens = [s[0] for s in stats if not math.isnan(s[0])]
                rews = [s[1] for s in stats if not math.isnan(s[1])]
                log.write(done_steps, phase_at(done_steps, cfg),
                          float(np.mean(lens)) if lens else math.nan,
                          float(np.mean(rews)) if rews else math.nan,
                          last_stats, opt.current_lr())
            if cfg.checkpoint_every and done_steps % cfg.checkpoint_every == 0 \
                    and done_steps < cfg.total_steps:
                result.checkpoints.append(_save(
                    out_dir, f"ckpt_step{done_steps}.bin", cfg, done_steps,
                    net.sizes, _checkpoint_arrays_ppo(net, opt)))
    finally:
        log.close()

    final = _save(out_dir, "ckpt_final.bin", cfg, cfg.total_steps, net.sizes,
                  _checkpoint_arrays_ppo(net, opt))
    result.checkpoints.append(final)
    return result


def _train_sac(cfg: TrainConfig, seed: int, out_dir: Path, factory,
               meta_line: str) -> TrainResult:
    rng = np.random.default_rng(seed)
    nets = SacNets(rng)
    q_opt = Adam(nets.q.params(), lr=cfg.lr)
    v_opt = Adam(nets.v.params(), lr=cfg.lr)
    pi_opt = Adam(nets.policy_params(), lr=cfg.lr)
    capacity = cfg.replay_capacity or cfg.total_steps
    replay = ReplayBuffer(capacity)
    env = factory(cfg.phi_deg, variant_at(0, cfg), seed)
    log = _MetricsLog(out_dir / "metrics.csv", meta_line)
    tracker = _EpisodeTracker()
    log_points = _log_points(cfg)
    result = TrainResult(out_dir / "ckpt_final.bin", log.path)

    obs = env.reset()
    last_stats: dict = {}
    try:
        for step in range(cfg.total_steps):
            env.variant = variant_at(step, cfg)
            action = sample_action(nets, obs[None, :], rng)[0]
            action = np.clip(
                action + cfg.action_noise_std * rng.normal(size=action.shape),
                -1.0, 1.0)

            next_obs, bd, done, _ = env.step(float(action[0]))
            replay.add(obs, action, bd.r_total, next_obs, done)
            tracker.step(bd.r_total, done)
            obs = env.reset() if done else next_obs

            if len(replay) >= cfg.update_after:
                progress = (step + 1) / cfg.total_steps
                q_opt.progress = v_opt.progress = pi_opt.progress = progress
                batch = replay.sample(rng, cfg.batch_size)
                try:
                    last_stats = sac_update(nets, q_opt, v_opt, pi_opt, batch,
                                            cfg.gamma, cfg.alpha, cfg.tau, rng)
                except FloatingPointError as err:
                    raise TrainingDiverged(f"step {step + 1}: {err}") from err

            done_steps = step + 1
            if done_steps in log_points:
                ep_len, ep_rew = tracker.flush()
                log.write(done_steps, phase_at(done_steps, cfg), ep_len, ep_rew,
                          last_stats, pi_opt.current_lr())
            if cfg.checkpoint_every and done_steps % cfg.checkpoint_every == 0 \
                    and done_steps < cfg.total_steps:
                result.checkpoints.append(_save(
                    out_dir, f"ckpt_step{done_steps}.bin", cfg, done_steps,
                    nets.sizes, _checkpoint_arrays_sac(nets, q_opt, v_opt, pi_opt)))
    finally:
        log.close()

    final = _save(out_dir, "ckpt_final.bin", cfg, cfg.total_steps, nets.sizes,
                  _checkpoint_arrays_sac(nets, q_opt, v_opt, pi_opt))
    result.checkpoints.append(final)
    return result
