import numpy as np
import pytest

from crosswalk.env import CrossingEnv, PedVariant
from crosswalk.policy import load_checkpoint
from crosswalk.training import (
    TrainConfig,
    TrainingDiverged,
    TrainResult,
    default_env_factory,
    load_metrics,
    phase_at,
    train,
    variant_at,
)


def _fast_cfg(**overrides):
    base = dict(algo="ppo", phi_deg=0.0, total_steps=1536, horizon=512,
                epochs=3, minibatch=64, log_every=512)
    base.update(overrides)
    return TrainConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(algo="dqn")
    with pytest.raises(ValueError):
        TrainConfig(gamma=1.5)
    with pytest.raises(ValueError):
        TrainConfig(phi_deg=120.0)


def test_variant_schedule():
    cfg = _fast_cfg()
    half = cfg.total_steps // 2
    assert variant_at(half - 1, cfg) is PedVariant.RECKLESS
    assert variant_at(half, cfg) is PedVariant.AWARE
    assert phase_at(half - 1, cfg) == 1
    assert phase_at(half, cfg) == 2
    no_curr = _fast_cfg(curriculum=False)
    assert variant_at(0, no_curr) is PedVariant.AWARE
    assert variant_at(half, no_curr) is PedVariant.AWARE


def test_ppo_short_run_bit_reproducible(tmp_path):
    cfg = _fast_cfg()
    r1 = train(cfg, seed=7, out_dir=tmp_path / "a")
    r2 = train(cfg, seed=7, out_dir=tmp_path / "b")
    assert r1.checkpoint_path.read_bytes() == r2.checkpoint_path.read_bytes()
    assert r1.metrics_path.read_bytes() == r2.metrics_path.read_bytes()


def test_ppo_seed_changes_run(tmp_path):
    cfg = _fast_cfg()
    r1 = train(cfg, seed=7, out_dir=tmp_path / "a")
    r2 = train(cfg, seed=8, out_dir=tmp_path / "b")
    assert r1.checkpoint_path.read_bytes() != r2.checkpoint_path.read_bytes()


def test_sac_short_run_bit_reproducible(tmp_path):
    cfg = TrainConfig(algo="sac", phi_deg=20.0, total_steps=384,
                      update_after=128, batch_size=64, log_every=128)
    r1 = train(cfg, seed=3, out_dir=tmp_path / "a")
    r2 = train(cfg, seed=3, out_dir=tmp_path / "b")
    assert r1.checkpoint_path.read_bytes() == r2.checkpoint_path.read_bytes()
    assert r1.metrics_path.read_bytes() == r2.metrics_path.read_bytes()


def test_metrics_log_phase_flips_exactly_at_half(tmp_path):
    cfg = _fast_cfg(total_steps=2048, horizon=512, log_every=512)
    result = train(cfg, seed=1, out_dir=tmp_path)
    lines = result.metrics_path.read_text().strip().splitlines()
    assert lines[0].startswith("# crosswalk=")  # artifact stamp
    assert lines[1].split(",") == ["step", "phase", "mean_ep_len",
                                   "mean_ep_reward", "loss_pi", "loss_v",
                                   "loss_q", "lr"]
    rows = load_metrics(result.metrics_path)
    phases = {row["step"]: row["phase"] for row in rows}
    half = cfg.total_steps // 2
    assert half in phases  # a row is forced exactly at the switch
    for step, phase in phases.items():
        assert phase == (1 if step < half else 2)


def test_checkpoint_metadata_and_periodic_saves(tmp_path):
    cfg = _fast_cfg(total_steps=1024, horizon=256, checkpoint_every=512,
                    phi_deg=40.0)
    result = train(cfg, seed=2, out_dir=tmp_path)
    names = sorted(p.name for p in result.checkpoints)
    assert "ckpt_final.bin" in names and "ckpt_step512.bin" in names
    ck = load_checkpoint(result.checkpoint_path)
    assert ck.algo == "ppo"
    assert ck.train_step == 1024
    assert ck.phi_deg == pytest.approx(40.0)
    mid = load_checkpoint(tmp_path / "ckpt_step512.bin")
    assert mid.train_step == 512


def test_lr_decays_linearly_in_log(tmp_path):
    cfg = _fast_cfg(total_steps=2048, horizon=512, log_every=512)
    result = train(cfg, seed=4, out_dir=tmp_path)
    lrs = {row["step"]: row["lr"] for row in load_metrics(result.metrics_path)}
    assert lrs[1024] == pytest.approx(cfg.lr * 0.5)
    assert lrs[2048] == pytest.approx(0.0, abs=1e-12)


class _NanRewardEnv:
    def __init__(self, inner):
        self.inner = inner

    def __getattr__(self, name):
        return getattr(self.inner, name)

    def __setattr__(self, name, value):
        if name == "inner":
            object.__setattr__(self, name, value)
        else:
            setattr(self.inner, name, value)

    def reset(self, **kw):
        return self.inner.reset(**kw)

    def step(self, u):
        obs, bd, done, info = self.inner.step(u)
        bd.r_total = float("nan")
        return obs, bd, done, info


def test_nan_rewards_abort_with_diagnostic(tmp_path):
    cfg = _fast_cfg(total_steps=512, horizon=128)

    def factory(phi_deg, variant, seed):
        return _NanRewardEnv(CrossingEnv(phi_deg=phi_deg, variant=variant,
                                         seed=seed))

    with pytest.raises(TrainingDiverged, match="step"):
        train(cfg, seed=5, out_dir=tmp_path, env_factory=factory)


def test_default_env_factory_passes_parameters():
    make = default_env_factory()
    env = make(30.0, PedVariant.RECKLESS, 11)
    assert env.phi_deg == 30.0
    assert env.variant is PedVariant.RECKLESS
