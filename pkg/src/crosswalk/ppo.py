"""Clipped-surrogate policy optimisation over the rollout buffer."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .policy import LOG_2PI, PpoNet, gaussian_logprob


def ppo_loss(net: PpoNet, obs, actions, logp_old, advantages, returns,
             clip_eps: float, vf_coef: float = 0.5, ent_coef: float = 0.0):
    """Negative clipped surrogate + value MSE (optionally minus entropy).

    The surrogate takes, per sample, the minimum of ratio*A and the
    ratio clipped into [1-eps, 1+eps] times A, so the clipped objective
    can never exceed the unclipped one.
    """
    mean_t, value_t = net.forward(obs)
    logp = gaussian_logprob(mean_t, net.log_std, actions)
    ratio = ad.exp(logp - Tensor(logp_old))
    adv_t = Tensor(advantages)
    surrogate = ad.minimum(ratio * adv_t, ad.clip(ratio, 1.0 - clip_eps,
                                                  1.0 + clip_eps) * adv_t)
    policy_objective = ad.mean(surrogate)
    value_loss = ad.mean(ad.square(value_t - Tensor(returns.reshape(-1, 1))))
    # state-independent log-std: exact entropy is affine in the parameter
    entropy = ad.total(net.log_std + 0.5 * (1.0 + LOG_2PI))
    loss = (-1.0) * policy_objective + vf_coef * value_loss + (-ent_coef) * entropy
    stats = {
        "loss_pi": -float(policy_objective.value),
        "loss_v": float(value_loss.value),
        "entropy": float(entropy.value),
        "ratio_mean": float(ratio.value.mean()),
    }
    return loss, stats


def ppo_update(net: PpoNet, opt, buffer, rng: np.random.Generator,
               clip_eps: float, epochs: int, minibatch: int,
               vf_coef: float = 0.5, ent_coef: float = 0.0) -> dict:
    """Several epochs of shuffled minibatch updates over one full rollout."""
    obs = buffer.flat("obs")
    actions = buffer.flat("actions")
    logp = buffer.flat("logp")
    advantages = buffer.flat("advantages")
    returns = buffer.flat("returns")
    last_stats: dict = {}
    for _ in range(epochs):
        for idx in buffer.minibatch_indices(rng, minibatch):
            opt.zero_grad()
            loss, last_stats = ppo_loss(
                net, obs[idx], actions[idx], logp[idx], advantages[idx],
                returns[idx], clip_eps, vf_coef, ent_coef)
            if not np.isfinite(loss.value):
                raise FloatingPointError(f"non-finite PPO loss: {last_stats}")
            loss.backward()
            opt.step()
    return last_stats


def action_logprob(mean: np.ndarray, log_std: np.ndarray,
                   action: np.ndarray) -> float:
    """Scalar log-density used when recording rollout actions (numpy path)."""
    z = (action - mean) / np.exp(log_std)
    per_dim = -0.5 * (z * z + 2.0 * log_std + LOG_2PI)
    return float(per_dim.sum())
