"""Maximum-entropy off-policy updates: soft Q, soft V, reparameterised policy."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .policy import SacNets, squashed_logprob


def zero_all_grads(nets: SacNets) -> None:
    for p in (nets.policy_params() + nets.q.params() + nets.v.params()):
        p.grad = None


def sac_targets(nets: SacNets, batch: dict, gamma: float, alpha: float,
                noise: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Supervised targets: Q from reward plus discounted target-V of the next
    state (zero on terminals); V from one reparameterised policy sample."""
    q_hat = batch["rewards"] + gamma * (1.0 - batch["dones"]) * \
        nets.v_target_fast(batch["next_obs"]).reshape(-1)
    mean_t, log_std_t = nets.policy_forward(batch["obs"])
    action_t, logp_t = squashed_logprob(mean_t, log_std_t, noise)
    q_pi = nets.q_value(batch["obs"], action_t.value).value.reshape(-1)
    v_hat = q_pi - alpha * logp_t.value
    return q_hat, v_hat


def sac_q_loss(nets: SacNets, obs, actions, q_hat):
    q = nets.q_value(obs, actions)
    return ad.mean(ad.square(q - Tensor(q_hat.reshape(-1, 1))))


def sac_v_loss(nets: SacNets, obs, v_hat):
    v = nets.v(obs)
    return ad.mean(ad.square(v - Tensor(v_hat.reshape(-1, 1))))


def sac_policy_loss(nets: SacNets, obs, noise: np.ndarray, alpha: float):
    """alpha * log pi(f(eps,s)|s) - Q(s, f(eps,s)), minimised; the gradient
    flows through the reparameterised action into both terms."""
    mean_t, log_std_t = nets.policy_forward(obs)
    action_t, logp_t = squashed_logprob(mean_t, log_std_t, noise)
    q_t = nets.q_value(obs, action_t)
    return ad.mean(alpha * logp_t - ad.sum_axis(q_t, axis=1)), logp_t


def sac_update(nets: SacNets, q_opt, v_opt, pi_opt, batch: dict, gamma: float,
               alpha: float, tau: float, rng: np.random.Generator) -> dict:
    """One gradient step on each of Q, V and the policy, then Polyak-average
    the target V network."""
    n = batch["obs"].shape[0]
    noise_v = rng.normal(size=(n, nets.mu_head.w.value.shape[1]))
    noise_pi = rng.normal(size=(n, nets.mu_head.w.value.shape[1]))

    q_hat, v_hat = sac_targets(nets, batch, gamma, alpha, noise_v)

    zero_all_grads(nets)
    q_loss = sac_q_loss(nets, batch["obs"], batch["actions"], q_hat)
    q_loss.backward()
    q_opt.step()

    zero_all_grads(nets)
    v_loss = sac_v_loss(nets, batch["obs"], v_hat)
    v_loss.backward()
    v_opt.step()

    zero_all_grads(nets)
    pi_loss, logp_t = sac_policy_loss(nets, batch["obs"], noise_pi, alpha)
    pi_loss.backward()
    pi_opt.step()

    nets.polyak_update(tau)

    stats = {
        "loss_q": float(q_loss.value),
        "loss_v": float(v_loss.value),
        "loss_pi": float(pi_loss.value),
        "logp_mean": float(logp_t.value.mean()),
    }
    if not all(np.isfinite(v) for v in stats.values()):
        raise FloatingPointError(f"non-finite SAC loss: {stats}")
    return stats


def sample_action(nets: SacNets, obs: np.ndarray,
                  rng: np.random.Generator) -> np.ndarray:
    """Stochastic squashed action for rollout collection (numpy fast path)."""
    h = np.tanh(nets.p2.fast(np.tanh(nets.p1.fast(obs))))
    mu = nets.mu_head.fast(h)
    log_std = np.clip(nets.log_std_head.fast(h), -20.0, 2.0)
    raw = mu + np.exp(log_std) * rng.normal(size=mu.shape)
    return np.tanh(raw)
