import numpy as np
import pytest

from crosswalk import autodiff as ad
from crosswalk.autodiff import Tensor
from crosswalk.buffers import RolloutBuffer
from crosswalk.policy import Adam, PpoNet, SacNets, gaussian_logprob
from crosswalk.ppo import action_logprob, ppo_loss, ppo_update
from crosswalk.sac import (
    sac_policy_loss,
    sac_q_loss,
    sac_targets,
    sac_update,
    sac_v_loss,
    sample_action,
    zero_all_grads,
)


def _clip_term(ratio, adv, eps=0.2):
    return min(ratio * adv, min(max(ratio, 1 - eps), 1 + eps) * adv)


def test_clipped_surrogate_scalar_cases():
    assert _clip_term(1.0, 0.7) == pytest.approx(0.7)
    assert _clip_term(1.4, 1.0) == pytest.approx(1.2)
    assert _clip_term(0.5, -1.0) == pytest.approx(-0.8)


def _random_batch(rng, n=32, obs_dim=5, act_dim=1):
    return (rng.normal(size=(n, obs_dim)), rng.normal(size=(n, act_dim)) * 0.5,
            rng.normal(size=n), rng.normal(size=n))


def test_ppo_ratio_is_one_at_update_start():
    rng = np.random.default_rng(0)
    net = PpoNet(rng, hidden=16)
    obs, actions, adv, ret = _random_batch(rng)
    # recompute logp_old under the current network: ratio must be exactly 1
    mean = net.act(obs)
    log_std = np.clip(net.log_std.value, -20, 2)
    logp_old = np.array([action_logprob(mean[i], log_std, actions[i])
                         for i in range(obs.shape[0])])
    mean_t, _ = net.forward(obs)
    logp = gaussian_logprob(mean_t, net.log_std, actions)
    ratio = np.exp(logp.value - logp_old)
    np.testing.assert_allclose(ratio, 1.0, rtol=1e-10)


def test_ppo_clipped_never_exceeds_unclipped():
    rng = np.random.default_rng(1)
    for _ in range(50):
        ratio = float(rng.uniform(0.0, 3.0))
        adv = float(rng.normal())
        clipped = _clip_term(ratio, adv)
        assert clipped <= ratio * adv + 1e-12


def test_ppo_loss_matches_scalar_surrogate():
    rng = np.random.default_rng(2)
    net = PpoNet(rng, hidden=8)
    obs, actions, adv, ret = _random_batch(rng, n=16)
    logp_old = rng.normal(size=16) * 0.1
    loss, stats = ppo_loss(net, obs, actions, logp_old, adv, ret,
                           clip_eps=0.2, vf_coef=0.0, ent_coef=0.0)
    mean_t, _ = net.forward(obs)
    logp = gaussian_logprob(mean_t, net.log_std, actions).value
    surr = [_clip_term(float(np.exp(lp - lo)), a)
            for lp, lo, a in zip(logp, logp_old, adv)]
    assert float(loss.value) == pytest.approx(-float(np.mean(surr)), rel=1e-10)


def test_ppo_gradients_match_finite_differences():
    rng = np.random.default_rng(3)
    for trial in range(5):
        net = PpoNet(np.random.default_rng(100 + trial), hidden=6)
        obs, actions, adv, ret = _random_batch(rng, n=8)
        logp_old = rng.normal(size=8) * 0.05

        def loss_value():
            loss, _ = ppo_loss(net, obs, actions, logp_old, adv, ret, 0.2)
            return float(loss.value)

        loss, _ = ppo_loss(net, obs, actions, logp_old, adv, ret, 0.2)
        for p in net.params():
            p.grad = None
        loss.backward()

        h = 1e-5
        for p in net.params():
            flat = p.value.reshape(-1)
            grad = np.zeros_like(flat) if p.grad is None else p.grad.reshape(-1)
            idx = rng.choice(flat.size, size=min(6, flat.size), replace=False)
            for i in idx:
                orig = flat[i]
                flat[i] = orig + h
                hi = loss_value()
                flat[i] = orig - h
                lo = loss_value()
                flat[i] = orig
                num = (hi - lo) / (2 * h)
                assert abs(grad[i] - num) / max(abs(num), 1e-3) < 1e-4


def test_ppo_update_raises_on_nan():
    rng = np.random.default_rng(4)
    net = PpoNet(rng, hidden=8)
    opt = Adam(net.params())
    buf = RolloutBuffer(horizon=64)
    for _ in range(64):
        buf.add(rng.normal(size=5), rng.normal(size=1), 0.0, np.nan, 0.0, False)
    buf.compute_advantages(0.99, 0.95, 0.0)
    with pytest.raises(FloatingPointError):
        ppo_update(net, opt, buf, rng, 0.2, 1, 64)


def test_ppo_update_improves_surrogate_on_fixed_batch():
    rng = np.random.default_rng(5)
    net = PpoNet(rng, hidden=16)
    buf = RolloutBuffer(horizon=128)
    for _ in range(128):
        obs = rng.normal(size=5)
        mean = net.act(obs[None, :])[0]
        action = mean + rng.normal(size=1) * 1.0
        logp = action_logprob(mean, net.log_std.value, action)
        # reward the sign of the action matching the first obs component
        reward = float(np.sign(obs[0]) * action[0])
        buf.add(obs, action, logp, reward, 0.0, True)
    buf.compute_advantages(0.99, 0.95, 0.0)
    opt = Adam(net.params(), lr=1e-3, linear_decay=False)
    before, _ = ppo_loss(net, buf.flat("obs"), buf.flat("actions"),
                         buf.flat("logp"), buf.flat("advantages"),
                         buf.flat("returns"), 0.2)
    ppo_update(net, opt, buf, rng, 0.2, epochs=5, minibatch=32)
    after, _ = ppo_loss(net, buf.flat("obs"), buf.flat("actions"),
                        buf.flat("logp"), buf.flat("advantages"),
                        buf.flat("returns"), 0.2)
    assert float(after.value) < float(before.value)


# ------------------------------------------------------------------------ sac

def _sac_batch(rng, n=16):
    return {
        "obs": rng.normal(size=(n, 5)),
        "actions": np.clip(rng.normal(size=(n, 1)), -1, 1),
        "rewards": rng.normal(size=n),
        "next_obs": rng.normal(size=(n, 5)),
        "dones": (rng.random(n) < 0.3).astype(float),
    }


def test_sac_targets_terminal_and_gamma_zero():
    rng = np.random.default_rng(6)
    nets = SacNets(rng, hidden=8)
    batch = _sac_batch(rng)
    batch["dones"][:] = 1.0
    noise = rng.normal(size=(16, 1))
    q_hat, _ = sac_targets(nets, batch, gamma=0.99, alpha=0.2, noise=noise)
    np.testing.assert_allclose(q_hat, batch["rewards"], rtol=1e-12)

    batch2 = _sac_batch(rng)
    q_hat2, _ = sac_targets(nets, batch2, gamma=0.0, alpha=0.2,
                            noise=rng.normal(size=(16, 1)))
    np.testing.assert_allclose(q_hat2, batch2["rewards"], rtol=1e-12)


def test_sac_value_target_alpha_zero_deterministic():
    rng = np.random.default_rng(7)
    nets = SacNets(rng, hidden=8)
    batch = _sac_batch(rng)
    noise = np.zeros((16, 1))  # deterministic reparameterised sample
    _, v_hat = sac_targets(nets, batch, gamma=0.99, alpha=0.0, noise=noise)
    mu = nets.act(batch["obs"])
    q_mu = nets.q_value(batch["obs"], mu).value.reshape(-1)
    np.testing.assert_allclose(v_hat, q_mu, rtol=1e-10)


def test_sac_policy_loss_gradients_match_finite_differences():
    rng = np.random.default_rng(8)
    for trial in range(5):
        nets = SacNets(np.random.default_rng(200 + trial), hidden=6)
        obs = rng.normal(size=(8, 5))
        noise = rng.normal(size=(8, 1))
        alpha = 0.2

        def loss_value():
            loss, _ = sac_policy_loss(nets, obs, noise, alpha)
            return float(loss.value)

        loss, _ = sac_policy_loss(nets, obs, noise, alpha)
        zero_all_grads(nets)
        loss.backward()

        h = 1e-5
        for p in nets.policy_params() + nets.q.params():
            flat = p.value.reshape(-1)
            grad = np.zeros_like(flat) if p.grad is None else p.grad.reshape(-1)
            idx = rng.choice(flat.size, size=min(5, flat.size), replace=False)
            for i in idx:
                orig = flat[i]
                flat[i] = orig + h
                hi = loss_value()
                flat[i] = orig - h
                lo = loss_value()
                flat[i] = orig
                num = (hi - lo) / (2 * h)
                assert abs(grad[i] - num) / max(abs(num), 1e-3) < 1e-4


def test_sac_policy_loss_alpha_zero_is_q_ascent():
    # with alpha=0, decreasing the loss must increase mean Q of the sampled
    # actions: one small gradient step in the loss-descent direction
    rng = np.random.default_rng(9)
    nets = SacNets(rng, hidden=8)
    obs = rng.normal(size=(32, 5))
    noise = rng.normal(size=(32, 1))
    loss, _ = sac_policy_loss(nets, obs, noise, alpha=0.0)
    q_before = -float(loss.value)
    zero_all_grads(nets)
    loss.backward()
    for p in nets.policy_params():
        if p.grad is not None:
            p.value -= 1e-3 * p.grad
    loss_after, _ = sac_policy_loss(nets, obs, noise, alpha=0.0)
    assert -float(loss_after.value) > q_before


def test_sac_entropy_grows_when_q_is_flat():
    # zero out the Q network: the policy loss reduces to alpha*E[logp], so
    # updates drive the policy toward maximum entropy. For the squashed head
    # that optimum has finite std (support is [-1, 1]); starting from a
    # near-deterministic policy, std must grow and mean log-density drop.
    rng = np.random.default_rng(10)
    nets = SacNets(rng, hidden=8)
    for p in nets.q.params():
        p.value[:] = 0.0
    nets.log_std_head.b.value[:] = -3.0  # low-entropy start
    obs = rng.normal(size=(64, 5))
    pi_opt = Adam(nets.policy_params(), lr=1e-2, linear_decay=False)

    def mean_std():
        h = np.tanh(nets.p2.fast(np.tanh(nets.p1.fast(obs))))
        return float(np.exp(np.clip(nets.log_std_head.fast(h), -20, 2)).mean())

    std_before = mean_std()
    logp_first = None
    for i in range(300):
        noise = rng.normal(size=(64, 1))
        loss, logp_t = sac_policy_loss(nets, obs, noise, alpha=0.2)
        if i == 0:
            logp_first = float(logp_t.value.mean())
        zero_all_grads(nets)
        loss.backward()
        pi_opt.step()
    _, logp_t = sac_policy_loss(nets, obs, rng.normal(size=(64, 1)), alpha=0.2)
    assert mean_std() > std_before
    assert float(logp_t.value.mean()) < logp_first


def test_sac_update_all_losses_finite_on_random_data():
    rng = np.random.default_rng(11)
    nets = SacNets(rng, hidden=8)
    q_opt = Adam(nets.q.params())
    v_opt = Adam(nets.v.params())
    pi_opt = Adam(nets.policy_params())
    for _ in range(100):
        stats = sac_update(nets, q_opt, v_opt, pi_opt, _sac_batch(rng),
                           gamma=0.99, alpha=0.2, tau=0.005, rng=rng)
        assert all(np.isfinite(v) for v in stats.values())


def test_sac_q_and_v_losses_are_mse():
    rng = np.random.default_rng(12)
    nets = SacNets(rng, hidden=8)
    batch = _sac_batch(rng)
    q_hat = rng.normal(size=16)
    v_hat = rng.normal(size=16)
    q = nets.q_value(batch["obs"], batch["actions"]).value.reshape(-1)
    v = nets.v(batch["obs"]).value.reshape(-1)
    assert float(sac_q_loss(nets, batch["obs"], batch["actions"], q_hat).value) \
        == pytest.approx(float(np.mean((q - q_hat) ** 2)), rel=1e-12)
    assert float(sac_v_loss(nets, batch["obs"], v_hat).value) \
        == pytest.approx(float(np.mean((v - v_hat) ** 2)), rel=1e-12)


def test_sample_action_in_range_and_seeded():
    rng = np.random.default_rng(13)
    nets = SacNets(rng, hidden=8)
    obs = rng.normal(size=(100, 5))
    a = sample_action(nets, obs, np.random.default_rng(42))
    b = sample_action(nets, obs, np.random.default_rng(42))
    np.testing.assert_array_equal(a, b)
    assert np.all(np.abs(a) < 1.0)
