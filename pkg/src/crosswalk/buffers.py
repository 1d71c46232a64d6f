"""Experience storage: on-policy rollouts with GAE, and a uniform replay ring."""

from __future__ import annotations

import numpy as np


def discounted_return(rewards, gamma: float) -> float:
    """Sum of gamma^k * r_k over a finite reward sequence."""
    total = 0.0
    for r in reversed(list(rewards)):
        total = r + gamma * total
    return float(total)


class RolloutBuffer:
    """Fixed-horizon on-policy storage for PPO.

    Holds `horizon` total samples collected from `n_envs` parallel
    environment instances (horizon/n_envs timesteps each). Advantages are
    recomputed from the recorded values right before each update
    (exponentially weighted TD residuals, per environment chain) and
    normalised to zero mean / unit std over the whole batch; returns keep
    the raw advantages.
    """

    def __init__(self, horizon: int = 2048, obs_dim: int = 5, act_dim: int = 1,
                 n_envs: int = 1):
        if horizon % n_envs:
            raise ValueError("horizon must be divisible by n_envs")
        self.horizon = horizon
        self.n_envs = n_envs
        self.steps = horizon // n_envs
        self.obs = np.zeros((self.steps, n_envs, obs_dim))
        self.actions = np.zeros((self.steps, n_envs, act_dim))
        self.logp = np.zeros((self.steps, n_envs))
        self.rewards = np.zeros((self.steps, n_envs))
        self.values = np.zeros((self.steps, n_envs))
        self.dones = np.zeros((self.steps, n_envs))
        self.advantages = np.zeros((self.steps, n_envs))
        self.returns = np.zeros((self.steps, n_envs))
        self.ptr = 0

    @property
    def full(self) -> bool:
        return self.ptr >= self.steps

    def add(self, obs, action, logp, reward, value, done) -> None:
        """Record one timestep for every environment (row-per-env arrays;
        scalars are accepted for the single-env case)."""
        i = self.ptr
        self.obs[i] = obs
        self.actions[i] = action
        self.logp[i] = logp
        self.rewards[i] = reward
        self.values[i] = value
        self.dones[i] = done
        self.ptr += 1

    def compute_advantages(self, gamma: float, lam: float, last_value) -> None:
        """GAE recursion down each environment chain; episodes ending inside
        the rollout bootstrap 0, the cut-off tails bootstrap `last_value`."""
        last_value = np.broadcast_to(np.asarray(last_value, dtype=float),
                                     (self.n_envs,))
        adv = np.zeros(self.n_envs)
        for t in range(self.steps - 1, -1, -1):
            next_value = last_value if t == self.steps - 1 else self.values[t + 1]
            mask = 1.0 - self.dones[t]
            delta = self.rewards[t] + gamma * next_value * mask - self.values[t]
            adv = delta + gamma * lam * mask * adv
            self.advantages[t] = adv
        self.returns[:] = self.advantages + self.values
        std = self.advantages.std()
        self.advantages[:] = (self.advantages - self.advantages.mean()) / (std + 1e-8)

    def flat(self, name: str) -> np.ndarray:
        arr = getattr(self, name)
        return arr.reshape(self.horizon, *arr.shape[2:])

    def minibatch_indices(self, rng: np.random.Generator, size: int):
        order = rng.permutation(self.horizon)
        for start in range(0, self.horizon, size):
            yield order[start:start + size]

    def reset(self) -> None:
        self.ptr = 0


class ReplayBuffer:
    """Uniform-sampling ring buffer for off-policy training."""

    def __init__(self, capacity: int, obs_dim: int = 5, act_dim: int = 1):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, act_dim))
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.dones = np.zeros(capacity)
        self.ptr = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, obs, action, reward, next_obs, done) -> None:
        i = self.ptr
        self.obs[i] = obs
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_obs[i] = next_obs
        self.dones[i] = float(done)
        self.ptr = (self.ptr + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch: int) -> dict:
        idx = rng.integers(0, self.size, size=batch)
        return {
            "obs": self.obs[idx],
            "actions": self.actions[idx],
            "rewards": self.rewards[idx],
            "next_obs": self.next_obs[idx],
            "dones": self.dones[idx],
        }
