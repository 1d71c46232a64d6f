"""Dense policy/value networks, Gaussian action heads, Adam, checkpoints.

Networks are two tanh layers of 256 units on a 5-dim observation. PPO uses
a shared trunk with actor/critic heads and a state-independent log-std;
SAC adds a state-dependent log-std head, tanh-squashed actions, and
separate Q/V function approximators with a Polyak-averaged target V.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, clip, concat, exp, log, square, sum_axis, tanh

HIDDEN = 256
LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
LOG_2PI = math.log(2.0 * math.pi)
SQUASH_EPS = 1e-6


def orthogonal_init(rng: np.random.Generator, fan_in: int, fan_out: int,
                    gain: float = 1.0) -> np.ndarray:
    a = rng.normal(size=(fan_in, fan_out))
    q, r = np.linalg.qr(a if fan_in >= fan_out else a.T)
    q = q * np.sign(np.diag(r))  # deterministic sign convention
    if fan_in < fan_out:
        q = q.T
    return np.ascontiguousarray(gain * q[:fan_in, :fan_out])


class Linear:
    def __init__(self, rng, fan_in, fan_out, gain=1.0):
        self.w = Tensor(orthogonal_init(rng, fan_in, fan_out, gain))
        self.b = Tensor(np.zeros(fan_out))

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.w + self.b

    def fast(self, x: np.ndarray) -> np.ndarray:
        return x @ self.w.value + self.b.value

    def params(self):
        return [self.w, self.b]


class Mlp:
    """Tanh MLP; `sizes` runs input -> hidden... -> output."""

    def __init__(self, rng, sizes, out_gain=1.0):
        self.sizes = list(sizes)
        self.layers = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = i == len(sizes) - 2
            gain = out_gain if last else math.sqrt(2.0)
            self.layers.append(Linear(rng, fan_in, fan_out, gain))

    def __call__(self, x) -> Tensor:
        h = x if isinstance(x, Tensor) else Tensor(x)
        for layer in self.layers[:-1]:
            h = tanh(layer(h))
        return self.layers[-1](h)

    def fast(self, x: np.ndarray) -> np.ndarray:
        h = x
        for layer in self.layers[:-1]:
            h = np.tanh(layer.fast(h))
        return self.layers[-1].fast(h)

    def params(self):
        return [p for layer in self.layers for p in layer.params()]

    def param_count(self) -> int:
        return sum(p.value.size for p in self.params())


# ------------------------------------------------------------ gaussian heads

def gaussian_logprob(mean: Tensor, log_std: Tensor, actions: np.ndarray) -> Tensor:
    """Log density of `actions` under N(mean, exp(log_std)); summed over the
    action dimension. `log_std` broadcasts (state-independent PPO case)."""
    log_std = clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
    inv_var = exp(log_std * (-2.0))
    z = square(Tensor(actions) - mean) * inv_var
    per_dim = (z + log_std * 2.0 + LOG_2PI) * (-0.5)
    return sum_axis(per_dim, axis=1)


def gaussian_entropy(log_std_value: np.ndarray) -> float:
    """Exact entropy of the diagonal Gaussian, nats (0.5*ln(2*pi*e) + log_std)."""
    clamped = np.clip(log_std_value, LOG_STD_MIN, LOG_STD_MAX)
    return float(np.sum(0.5 * (1.0 + LOG_2PI) + clamped))


def squashed_logprob(mean: Tensor, log_std: Tensor, noise: np.ndarray):
    """Reparameterised tanh-squashed sample and its exact log density.

    a = tanh(mean + std * noise); the log-determinant of the squash is
    subtracted from the Gaussian density ("change of variables").
    Returns (action Tensor, logprob Tensor summed over action dims).
    """
    log_std = clip(log_std, LOG_STD_MIN, LOG_STD_MAX)
    std = exp(log_std)
    raw = mean + std * Tensor(noise)
    action = tanh(raw)
    z = square(Tensor(noise))  # ((raw - mean)/std)^2 with reparameterised noise
    gauss = (z + log_std * 2.0 + LOG_2PI) * (-0.5)
    correction = log(1.0 - square(action) + SQUASH_EPS)
    return action, sum_axis(gauss - correction, axis=1)


# ------------------------------------------------------------------ networks

class PpoNet:
    """Actor and critic: one 2x256 tanh network each (same architecture).

    The action mean is tanh-bounded to the valid command range: an
    unbounded mean drifts past the actuator clamp where sampled actions
    all execute identically and exploration of the opposite command dies.
    Sampling stays plain Gaussian around that mean (no squash correction).
    Critic weights are separate so raw-scale value regression cannot
    corrupt the actor's features.
    """

    def __init__(self, rng: np.random.Generator, obs_dim=5, act_dim=1,
                 hidden=HIDDEN, log_std_init=0.0):
        self.sizes = [obs_dim, hidden, hidden, act_dim + 1]
        self.a1 = Linear(rng, obs_dim, hidden, math.sqrt(2.0))
        self.a2 = Linear(rng, hidden, hidden, math.sqrt(2.0))
        self.mu_head = Linear(rng, hidden, act_dim, 0.01)
        self.c1 = Linear(rng, obs_dim, hidden, math.sqrt(2.0))
        self.c2 = Linear(rng, hidden, hidden, math.sqrt(2.0))
        self.v_head = Linear(rng, hidden, 1, 1.0)
        self.log_std = Tensor(np.full(act_dim, float(log_std_init)))

    def forward(self, obs):
        h = obs if isinstance(obs, Tensor) else Tensor(obs)
        ha = tanh(self.a2(tanh(self.a1(h))))
        hc = tanh(self.c2(tanh(self.c1(h))))
        return tanh(self.mu_head(ha)), self.v_head(hc)

    def act(self, obs: np.ndarray) -> np.ndarray:
        """Deterministic action mean, no tape (hot path)."""
        h = np.tanh(self.a2.fast(np.tanh(self.a1.fast(obs))))
        return np.tanh(self.mu_head.fast(h))

    def value(self, obs: np.ndarray) -> np.ndarray:
        h = np.tanh(self.c2.fast(np.tanh(self.c1.fast(obs))))
        return self.v_head.fast(h)

    def params(self):
        return (self.a1.params() + self.a2.params() + self.mu_head.params()
                + self.c1.params() + self.c2.params() + self.v_head.params()
                + [self.log_std])

    def param_names(self):
        return ["a1.w", "a1.b", "a2.w", "a2.b", "mu.w", "mu.b",
                "c1.w", "c1.b", "c2.w", "c2.b", "v.w", "v.b", "log_std"]


class SacNets:
    """Policy, soft Q, soft V, and a Polyak-averaged target V."""

    def __init__(self, rng: np.random.Generator, obs_dim=5, act_dim=1,
                 hidden=HIDDEN):
        self.sizes = [obs_dim, hidden, hidden, 2 * act_dim]
        self.p1 = Linear(rng, obs_dim, hidden, math.sqrt(2.0))
        self.p2 = Linear(rng, hidden, hidden, math.sqrt(2.0))
        self.mu_head = Linear(rng, hidden, act_dim, 0.01)
        self.log_std_head = Linear(rng, hidden, act_dim, 0.01)
        self.q = Mlp(rng, [obs_dim + act_dim, hidden, hidden, 1])
        self.v = Mlp(rng, [obs_dim, hidden, hidden, 1])
        self.v_target = [p.value.copy() for p in self.v.params()]

    def policy_forward(self, obs):
        h = obs if isinstance(obs, Tensor) else Tensor(obs)
        h = tanh(self.p2(tanh(self.p1(h))))
        return self.mu_head(h), self.log_std_head(h)

    def act(self, obs: np.ndarray) -> np.ndarray:
        """Deterministic squashed mean, no tape."""
        h = np.tanh(self.p2.fast(np.tanh(self.p1.fast(obs))))
        return np.tanh(self.mu_head.fast(h))

    def q_value(self, obs, action) -> Tensor:
        return self.q(concat([obs if isinstance(obs, Tensor) else Tensor(obs),
                              action if isinstance(action, Tensor) else Tensor(action)],
                             axis=1))

    def v_target_fast(self, obs: np.ndarray) -> np.ndarray:
        h = obs
        arrays = self.v_target
        n_layers = len(arrays) // 2
        for i in range(n_layers):
            h = h @ arrays[2 * i] + arrays[2 * i + 1]
            if i < n_layers - 1:
                h = np.tanh(h)
        return h

    def polyak_update(self, tau: float) -> None:
        for tgt, src in zip(self.v_target, self.v.params()):
            tgt *= 1.0 - tau
            tgt += tau * src.value

    def policy_params(self):
        return (self.p1.params() + self.p2.params() + self.mu_head.params()
                + self.log_std_head.params())

    def policy_param_names(self):
        return ["p1.w", "p1.b", "p2.w", "p2.b", "mu.w", "mu.b", "ls.w", "ls.b"]


# ----------------------------------------------------------------- optimiser

class Adam:
    """Bias-corrected Adam with an optional linear learning-rate decay.

    Set `progress` (0..1, fraction of total training) before stepping;
    the effective rate is lr * (1 - progress) when the schedule is on.
    """

    def __init__(self, params, lr=3e-4, betas=(0.9, 0.999), eps=1e-8,
                 linear_decay=True, max_grad_norm=None):
        self.params = list(params)
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.linear_decay = linear_decay
        self.max_grad_norm = max_grad_norm
        self.progress = 0.0
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def current_lr(self) -> float:
        if not self.linear_decay:
            return self.lr
        return self.lr * max(0.0, 1.0 - self.progress)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        if self.max_grad_norm is not None:
            total = math.sqrt(sum(float(np.sum(p.grad * p.grad))
                                  for p in self.params if p.grad is not None))
            if total > self.max_grad_norm:
                scale = self.max_grad_norm / (total + 1e-12)
                for p in self.params:
                    if p.grad is not None:
                        p.grad = p.grad * scale
        self.t += 1
        b1, b2 = self.betas
        lr = self.current_lr()
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            if g is None:
                continue
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.value -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


# --------------------------------------------------------------- checkpoints

MAGIC = b"CWK1"
FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


@dataclass
class Checkpoint:
    algo: str                   # "ppo" or "sac"
    phi_rad: float
    train_step: int
    sizes: list[int]
    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def phi_deg(self) -> float:
        return math.degrees(self.phi_rad)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    """Versioned little-endian binary: header, then named row-major arrays."""
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", FORMAT_VERSION)
    tag = ckpt.algo.encode("ascii")[:4].ljust(4, b"\0")
    out += tag
    out += struct.pack("<d", ckpt.phi_rad)
    out += struct.pack("<Q", ckpt.train_step)
    out += struct.pack("<I", len(ckpt.sizes))
    for s in ckpt.sizes:
        out += struct.pack("<I", s)
    out += struct.pack("<I", len(ckpt.arrays))
    for name, arr in ckpt.arrays.items():
        encoded = name.encode("utf-8")
        out += struct.pack("<H", len(encoded))
        out += encoded
        out += struct.pack("<B", arr.ndim)
        for dim in arr.shape:
            out += struct.pack("<Q", dim)
        out += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(out))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        buf = fh.read()
    view = memoryview(buf)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(buf):
            raise CheckpointError(f"corrupt checkpoint: truncated at byte {pos}")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(4)) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (version,) = struct.unpack("<I", take(4))
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {version} (expected {FORMAT_VERSION})")
    algo = bytes(take(4)).rstrip(b"\0").decode("ascii")
    (phi_rad,) = struct.unpack("<d", take(8))
    (train_step,) = struct.unpack("<Q", take(8))
    (n_sizes,) = struct.unpack("<I", take(4))
    sizes = [struct.unpack("<I", take(4))[0] for _ in range(n_sizes)]
    (n_arrays,) = struct.unpack("<I", take(4))
    arrays: dict[str, np.ndarray] = {}
    for _ in range(n_arrays):
        (name_len,) = struct.unpack("<H", take(2))
        name = bytes(take(name_len)).decode("utf-8")
        (ndim,) = struct.unpack("<B", take(1))
        shape = tuple(struct.unpack("<Q", take(8))[0] for _ in range(ndim))
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(take(8 * count), dtype="<f8").reshape(shape)
        arrays[name] = data.copy()
    if pos != len(buf):
        raise CheckpointError("corrupt checkpoint: trailing bytes")
    return Checkpoint(algo=algo, phi_rad=phi_rad, train_step=train_step,
                      sizes=sizes, arrays=arrays)


def policy_from_checkpoint(ckpt: Checkpoint):
    """Rebuild an inference-ready network from checkpoint arrays."""
    rng = np.random.default_rng(0)
    if ckpt.algo == "ppo":
        net = PpoNet(rng)
        for name, param in zip(net.param_names(), net.params()):
            param.value = ckpt.arrays[f"net.{name}"].copy()
        return net
    if ckpt.algo == "sac":
        nets = SacNets(rng)
        for name, param in zip(nets.policy_param_names(), nets.policy_params()):
            param.value = ckpt.arrays[f"pi.{name}"].copy()
        return nets
    raise CheckpointError(f"unknown algorithm tag {ckpt.algo!r}")
