"""Line-delimited JSON bridge exposing the environment over stdio.

One bridge process serves one environment handle: `reset` starts a fresh
episode, `step` advances it, `close` shuts the process down. Every step
response carries the canonical trace line for that step, so a foreign
client can reproduce native trace files byte for byte without
re-serialising floats.
"""

from __future__ import annotations

import json
import sys

from . import __version__
from .env import (
    COLLISION,
    GOAL,
    CrossingEnv,
    EpisodeFinished,
    PedVariant,
    format_record,
    trace_header,
    trace_step_record,
)

ABI = "crosswalk-env-abi/1"


def _variant(name: str) -> PedVariant:
    try:
        return PedVariant(name)
    except ValueError:
        raise ValueError(f"unknown pedestrian variant {name!r}") from None


def serve(stdin=None, stdout=None, scenario=None, ped_params=None,
          config_hash: str = "default") -> int:
    """Blocking command loop; returns the process exit code."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout

    def emit(obj):
        stdout.write(format_record(obj) + "\n")
        stdout.flush()

    emit({"type": "hello", "abi": ABI, "version": __version__,
          "config_hash": config_hash, "obs_dim": 5})

    env: CrossingEnv | None = None
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            cmd = json.loads(line)
            op = cmd.get("op")
            if op == "close":
                emit({"type": "closed"})
                return 0
            if op == "reset":
                seed = int(cmd["seed"])
                phi_deg = float(cmd.get("phi_deg", 0.0))
                variant = _variant(cmd.get("variant", "aware"))
                env = CrossingEnv(scenario=scenario, ped_params=ped_params,
                                  phi_deg=phi_deg, variant=variant)
                obs = env.reset(seed=seed, side=cmd.get("side"))
                header = trace_header(seed, config_hash, phi_deg,
                                      variant.value, __version__)
                emit({"type": "reset", "obs": list(obs),
                      "trace_header": format_record(header)})
            elif op == "step":
                if env is None:
                    raise EpisodeFinished("no episode: send reset first")
                obs, bd, done, info = env.step(float(cmd["u"]))
                terminated = done and info["event"] in (COLLISION, GOAL)
                truncated = done and not terminated
                emit({"type": "step", "obs": list(obs),
                      "reward": bd.r_total, "terminated": terminated,
                      "truncated": truncated, "info": info,
                      "trace_line": format_record(trace_step_record(info))})
            else:
                raise ValueError(f"unknown op {op!r}")
        except (KeyError, ValueError, EpisodeFinished) as err:
            emit({"type": "error", "message": str(err)})
    return 0
