"""A small end-to-end run: train briefly, then watch one episode.

Not meant to produce a good driver (that takes the full desk-scale budget,
see the README); it demonstrates the train -> checkpoint -> evaluate loop
and prints a readable step log of the trained agent meeting a pedestrian:

    python demos/train_and_watch.py [steps]
"""

import sys
import tempfile
from pathlib import Path

from crosswalk.env import CrossingEnv, PedVariant
from crosswalk.evaluate import act_fn_from_checkpoint
from crosswalk.training import TrainConfig, train

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000

with tempfile.TemporaryDirectory() as tmp:
    cfg = TrainConfig(algo="ppo", phi_deg=40.0, total_steps=steps)
    print(f"training PPO, SVO 40 deg, {steps} steps ...")
    result = train(cfg, seed=0, out_dir=Path(tmp))
    act, ck = act_fn_from_checkpoint(result.checkpoint_path)

    env = CrossingEnv(phi_deg=ck.phi_deg, variant=PedVariant.AWARE)
    obs = env.reset(seed=7, side="bottom")
    print(f"\nvehicle starts at {env.pose.v:.1f} m/s; pedestrian at "
          f"x={env.ped.p[0]:.1f} m on the near kerb\n")
    print(f"{'t[s]':>5} {'x_v':>6} {'v_v':>5} {'u':>6} {'gap':>6} {'M':>5}")
    done = False
    step = 0
    while not done:
        u = act(obs)
        obs, _, done, info = env.step(u)
        step += 1
        if step % 5 == 0:  # print every half second
            print(f"{step / 10:5.1f} {info['x_v']:6.1f} {info['v_v']:5.1f} "
                  f"{u:+6.2f} {info['d_gap']:6.1f} {info['motivation']:5.2f}")
    print(f"\nepisode ended: {info['event']} after {step / 10:.1f} s")
