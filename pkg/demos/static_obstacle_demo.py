"""Walking around a parked vehicle.

The circulating flow term is the difference between getting stuck behind an
obstacle and strolling around it: with the shape repulsion alone, a walker
whose goal lies straight across the car reaches a force balance and stops.
This demo traces a fan of crossings through a parked car and plots them:

    python demos/static_obstacle_demo.py [out_dir]
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from crosswalk.pedestrian import (
    NEAR_SIDE,
    PedParams,
    PedestrianState,
    VehiclePose,
    pedestrian_step,
)

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out_dir.mkdir(parents=True, exist_ok=True)
params = PedParams()
pose = VehiclePose(20.0, -1.5, v=0.0)

fig, ax = plt.subplots(figsize=(8, 5))
theta = np.linspace(0, 2 * np.pi, 100)
ax.plot(20.0 + 2.4 * np.cos(theta), -1.5 + 0.9 * np.sin(theta), "k-", lw=2)
ax.axhspan(-3.0, 3.0, color="0.92", zorder=0)  # the road

for x_off in np.linspace(-1.5, 1.5, 7):
    p = np.array([20.0 + x_off, -3.5])
    g = np.array([20.0 - x_off, 3.5])
    s = PedestrianState(p.copy(), np.zeros(2), 1.0, p.copy(), g.copy(), NEAR_SIDE)
    xs, ys = [p[0]], [p[1]]
    for _ in range(600):
        s = pedestrian_step(s, pose, params, 0.1)
        xs.append(float(s.p[0]))
        ys.append(float(s.p[1]))
        if np.linalg.norm(s.p - g) < 0.2:
            break
    ax.plot(xs, ys, alpha=0.8)
    ax.plot(*p, "o", color="tab:orange", ms=5)
    ax.plot(*g, "o", color="tab:purple", ms=5)

ax.set_aspect("equal")
ax.set_xlim(14, 26)
ax.set_title("Crossings blocked by a parked car (orange: start, purple: goal)")
ax.set_xlabel("x [m]")
ax.set_ylabel("y [m]")
fig.tight_layout()
fig.savefig(out_dir / "static_obstacle.png", dpi=120)
print(f"wrote {out_dir / 'static_obstacle.png'}")
