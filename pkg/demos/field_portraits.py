"""Portraits of the vehicle-induced force fields.

Renders the repulsive shape field, the circulating flow field, the forward
corridor push, and the smoothed linear decay profile that scales them.
Run from the repository root:

    python demos/field_portraits.py [out_dir]

Writes four PNGs. Good first stop for getting a feel of how the pedestrian
is steered around and ahead of the vehicle.
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from crosswalk.pedestrian import (
    PedParams,
    VehiclePose,
    flow_force,
    linear_decay,
    shape_force,
    speed_force,
)

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out_dir.mkdir(parents=True, exist_ok=True)
params = PedParams()
pose = VehiclePose(0.0, 0.0, v=0.0)

# A grid around the vehicle; the ellipse itself is drawn for reference.
xs = np.linspace(-8, 8, 33)
ys = np.linspace(-5, 5, 27)
theta = np.linspace(0, 2 * np.pi, 100)
ellipse = (2.4 * np.cos(theta), 0.9 * np.sin(theta))


def quiver_field(fn, title, fname, normalise=True):
    u = np.zeros((ys.size, xs.size))
    v = np.zeros_like(u)
    for i, y in enumerate(ys):
        for j, x in enumerate(xs):
            f = fn(np.array([x, y]))
            norm = np.hypot(*f)
            if normalise and norm > 1e-9:
                f = f / norm * np.log1p(norm)
            u[i, j], v[i, j] = f
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.quiver(xs, ys, u, v, np.hypot(u, v), cmap="viridis", scale=120)
    ax.plot(*ellipse, "k-", lw=2)
    ax.set_aspect("equal")
    ax.set_title(title)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    fig.tight_layout()
    fig.savefig(out_dir / fname, dpi=120)
    plt.close(fig)
    print(f"wrote {out_dir / fname}")


# 1. Pure repulsion away from the body.
quiver_field(lambda p: shape_force(p, pose, params),
             "Shape field: repulsion along the ellipse normal",
             "field_shape.png")

# 2. Circulation that walks the pedestrian around a slow vehicle. The sign
#    follows the shorter way around given start and goal; here the walker
#    starts below the car and wants to get above it.
p0, goal = np.array([0.0, -4.0]), np.array([0.0, 4.0])
quiver_field(lambda p: flow_force(p, p0, goal, pose, params),
             "Flow field: circulation for a bottom-to-top crossing",
             "field_flow.png")

# 3. The fast-vehicle corridor push only exists ahead of the front bumper.
fast = VehiclePose(0.0, 0.0, v=12.0)
quiver_field(lambda p: speed_force(p, fast.v, params),
             "Speed field: lateral push out of the forward corridor (v=12 m/s)",
             "field_speed.png")

# 4. The decay profile all fields share, at the three parameter sets.
fig, ax = plt.subplots(figsize=(7, 4))
d = np.linspace(0, 10, 400)
for label, (amp, d0, sig) in [("shape", params.shape), ("flow", params.flow)]:
    ax.plot(d, [linear_decay(v, amp, d0, sig) for v in d], label=label)
ax.set_xlabel("distance (elliptical units)")
ax.set_ylabel("magnitude [N]")
ax.legend()
ax.set_title("Smoothed linear decay profiles")
fig.tight_layout()
fig.savefig(out_dir / "decay_profiles.png", dpi=120)
print(f"wrote {out_dir / 'decay_profiles.png'}")
