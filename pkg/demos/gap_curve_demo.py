"""Gap-acceptance behaviour of the motivation filter.

Sweeps approach time gaps and both kerb sides and plots the probability
that the pedestrian commits to crossing before the vehicle arrives:

    python demos/gap_curve_demo.py [out_dir]

The near-side curve (pedestrian on the vehicle's lane side, half the road
to clear) shifts left of the far-side curve, and both saturate sharply:
the underlying model is deterministic, so the curve is a threshold.
"""

import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from crosswalk.evaluate import gap_acceptance_curve

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output")
out_dir.mkdir(parents=True, exist_ok=True)

gaps = np.arange(0.5, 8.01, 0.25)
fig, ax = plt.subplots(figsize=(7, 4))
for side, style in (("near", "o-"), ("far", "s--")):
    curve = gap_acceptance_curve(gaps, approach_speed=10.0, side=side, trials=5)
    ax.plot([g for g, _ in curve], [p for _, p in curve], style, label=f"{side} side")
ax.set_xlabel("time gap [s]")
ax.set_ylabel("P(crossing initiated)")
ax.set_title("Gap acceptance at 10 m/s approach")
ax.legend()
ax.grid(alpha=0.3)
fig.tight_layout()
fig.savefig(out_dir / "gap_curve.png", dpi=120)
print(f"wrote {out_dir / 'gap_curve.png'}")
