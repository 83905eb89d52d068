"""Following the overlay model along the level parameter.

On a 2 x 2 box the connection probability of a vertex to the boundary is
computed exactly for each draw of the scale fields, over a grid of levels.
The schedule raises q as the single-scale channels switch off, and at
lam = inf the model hands over to the next scale at lam = 0.

    python demos/overlay_flow.py
"""
import warnings

import numpy as np

from gffperc import Schedule, harness

warnings.simplefilter("ignore", RuntimeWarning)

sched = Schedule(alpha=1.0, n0=8)
print(f"schedule limit {sched.limit():.6f}; q_8(0) = {sched(8, 0):.5f}, q_8(inf) = {sched(8, np.inf):.5f}")

for h in (5.0, 0.5, 0.05):
    rep = harness.verify_flow(h=h, samples=1000, lam_grid=np.linspace(0, 2, 9))
    curve = " ".join(f"{m:.5f}" for m in rep["mean"])
    print(f"h = {h:4}: {curve}")
    print(f"          worst drop {rep['worst_drop_se']:.2f} se, endpoint gap {rep['endpoint_gap']:.1e}, "
          f"span {rep['curve_span']:.1e}")
