"""
Simulating paths of the construction
====================================

Draws a few paths and prints their values at a grid of query times
together with the mode (frozen at the start point vs busy, following the
time-changed driver).  A path that starts inside a gap holds its starting
value for a random while, then jumps to a gap edge and diffuses.
"""

import numpy as np

from fakebm.continuous_sim import simulate_marginal_samples
from fakebm.intervals import build_interval_system

system = build_interval_system([(0.1, 0.4), (0.6, 0.9)])
t_grid = (0.05, 0.1, 0.2, 0.4, 0.8)

# unconditioned start: N(0, 1), most paths begin busy
res = simulate_marginal_samples(system, t_grid, 6, seed=12, dt=1e-3)
print("unconditioned start")
print("path  " + "".join(f"t={t:<8g}" for t in t_grid))
for i in range(6):
    row = "".join(
        f"{res.values[i, q]:+.3f}{'*' if res.frozen[i, q] else ' '}  "
        for q in range(len(t_grid))
    )
    print(f"{i:4d}  {row}")
print("(* = still frozen at that time)\n")

# conditioned to start mid-gap: every path is frozen until its switch time
t_long = (0.5, 1.0, 2.0, 4.0, 8.0)
res = simulate_marginal_samples(
    system, t_long, 6, seed=12, dt=1e-3, fixed_start=0.5
)
print("started frozen at 0.5")
print("path  " + "".join(f"t={t:<8g}" for t in t_long) + "switch T   first busy value")
for i in range(6):
    row = "".join(
        f"{res.values[i, q]:+.3f}{'*' if res.frozen[i, q] else ' '}  "
        for q in range(len(t_long))
    )
    print(f"{i:4d}  {row}{res.switch_times[i]:8.3f}   {res.busy_start[i]:+.3f}")

# the first busy value sits at a gap edge (0.4 or 0.6) up to grid overshoot
landings = res.busy_start[np.isfinite(res.busy_start)]
print("\nlanding offsets from nearest edge:",
      np.round(np.minimum(np.abs(landings - 0.4), np.abs(landings - 0.6)), 4))
