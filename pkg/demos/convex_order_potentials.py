"""
Potential functions and the convex order premise
================================================

Split a standard normal by conditioning on the symmetrized removed set
and on its complement, then scale each conditional law by sqrt(t).  The
potential u_t(x) = E|x - sqrt(t) Y| must be non-decreasing in t for both
halves; that monotonicity is what lets the two populations be recombined
without disturbing the Gaussian marginals.
"""

import numpy as np

from fakebm.analysis import convex_order_check, potential_function, symmetrized_split

halves = symmetrized_split(2)
t_grid = (0.25, 0.5, 1.0, 2.0)
x_probe = np.array([0.0, 0.5, 1.0, 2.0])

for name, pieces in zip(("removed set", "kept set"), halves):
    print(f"potential of the {name} law at x = {x_probe.tolist()}")
    for t in t_grid:
        u = potential_function(x_probe, t, pieces)
        print(f"  t = {t:<5g} u = " + "  ".join(f"{v:.6f}" for v in u))
    print()

x_grid = np.arange(-4.0, 4.0 + 1e-9, 0.05)
ok = convex_order_check(2, t_grid, x_grid, tol=1e-9)
print(f"non-decreasing in t at every grid point: {ok}")
