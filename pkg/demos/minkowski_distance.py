"""
=============================
Time separation on a flat torus
=============================

The grid DP gives a lower estimate of the time separation. On the flat
2-torus the exact value is sqrt(t^2 - x^2), so the error is visible directly.
"""
import math

import numpy as np

from lorentzlab import make_flat
from lorentzlab.reach import refine_maximizer, time_separation
from lorentzlab.spacetime import lorentz_length

m = make_flat(2)

# A target along a stencil direction is hit exactly; an off-stencil target is not.
for q in ([2.0, 1.0], [2.0, 0.74]):
    exact = math.sqrt(q[0] ** 2 - q[1] ** 2)
    for dx in (0.04, 0.02, 0.01):
        for k in (2, 5):
            d, path = time_separation(m, [0, 0], q, dx, k)
            print(f"q={q} dx={dx:<5} k={k}  d_hat={d:.8f}  exact={exact:.8f}  err={exact - d:.2e}")

# Refinement straightens a coarse maximizer towards the chord.
d, path = time_separation(m, [0, 0], [2.0, 0.74], 0.1, 2)
better = refine_maximizer(m, path.simplified(), 30, step=0.1)
print("coarse", d, "refined", lorentz_length(m, better), "exact", math.sqrt(4 - 0.74 ** 2))

# Spacelike targets are unreachable.
d, path = time_separation(m, [0, 0], [0.5, 1.0], 0.05)
print("spacelike target:", d, len(path), "vertices")
