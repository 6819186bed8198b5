"""
=====================
Exchanging crossing ends
=====================

Two unit-speed segments through nearby points at a small angle: swapping
their second halves gains length quadratically in the angle. The DP route
and the closed form agree.
"""
import math

import numpy as np

from lorentzlab import make_flat
from lorentzlab.graphcheck import crossing_gain, minkowski_ladder, straight_segment

m = make_flat(2)
for theta in (0.05, 0.1, 0.2, 0.4):
    x1 = straight_segment([0, 0], [1, 0], 0.1)
    x2 = straight_segment([0, 1e-4], [math.cos(theta), math.sin(theta)], 0.1)
    exact = crossing_gain(m, x1, x2, route="exact")
    dp = crossing_gain(m, x1, x2, stencil_k=3)
    print(f"theta={theta:<5} gain exact={exact:.3e} dp={dp:.3e} gain/theta^2={exact / theta ** 2:.4f}")

# %%
# Nearby maximizers in Minkowski space: base distance delta^2, tangent distance
# delta, so the tangent map is 1/2-Hoelder but not Lipschitz.
lad = minkowski_ladder()
for r in lad["rows"]:
    print(f"delta={r['delta']:.0e}  base={r['dist_base']:.1e}  tangent={r['dist_tangent']:.1e}  "
          f"K'={r['K_lipschitz']:.1f}")
print("fitted exponent", round(lad["exponent"], 4))
