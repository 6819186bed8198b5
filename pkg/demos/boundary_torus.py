"""
====================================
A torus whose stable cone has a face on the light cone
====================================

The null directions are X1 = (-sin^2 pi x, 1) and X2 = (1, sin^2 pi y). On the
circles x = 0 and y = 0 they become the coordinate axes, and the stable cone
is the closed positive quadrant.
"""
import numpy as np

from lorentzlab import make_boundary_2torus
from lorentzlab.calibrate import Calibration, boundary_flowline_witness, l_infty
from lorentzlab.stable import estimate_cone, field_table

m = make_boundary_2torus()

cone = estimate_cone(m, R=20.0)
print("directions reached:", len(cone.directions))
print("hausdorff to the quadrant:", cone.hausdorff_to(np.eye(2)))

# %%
# Time separation per unit length across the quadrant. Shallow directions need
# long stretches hugging the null circles, which a finite stencil cannot follow:
# they come out unreached with an infinite (one-sided) error bar.
ang = np.linspace(0.05, np.pi / 2 - 0.05, 9)
tab = field_table(m, np.column_stack([np.cos(ang), np.sin(ang)]), R=10.0)
for u, v, e, f in zip(tab.directions, tab.values, tab.errs, tab.flags):
    print(f"u=({u[0]:.3f}, {u[1]:.3f})  ell_hat={v:.4f} +- {e:.4f}  {f}")

# %%
# dx is nonnegative on the stable cone, yet -dx^sharp is not future causal where
# X1 points backwards in x. A flowline of X1 is a causal curve along which the
# integral of dx + dphi is about -1 for every periodic phi.
print("l_infty of dx:", l_infty(m, [1.0, 0.0]))
print("l_infty of dx + dy:", l_infty(m, [1.0, 1.0]))
print(boundary_flowline_witness(Calibration([1.0, 0.0]), 1e-3))
print(boundary_flowline_witness(Calibration([1.0, 0.0], [((1, 0), 0.05, 0.02)]), 1e-3))
