"""
Target SINR of the efficiency function
======================================

Every user ends up at the SINR that maximises packet successes per unit
of transmit energy.  For ``f(g) = (1 - exp(-g))**M`` that point is the root
of ``exp(g) - 1 = M g``.
"""

import numpy as np

from mcgame import EfficiencyModel

# the target grows slowly with the packet length
for m in (2, 10, 50, 100, 200, 1000):
    model = EfficiencyModel(m)
    print(f"M={m:5d}  gamma*={model.gamma_star:8.4f}  ({model.gamma_star_db:6.3f} dB)")

# f(g)/g peaks at gamma*: compare a few SINRs for M=100
model = EfficiencyModel(100)
grid = np.array([2.0, 4.0, 6.0, model.gamma_star, 8.0, 12.0])
for g, ratio in zip(grid, model(grid) / grid):
    print(f"g={g:7.4f}  f(g)/g={ratio:.5f}")
