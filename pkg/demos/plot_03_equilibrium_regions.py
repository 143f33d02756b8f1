"""
Equilibrium regions for two users and two carriers
==================================================

With the matched filter, which carrier assignments are equilibria depends
only on the gain ratios ``h11/h12`` and ``h21/h22``.  The map below marks
each cell with the equilibria it admits; blank cells have none.
"""

import numpy as np

from mcgame import EfficiencyModel, classify_2x2

gstar = EfficiencyModel(100).gamma_star
n_pg = 16
symbols = {"(12,-)": "A", "(-,12)": "B", "(1,2)": "x", "(2,1)": "o"}

axis = np.logspace(-0.5, 0.5, 41)
print("rows: h21/h22 (top = large), columns: h11/h12 (left = small)")
for r2 in axis[::-1]:
    line = ""
    for r1 in axis:
        labels = classify_2x2(r1, r2, gstar, n_pg)
        if len(labels) > 1:
            line += "*"
        elif labels:
            line += symbols[next(iter(labels))]
        else:
            line += " "
    print(f"{r2:5.2f} |{line}|")
print("A: both on carrier 1, B: both on carrier 2, x: (1,2), o: (2,1), *: two equilibria")
