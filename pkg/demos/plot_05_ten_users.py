"""
Ten users on two carriers
=========================

With few chips per symbol the carriers cannot hold five users each, so no
equilibrium exists and powers grow without bound.  As the processing gain
grows, equilibria appear and the split between carriers becomes more
uneven: the spread of the number of users on carrier 1 widens towards the
binomial limit.
"""

import math

from mcgame import ExperimentSpec, SystemConfig, run_trials, summarize

config = SystemConfig(num_users=10, num_carriers=2)
spec = ExperimentSpec("stddev", (16, 25, 32, 64, 128, 256), base=config, trials=1000, seed=5)
report = run_trials(spec)

for point, row in zip(report.points, summarize(report)):
    std = "undefined" if row.std_x1 is None else f"{row.std_x1:.3f}"
    print(f"N={point.value:4d}  P(no eq)={point.pmf.no_eq_frequency:.3f}  std(X1)={std}")
print(f"binomial limit std = {math.sqrt(10) / 2:.3f}")
