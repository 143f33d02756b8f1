"""
More carriers, and playing the whole band at once
=================================================

Splitting a fixed bandwidth into more carriers (fewer chips each) raises
the total utility, because users gain more chances to find a strong
carrier.  The joint game also beats the alternative where each user
maximises its utility separately on every carrier.
"""

from mcgame import ExperimentSpec, SystemConfig, run_trials, summarize

base = SystemConfig(num_users=30, processing_gain=256)
report = run_trials(ExperimentSpec("utility-vs-d", (1, 2, 4, 8), base=base, trials=300, seed=3))
for point in report.points:
    print(f"D={point.value}  N={point.config.processing_gain:3d}  "
          f"mean total utility {point.utility_mean:.3e} bits/J")

base = SystemConfig(num_carriers=2, processing_gain=128)
report = run_trials(ExperimentSpec("compare", (2, 6, 10), base=base, trials=500, seed=4))
for point, row in zip(report.points, summarize(report)):
    print(f"K={point.value:2d}  joint {point.utility_mean:.3e}  "
          f"per-carrier {point.benchmark_mean:.3e}  ratio {row.utility_ratio:.2f}")
