"""
How often does an equilibrium exist?
====================================

For two users and two carriers with Rayleigh fading the probabilities of
each outcome have closed forms.  Here they are compared with BMP runs on
random channels.
"""

from mcgame import ExperimentSpec, SystemConfig, analytic_pmf_2x2, run_trials

config = SystemConfig(num_users=2, num_carriers=2)
spec = ExperimentSpec("prob-vs-n", (4, 8, 16, 32, 64), base=config, trials=5000, seed=7)
report = run_trials(spec)

print("   N   P(1 on c1) sim/exact    P(none) sim/exact")
for point in report.points:
    exact = analytic_pmf_2x2(config.gamma_star, point.value)
    f = point.pmf.frequencies
    print(f"{point.value:4d}   {f[1]:.4f} / {exact.p1:.4f}      "
          f"{point.pmf.no_eq_frequency:.4f} / {exact.p_no_eq:.4f}")
