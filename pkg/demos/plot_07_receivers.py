"""
Matched filter, decorrelator and MMSE
=====================================

Better receivers suppress more interference.  The decorrelator removes it
entirely, so every user simply picks its strongest carrier and an
equilibrium always exists.
"""

from mcgame import ExperimentSpec, SystemConfig, run_trials

for receiver in ("mf", "mmse", "de"):
    spec = ExperimentSpec("prob-vs-n", (4, 8, 16), base=SystemConfig(receiver=receiver),
                          trials=3000, seed=2)
    row = "  ".join(f"N={p.value}: {p.pmf.no_eq_frequency:.3f}" for p in run_trials(spec).points)
    print(f"{receiver:5s} P(no equilibrium)  {row}")
