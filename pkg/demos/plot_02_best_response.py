"""
Best responses and the BMP algorithm
====================================

A user's best response puts all its power on the carrier with the largest
effective gain, just enough to reach the target SINR.  Letting users take
turns playing best responses (BMP) drives the system to an equilibrium.
"""

import numpy as np

from mcgame import SystemConfig, best_response, bmp_run, sample_channel, total_utility

config = SystemConfig(num_users=4, num_carriers=3, processing_gain=32)
channel = sample_channel(config, np.random.default_rng(1))
print("channel gains (users x carriers):")
print(np.round(channel.gains, 3))

# a lone user just picks its strongest carrier
carrier, power = best_response(0, np.zeros((4, 3)), channel, "mf", config)
print(f"user 1 alone: carrier {carrier + 1}, power {power:.3e} W")

# the full game: sequential best responses until nobody wants to move
outcome = bmp_run(channel, config)
print(f"{outcome.status.value} after {outcome.iterations_used} rounds: {outcome.assignment}")
print("powers:", " ".join(f"{p:.3e}" for p in outcome.final_profile.max(axis=1)))
print(f"total utility {total_utility(outcome.final_profile, channel, 'mf', config):.3e} bits/J")
