"""Nash equilibria of the multi-carrier power control game.

At an equilibrium every user sits on exactly one carrier at the target
SINR, so candidate equilibria are carrier assignments (``D**K`` of them).
For the matched filter an assignment is an equilibrium iff every user's
gain ratios clear occupancy-dependent thresholds built from

    Theta_n = 1 / (1 - (n - 1) gamma* / N),

where ``n`` is the number of users on a carrier.  For the decorrelator and
MMSE receivers no such closed form exists and the check is done by
computing the SINR-balanced powers and testing every user's best response.
"""

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import EnumerationCapExceeded, InfeasibleError, InfeasibleOccupancy
from .game import CarrierAssignment, _best_response_arrays, sinr_balanced_powers
from .receivers import ReceiverKind

ENUMERATION_CAP = 10 ** 6

BOTH_ON_FIRST = "(12,-)"
BOTH_ON_SECOND = "(-,12)"
SPLIT_12 = "(1,2)"
SPLIT_21 = "(2,1)"


# ---------------------------------------------------------------------------
# Theta
# ---------------------------------------------------------------------------
def theta(n, gamma_star, processing_gain):
    """Power inflation factor for ``n`` users sharing a carrier at the target SINR.

    Raises ``InfeasibleOccupancy`` when ``(n-1) gamma*/N >= 1``, i.e. when
    ``n`` users cannot all reach ``gamma*`` on one carrier.
    """
    denom = 1.0 - (n - 1) * gamma_star / processing_gain
    if denom <= 0:
        raise InfeasibleOccupancy(
            f"infeasible occupancy: {n} users cannot share a carrier at SINR "
            f"{gamma_star:.4g} with N={processing_gain} "
            f"(at most {max_occupancy(gamma_star, processing_gain)})")
    return 1.0 / denom


def max_occupancy(gamma_star, processing_gain):
    """Largest number of users that can share one carrier at the target SINR."""
    # (n - 1) gamma* / N < 1
    n = math.ceil(processing_gain / gamma_star)
    return n if (n - 1) * gamma_star < processing_gain else n - 1


@dataclass(frozen=True)
class ThetaTable:
    """``Theta_0 .. Theta_K`` for fixed ``gamma*`` and ``N``.

    Only occupancies that are feasible are tabulated; indexing beyond them
    raises ``InfeasibleOccupancy``.
    """

    gamma_star: float
    processing_gain: int
    num_users: int

    @property
    def values(self):
        top = min(self.num_users, max_occupancy(self.gamma_star, self.processing_gain))
        return tuple(theta(n, self.gamma_star, self.processing_gain) for n in range(top + 1))

    def __getitem__(self, n):
        if not 0 <= n <= self.num_users:
            raise IndexError(n)
        return theta(n, self.gamma_star, self.processing_gain)

    def __len__(self):
        return len(self.values)


# ---------------------------------------------------------------------------
# Equilibrium checks
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class EquilibriumCheck:
    """Truthy result of an equilibrium test, with the reason when it fails."""

    ok: bool
    reason: Optional[str] = None

    def __bool__(self):
        return self.ok


def equilibrium_powers(assignment, channel, config):
    """Matched-filter equilibrium powers ``gamma* sigma^2 Theta_n(l) / h_kl``.

    Each user gets that power on its assigned carrier and zero elsewhere.
    """
    occupancy = assignment.occupancy
    gstar, noise, n_pg = config.gamma_star, config.noise_power, config.processing_gain
    powers = np.zeros((assignment.num_users, assignment.num_carriers))
    for k, carrier in enumerate(assignment.carrier_of):
        t = theta(occupancy[carrier], gstar, n_pg)
        powers[k, carrier] = gstar * noise * t / channel.gains[k, carrier]
    return powers


def _check_matched_filter(assignment, channel, config):
    gstar, n_pg = config.gamma_star, config.processing_gain
    occupancy = assignment.occupancy
    try:
        thetas = {n: theta(n, gstar, n_pg) for n in set(occupancy.tolist()) | {0}}
    except InfeasibleOccupancy as exc:
        return EquilibriumCheck(False, str(exc))
    if not config.unbounded_power:
        powers = equilibrium_powers(assignment, channel, config)
        if np.any(powers > config.max_power):
            return EquilibriumCheck(False, "target SINR needs more than P_max")
    h = channel.gains
    for k, carrier in enumerate(assignment.carrier_of):
        for other in range(assignment.num_carriers):
            if other == carrier:
                continue
            # occupancy of the other carrier does not include user k
            threshold = thetas[occupancy[carrier]] / thetas[occupancy[other]] * thetas[0]
            if not h[k, carrier] / h[k, other] > threshold:
                return EquilibriumCheck(
                    False, f"user {k + 1} prefers carrier {other + 1} to carrier {carrier + 1}")
    return EquilibriumCheck(True)


def check_equilibrium_fixed_point(assignment, channel, config, kind=None, rtol=1e-6):
    """Equilibrium test by best-response self-consistency (any receiver).

    Computes the powers at which all users reach the target SINR on their
    assigned carriers, then requires each user's best response against
    those powers to be its own (carrier, power).
    """
    kind = ReceiverKind.parse(config.receiver if kind is None else kind)
    try:
        powers, feasible = sinr_balanced_powers(assignment.mask(), channel, config, kind)
    except InfeasibleError as exc:
        return EquilibriumCheck(False, str(exc))
    if not feasible:
        return EquilibriumCheck(False, "target SINR cannot be met on the assigned carriers")
    for k, carrier in enumerate(assignment.carrier_of):
        best, power, _ = _best_response_arrays(k, powers, channel, kind, config)
        if int(best) != carrier:
            return EquilibriumCheck(
                False, f"user {k + 1} prefers carrier {int(best) + 1} to carrier {carrier + 1}")
        if not abs(power - powers[k, carrier]) <= rtol * powers[k, carrier]:
            return EquilibriumCheck(False, f"user {k + 1} would change its power")
    return EquilibriumCheck(True)


def check_equilibrium(assignment, channel, config, kind=None):
    """Is ``assignment`` (with target-SINR powers) a Nash equilibrium?

    Matched filter: closed-form gain-ratio thresholds, with strict
    inequalities.  Decorrelator and MMSE: :func:`check_equilibrium_fixed_point`.
    Returns an :class:`EquilibriumCheck`, false with a reason on failure.
    """
    kind = ReceiverKind.parse(config.receiver if kind is None else kind)
    if kind is ReceiverKind.MATCHED_FILTER:
        return _check_matched_filter(assignment, channel, config)
    return check_equilibrium_fixed_point(assignment, channel, config, kind)


def enumerate_equilibria(channel, config, kind=None, cap=ENUMERATION_CAP):
    """All carrier assignments that are equilibria, in lexicographic order."""
    k, d = channel.num_users, channel.num_carriers
    if d ** k > cap:
        raise EnumerationCapExceeded(f"{d}**{k} = {d ** k} assignments exceed the cap of {cap}")
    found = []
    for carriers in itertools.product(range(d), repeat=k):
        assignment = CarrierAssignment(carriers, d)
        if check_equilibrium(assignment, channel, config, kind):
            found.append(assignment)
    return found


# ---------------------------------------------------------------------------
# Two users, two carriers
# ---------------------------------------------------------------------------
def classify_2x2(ratio1, ratio2, gamma_star, processing_gain):
    """Equilibria of the 2-user 2-carrier matched-filter game.

    ``ratio1 = h11/h12`` and ``ratio2 = h21/h22``.  Returns a frozenset of
    labels among ``(12,-)``, ``(-,12)``, ``(1,2)`` and ``(2,1)``; empty when
    no equilibrium exists.
    """
    theta0 = theta(0, gamma_star, processing_gain)
    labels = set()
    try:
        theta2 = theta(2, gamma_star, processing_gain)
    except InfeasibleOccupancy:
        theta2 = None
    if theta2 is not None:
        if ratio1 > theta2 and ratio2 > theta2:
            labels.add(BOTH_ON_FIRST)
        if ratio1 < 1 / theta2 and ratio2 < 1 / theta2:
            labels.add(BOTH_ON_SECOND)
    if ratio1 > theta0 and ratio2 < 1 / theta0:
        labels.add(SPLIT_12)
    if ratio1 < 1 / theta0 and ratio2 > theta0:
        labels.add(SPLIT_21)
    return frozenset(labels)


@dataclass(frozen=True)
class AnalyticPmf2x2:
    """Probabilities of 0, 1 or 2 users on the first carrier, and of no equilibrium."""

    p0: float
    p1: float
    p2: float
    p_no_eq: float

    def as_tuple(self):
        return (self.p0, self.p1, self.p2, self.p_no_eq)


def analytic_pmf_2x2(gamma_star, processing_gain):
    """Closed-form equilibrium probabilities for two users and two carriers
    with i.i.d. unit-mean exponential gains and the matched filter.

    For ``N <= gamma*`` two users cannot share a carrier, so only the split
    equilibria remain.
    """
    n_pg = processing_gain
    theta0 = theta(0, gamma_star, n_pg)
    p1 = 2.0 / (1.0 + theta0) ** 2 - ((1.0 - theta0) / (1.0 + theta0)) ** 2
    no_split = 2.0 * (theta0 / (1.0 + theta0)) ** 2
    if n_pg <= gamma_star:
        return AnalyticPmf2x2(0.0, p1, 0.0, no_split)
    both = (1.0 / (1.0 + theta(2, gamma_star, n_pg))) ** 2
    return AnalyticPmf2x2(both, p1, both, no_split - 2.0 * both)


def binomial_limit_pmf(num_users, m):
    """Large-N limit of P(m users on the first of two carriers): C(K, m) / 2**K."""
    if not 0 <= m <= num_users:
        raise ValueError(f"m must lie in [0, {num_users}]")
    return math.comb(num_users, m) / 2.0 ** num_users


def target_outage_parameter(distance, path_loss_constant, path_loss_exponent,
                            noise_power, gamma_star, max_power):
    """``b = d**nu sigma^2 gamma* / (c P_max)``.

    A user alone on a carrier with unit-mean exponential fading fails to
    reach ``gamma*`` within ``P_max`` with probability ``1 - exp(-b)``.
    """
    return distance ** path_loss_exponent * noise_power * gamma_star / (path_loss_constant * max_power)


def target_outage_probability(b):
    return -math.expm1(-b)
