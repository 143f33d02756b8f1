"""Multi-carrier utility, best responses and the sequential best-response
(BMP) power control algorithm.

The BMP engine is written for a batch of independent channel realizations:
users are still updated one after another, but each update is a single
array operation over all trials that have not yet settled.  Running one
channel is the special case of a batch of size one.
"""

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InfeasibleError
from .receivers import ReceiverKind, effective_gains, sinr_matrix


# ---------------------------------------------------------------------------
# Carrier assignments
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class CarrierAssignment:
    """Which single carrier each user transmits on (0-based indices)."""

    carrier_of: tuple
    num_carriers: int

    def __post_init__(self):
        carriers = tuple(int(c) for c in self.carrier_of)
        if any(c < 0 or c >= self.num_carriers for c in carriers):
            raise ValueError(f"carrier indices must lie in [0, {self.num_carriers})")
        object.__setattr__(self, "carrier_of", carriers)

    @property
    def num_users(self):
        return len(self.carrier_of)

    @property
    def occupancy(self):
        """Number of users on each carrier, length ``D``."""
        return np.bincount(np.asarray(self.carrier_of, dtype=int), minlength=self.num_carriers)

    def mask(self):
        """Boolean ``(K, D)`` matrix marking each user's carrier."""
        m = np.zeros((self.num_users, self.num_carriers), dtype=bool)
        m[np.arange(self.num_users), self.carrier_of] = True
        return m

    def label(self):
        """Compact label listing the (1-based) users per carrier, e.g. ``(12,-)``."""
        sep = "" if self.num_users < 10 else "."
        groups = []
        for carrier in range(self.num_carriers):
            users = [str(k + 1) for k, c in enumerate(self.carrier_of) if c == carrier]
            groups.append(sep.join(users) if users else "-")
        return "(" + ",".join(groups) + ")"

    def __str__(self):
        return self.label()

    @classmethod
    def from_profile(cls, powers):
        """Read the assignment off a single-carrier power profile."""
        p = np.asarray(powers, dtype=float)
        if np.any(p.max(axis=-1) <= 0):
            raise ValueError("every user needs a positive power on some carrier")
        return cls(tuple(np.argmax(p, axis=-1)), p.shape[-1])


# ---------------------------------------------------------------------------
# Utility
# ---------------------------------------------------------------------------
def user_utilities(powers, channel, kind, config):
    """Utility (bits/Joule) of every user, shape ``(..., K)``.

    Total goodput over all carriers divided by total transmit power; users
    that transmit nothing get utility 0.
    """
    p = np.asarray(powers, dtype=float)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        gamma = sinr_matrix(kind, p, channel, config)
        goodput = config.throughput_scale * config.efficiency(gamma).sum(axis=-1)
        total_power = p.sum(axis=-1)
        u = np.where(total_power > 0, goodput / np.where(total_power > 0, total_power, 1.0), 0.0)
    return np.nan_to_num(u, nan=0.0, posinf=0.0)


def multicarrier_utility(user, powers, channel, kind, config):
    """Utility of one user for the given power profile (bits/Joule)."""
    return float(user_utilities(powers, channel, kind, config)[..., user])


def total_utility(powers, channel, kind, config):
    """Sum of all users' utilities, shape ``(...)``."""
    return user_utilities(powers, channel, kind, config).sum(axis=-1)


def per_carrier_utility(user, powers, channel, kind, config):
    """Alternative utility ``sum_l T_kl / p_kl`` (carriers with zero power skipped).

    Maximised by hitting the target SINR on every carrier separately; it
    is the objective behind :func:`independent_max_benchmark`.
    """
    p = np.asarray(powers, dtype=float)
    gamma = sinr_matrix(kind, p, channel, config)[..., user, :]
    own = p[..., user, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(own > 0, config.throughput_scale * config.efficiency(gamma) / own, 0.0)
    return terms.sum(axis=-1)


# ---------------------------------------------------------------------------
# Best response
# ---------------------------------------------------------------------------
def _best_response_arrays(user, powers, channel, kind, config):
    """Vectorised best response: (carrier, power, capped), each of shape ``(...)``.

    The best carrier has the largest effective gain, i.e. the smallest
    power for the target SINR; ``np.argmax`` breaks ties towards the
    lowest index.  If the target is out of reach the power is capped at
    ``P_max`` (the carrier is still the one with the largest gain, which
    then gives the highest SINR).
    """
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        gains = effective_gains(kind, powers, channel, user, config)
        carrier = np.argmax(gains, axis=-1)
        best = np.take_along_axis(gains, carrier[..., None], axis=-1)[..., 0]
        power = config.gamma_star / best
    capped = power > config.max_power
    power = np.where(capped, config.max_power, power)
    return carrier, power, capped


def best_response(user, powers, channel, kind, config):
    """Utility-maximising strategy of ``user`` against the other users' powers.

    Returns ``(carrier, power)``: the user transmits only on ``carrier``
    (0-based) with just enough power to reach the target SINR there, or at
    ``P_max`` if the target cannot be reached on any carrier.
    """
    carrier, power, _ = _best_response_arrays(user, powers, channel, kind, config)
    return int(carrier), float(power)


def best_response_profile(user, powers, channel, kind, config):
    """Copy of ``powers`` with ``user``'s row replaced by its best response."""
    carrier, power = best_response(user, powers, channel, kind, config)
    out = np.array(powers, dtype=float)
    out[user] = 0.0
    out[user, carrier] = power
    return out


# ---------------------------------------------------------------------------
# BMP algorithm
# ---------------------------------------------------------------------------
class BmpStatus(enum.Enum):
    CONVERGED = "converged"
    NO_CONVERGENCE = "no-convergence"


@dataclass(frozen=True)
class BmpOutcome:
    """Result of one BMP run.

    ``assignment`` is always read off ``final_profile`` (so it can be used
    for end-of-run counting) but is only an equilibrium when ``status`` is
    ``CONVERGED``.
    """

    status: BmpStatus
    final_profile: np.ndarray
    assignment: CarrierAssignment
    iterations_used: int
    capped_users: frozenset = field(default_factory=frozenset)

    @property
    def converged(self):
        return self.status is BmpStatus.CONVERGED


@dataclass
class BmpBatchOutcome:
    """BMP results for a batch of ``T`` channels (arrays indexed by trial)."""

    converged: np.ndarray        # (T,) bool
    final_profile: np.ndarray    # (T, K, D)
    carrier_of: np.ndarray       # (T, K) int
    iterations_used: np.ndarray  # (T,) int
    capped: np.ndarray           # (T, K) bool

    def __len__(self):
        return len(self.converged)

    def occupancy(self, carrier=0):
        """Number of users on ``carrier`` at the end of each run."""
        return np.sum(self.carrier_of == carrier, axis=-1)

    def outcome(self, index):
        status = BmpStatus.CONVERGED if self.converged[index] else BmpStatus.NO_CONVERGENCE
        profile = self.final_profile[index].copy()
        return BmpOutcome(
            status=status,
            final_profile=profile,
            assignment=CarrierAssignment(tuple(self.carrier_of[index]), profile.shape[-1]),
            iterations_used=int(self.iterations_used[index]),
            capped_users=frozenset(int(k) for k in np.flatnonzero(self.capped[index])),
        )


def _carriers_of(powers):
    """Current carrier of each user (-1 if the user is silent)."""
    carrier = np.argmax(powers, axis=-1)
    return np.where(powers.max(axis=-1) > 0, carrier, -1)


def bmp_run_batch(channel, config, initial=None, order=None, kind=None):
    """Run BMP on a batch of channels with gains of shape ``(T, K, D)``.

    Each round lets every user (in ``order``) switch to its best response
    given the current powers of all others.  A trial is declared converged
    when a full round leaves every user on the same carrier and changes no
    power by more than ``config.power_tolerance`` (relative); converged
    trials are frozen.  Trials still moving after ``config.bmp_max_iter``
    rounds are reported as not converged, with their last profile.
    """
    kind = ReceiverKind.parse(config.receiver if kind is None else kind)
    if channel.gains.ndim != 3:
        raise ValueError("bmp_run_batch expects gains with shape (T, K, D)")
    num_trials, num_users, num_carriers = channel.gains.shape
    if order is None:
        order = range(num_users)
    order = [int(k) for k in order]
    if sorted(order) != list(range(num_users)):
        raise ValueError(f"order must be a permutation of range({num_users})")

    if initial is None:
        powers = np.zeros(channel.gains.shape)
    else:
        powers = np.array(np.broadcast_to(initial, channel.gains.shape), dtype=float)
        if np.any(powers < 0) or np.any(powers > config.max_power):
            raise ValueError("initial powers must lie in [0, P_max]")
    converged = np.zeros(num_trials, dtype=bool)
    iterations = np.zeros(num_trials, dtype=int)
    capped = np.zeros((num_trials, num_users), dtype=bool)
    carriers = _carriers_of(powers)

    active = np.arange(num_trials)
    tol = config.power_tolerance
    rows = None
    sub = channel
    for rnd in range(1, config.bmp_max_iter + 1):
        if active.size == 0:
            break
        if rows is None or rows.size != active.size:
            rows = np.arange(active.size)
        if active.size != sub.gains.shape[0]:
            sub = channel_subset(channel, active)
        start = powers[active]
        start_carriers = carriers[active]
        p = start.copy()
        new_carriers = np.empty_like(start_carriers)
        new_capped = np.empty((active.size, num_users), dtype=bool)
        for k in order:
            c, pw, cap = _best_response_arrays(k, p, sub, kind, config)
            p[:, k, :] = 0.0
            p[rows, k, c] = pw
            new_carriers[:, k] = c
            new_capped[:, k] = cap

        old = start[rows[:, None], np.arange(num_users)[None, :], new_carriers]
        new = p[rows[:, None], np.arange(num_users)[None, :], new_carriers]
        with np.errstate(divide="ignore", invalid="ignore"):
            small = np.abs(new - old) <= tol * old
        settled = np.all((new_carriers == start_carriers) & small, axis=-1)

        powers[active] = p
        carriers[active] = new_carriers
        capped[active] = new_capped
        iterations[active] = rnd
        converged[active[settled]] = True
        if np.any(settled):
            keep = ~settled
            active = active[keep]
            sub = channel_subset(sub, keep)

    return BmpBatchOutcome(converged, powers, carriers, iterations, capped)


def channel_subset(channel, index):
    """Batch subset of a channel realization that keeps cached correlations."""
    sub = channel.trial(index)
    for name in ("gram", "decorrelator_diag"):
        if name in channel.__dict__:
            sub.__dict__[name] = channel.__dict__[name][index]
    return sub


def bmp_run(channel, config, initial=None, order=None, kind=None) -> BmpOutcome:
    """Run the BMP algorithm on a single channel realization.

    Parameters
    ----------
    channel : ChannelRealization
        Gains of shape ``(K, D)``.
    config : SystemConfig
        Supplies the receiver (unless ``kind`` is given), the round limit and
        the convergence tolerance.
    initial : array_like, optional
        Starting ``(K, D)`` power profile; all zeros by default.
    order : sequence of int, optional
        Order in which users update within a round; ascending by default.
    """
    batch = channel_subset(channel, np.newaxis) if channel.gains.ndim == 2 else channel
    init = None if initial is None else np.asarray(initial, dtype=float)[None]
    return bmp_run_batch(batch, config, init, order, kind).outcome(0)


def assignment_profile(assignment, channel, config):
    """Power profile placing each user on its assigned carrier at its
    noise-limited target power ``gamma* sigma^2 / h`` (capped at ``P_max``).

    Handy as a BMP starting point for a prescribed carrier assignment.
    """
    mask = assignment.mask()
    with np.errstate(divide="ignore"):
        p = config.gamma_star * config.noise_power / channel.gains
    return np.where(mask, np.minimum(p, config.max_power), 0.0)


# ---------------------------------------------------------------------------
# Target-SINR balancing and the per-carrier benchmark
# ---------------------------------------------------------------------------
def sinr_balanced_powers(mask, channel, config, kind=None, max_iter=20000, rtol=1e-13):
    """Powers at which every active (user, carrier) pair in ``mask`` reaches
    the target SINR, holding all other entries at zero.

    Returns ``(powers, feasible)``.  Closed forms are used for the matched
    filter and decorrelator without a power limit; otherwise the standard
    fixed-point iteration ``p <- min(gamma*/h_eff(p), P_max)`` is run from
    zero, which increases monotonically to the least fixed point when one
    exists.  ``feasible`` is false (per batch element) where the target
    cannot be met, or where the iteration did not settle.
    """
    kind = ReceiverKind.parse(config.receiver if kind is None else kind)
    mask = np.asarray(mask, dtype=bool)
    h = channel.gains
    gstar, noise = config.gamma_star, config.noise_power
    batch_shape = h.shape[:-2]

    if config.unbounded_power and kind is ReceiverKind.MATCHED_FILTER:
        n = mask.sum(axis=-2)
        denom = 1.0 - (n - 1) * gstar / config.processing_gain
        ok = np.all((denom > 0) | (n == 0), axis=-1)
        theta = 1.0 / np.where(denom > 0, denom, 1.0)
        p = np.where(mask, gstar * noise * theta[..., None, :] / h, 0.0)
        return np.where(ok[..., None, None], p, np.where(mask, np.inf, 0.0)), ok

    if config.unbounded_power and kind is ReceiverKind.DECORRELATOR:
        diag = channel.decorrelator_diag[..., :, None]
        p = np.where(mask, gstar * noise * diag / h, 0.0)
        return p, np.ones(batch_shape, dtype=bool)

    p = np.zeros(h.shape)
    settled = np.zeros(batch_shape, dtype=bool)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        for _ in range(max_iter):
            gains = np.stack([effective_gains(kind, p, channel, k, config)
                              for k in range(h.shape[-2])], axis=-2)
            new = np.where(mask, np.minimum(gstar / gains, config.max_power), 0.0)
            done = np.all(np.abs(new - p) <= rtol * new, axis=(-2, -1))
            p = np.where(settled[..., None, None], p, new)
            settled = settled | done
            if np.all(settled | ~np.isfinite(p).all(axis=(-2, -1))):
                break
    feasible = settled & np.isfinite(p).all(axis=(-2, -1))
    return p, feasible


def independent_max_benchmark(channel, config, kind=None):
    """Every user hits the target SINR on every carrier separately.

    This is the outcome when each user maximises its utility on each
    carrier independently.  Returns ``(profile, total_utility)`` where the
    total is the sum of the joint (all-carrier) utilities of that profile.

    Raises
    ------
    InfeasibleError
        If the per-carrier balancing has no solution without a power limit.
    """
    kind = ReceiverKind.parse(config.receiver if kind is None else kind)
    mask = np.ones(channel.gains.shape, dtype=bool)
    profile, feasible = sinr_balanced_powers(mask, channel, config, kind)
    if not np.all(feasible):
        raise InfeasibleError(
            f"infeasible: {channel.num_users} users cannot all reach the target SINR "
            f"on every carrier with N={config.processing_gain}")
    return profile, total_utility(profile, channel, kind, config)


def independent_max_benchmark_batch(channel, config, kind=None):
    """Batch form of :func:`independent_max_benchmark`.

    Returns ``(profiles, totals, feasible)``; infeasible trials get a total
    of NaN instead of raising.
    """
    kind = ReceiverKind.parse(config.receiver if kind is None else kind)
    mask = np.ones(channel.gains.shape, dtype=bool)
    profile, feasible = sinr_balanced_powers(mask, channel, config, kind)
    safe = np.where(feasible[..., None, None], profile, 0.0)
    totals = np.where(feasible, total_utility(safe, channel, kind, config), np.nan)
    return profile, totals, feasible
