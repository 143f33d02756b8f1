"""System configuration, efficiency function and random channel generation.

All array-valued objects here accept optional leading batch dimensions so
that many independent channel realizations can be processed together; a
single realization simply has no batch dimensions.
"""

import math
from dataclasses import dataclass, field, fields, replace
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from .errors import DecorrelatorInfeasible, NoPositiveRoot
from .receivers import ReceiverKind

IID_EXPONENTIAL = "iid-exponential"
PATH_LOSS = "path-loss"
CHANNEL_MODES = (IID_EXPONENTIAL, PATH_LOSS)

# reciprocal condition number below which S^T S is treated as singular
DECORRELATOR_RCOND = 1e-12


# ---------------------------------------------------------------------------
# Efficiency function
# ---------------------------------------------------------------------------
def solve_gamma_star(exponent, lo=1e-6, hi=500.0, tol=1e-9):
    """Return the unique positive root of ``f(g) = g f'(g)``.

    For ``f(g) = (1 - exp(-g))**M`` the condition reduces to
    ``exp(g) - 1 = M g``, which is solved by bisection on ``[lo, hi]``.

    Parameters
    ----------
    exponent : int
        The efficiency exponent ``M`` (total bits per packet). Must be >= 2.
    lo, hi : float
        Initial bracket.
    tol : float
        Absolute tolerance on the root.

    Raises
    ------
    NoPositiveRoot
        If ``M < 2``; ``f`` is then concave and ``f/g`` has no interior
        maximiser.
    """
    if exponent < 2:
        raise NoPositiveRoot(
            f"no positive root of f(g) = g f'(g) for exponent M={exponent} (need M >= 2)")

    def residual(g):
        return math.expm1(g) - exponent * g

    r_lo = residual(lo)
    if r_lo >= 0 or residual(hi) <= 0:
        raise NoPositiveRoot(f"bracket [{lo}, {hi}] does not enclose the root for M={exponent}")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        r_mid = residual(mid)
        if r_mid == 0.0:
            return mid
        if (r_mid < 0) == (r_lo < 0):
            lo, r_lo = mid, r_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class EfficiencyModel:
    """Packet success rate ``f(g) = (1 - exp(-g))**M``.

    ``gamma_star`` is the SINR that maximises ``f(g)/g``, i.e. the root of
    ``f(g) = g f'(g)``; it is computed once on first access.
    """

    exponent: int

    def __post_init__(self):
        if self.exponent < 1:
            raise ValueError(f"efficiency exponent must be >= 1, got {self.exponent}")

    @cached_property
    def gamma_star(self):
        return solve_gamma_star(self.exponent)

    @property
    def gamma_star_db(self):
        return 10.0 * math.log10(self.gamma_star)

    def __call__(self, gamma, derivative=False):
        return efficiency_eval(self, gamma, derivative)


def efficiency_eval(model, gamma, derivative=False):
    """Evaluate ``f(gamma)`` or ``f'(gamma)`` (scalar or array, gamma >= 0)."""
    g = np.asarray(gamma, dtype=float)
    success = -np.expm1(-g)  # 1 - exp(-g) without cancellation
    m = model.exponent
    if derivative:
        out = m * np.exp(-g) * success ** (m - 1)
    else:
        out = success ** m
    return out.item() if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class SystemConfig:
    """All parameters of the multi-carrier power control game.

    Defaults reproduce the two-user, two-carrier setting used for the
    desk-scale experiments: ``L = M = 100``, ``R = 100 kb/s``,
    ``sigma^2 = 5e-16 W`` and no transmit power limit.

    ``max_power = math.inf`` means unbounded.  ``power_tolerance`` is the
    relative power change below which a BMP round counts as settled.
    """

    num_users: int = 2
    num_carriers: int = 2
    processing_gain: int = 16
    noise_power: float = 5e-16
    max_power: float = math.inf
    packet_info_bits: int = 100
    packet_total_bits: int = 100
    rate: float = 1e5
    channel_mode: str = IID_EXPONENTIAL
    path_loss_constant: float = 0.1
    path_loss_exponent: float = 4.0
    distances: Optional[tuple] = None
    receiver: ReceiverKind = ReceiverKind.MATCHED_FILTER
    bmp_max_iter: int = 20
    power_tolerance: float = 1e-3

    def __post_init__(self):
        # normalise loosely-typed inputs coming from JSON / CLI
        object.__setattr__(self, "receiver", ReceiverKind.parse(self.receiver))
        if self.max_power is None:
            object.__setattr__(self, "max_power", math.inf)
        if self.distances is not None:
            object.__setattr__(self, "distances", tuple(float(d) for d in self.distances))

        for name in ("num_users", "num_carriers", "processing_gain",
                     "packet_info_bits", "packet_total_bits", "bmp_max_iter"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        for name in ("noise_power", "max_power", "rate", "power_tolerance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if self.packet_info_bits > self.packet_total_bits:
            raise ValueError("packet_info_bits must not exceed packet_total_bits")
        if self.channel_mode not in CHANNEL_MODES:
            raise ValueError(f"channel_mode must be one of {CHANNEL_MODES}, got {self.channel_mode!r}")
        if self.channel_mode == PATH_LOSS:
            if self.distances is None or len(self.distances) != self.num_users:
                raise ValueError("path-loss mode needs exactly num_users distances")
            if min(self.distances) <= 0:
                raise ValueError("distances must be > 0")
            if not (self.path_loss_constant > 0 and self.path_loss_exponent > 0):
                raise ValueError("path-loss constant and exponent must be > 0")

    @cached_property
    def efficiency(self):
        return EfficiencyModel(self.packet_total_bits)

    @property
    def gamma_star(self):
        return self.efficiency.gamma_star

    @property
    def throughput_scale(self):
        """``(L/M) R``: bits/s delivered per unit of packet success rate."""
        return self.packet_info_bits / self.packet_total_bits * self.rate

    @property
    def unbounded_power(self):
        return math.isinf(self.max_power)

    def replace(self, **changes):
        return replace(self, **changes)

    def to_dict(self):
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, ReceiverKind):
                value = value.value
            elif isinstance(value, tuple):
                value = list(value)
            elif isinstance(value, float) and math.isinf(value):
                value = None
            out[f.name] = value
        return out

    @classmethod
    def from_dict(cls, data):
        """Build a config from a mapping; unknown keys raise ``KeyError`` naming the key."""
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise KeyError(key)
        return cls(**data)


# ---------------------------------------------------------------------------
# Channels
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class ChannelRealization:
    """Per-user per-carrier power gains and unit-norm spreading signatures.

    ``gains`` has shape ``(..., K, D)`` and ``signatures`` ``(..., K, N)``.
    One signature per user is shared by all of its carriers.
    """

    gains: np.ndarray
    signatures: np.ndarray
    _validated: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        convert = np.array if self._validated else np.asarray
        gains = convert(self.gains, dtype=float)
        sigs = convert(self.signatures, dtype=float)
        if gains.ndim < 2 or sigs.ndim != gains.ndim or sigs.shape[:-1] != gains.shape[:-1]:
            raise ValueError(f"incompatible shapes gains{gains.shape} signatures{sigs.shape}")
        if self._validated:
            if not np.all(gains > 0):
                raise ValueError("channel gains must be strictly positive")
            norms = np.linalg.norm(sigs, axis=-1)
            if not np.allclose(norms, 1.0, rtol=0, atol=1e-12):
                raise ValueError("signatures must have unit Euclidean norm")
        gains.flags.writeable = False
        sigs.flags.writeable = False
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "signatures", sigs)

    @property
    def batch_shape(self):
        return self.gains.shape[:-2]

    @property
    def num_users(self):
        return self.gains.shape[-2]

    @property
    def num_carriers(self):
        return self.gains.shape[-1]

    @property
    def processing_gain(self):
        return self.signatures.shape[-1]

    @cached_property
    def gram(self):
        """Signature cross-correlations ``S^T S`` with shape ``(..., K, K)``."""
        s = self.signatures
        g = s @ np.swapaxes(s, -1, -2)
        g.flags.writeable = False
        return g

    def is_full_rank(self, rcond=DECORRELATOR_RCOND):
        """Boolean (per batch element) telling whether ``S^T S`` is invertible."""
        eig = np.linalg.eigvalsh(self.gram)
        return eig[..., 0] > rcond * eig[..., -1]

    @cached_property
    def decorrelator_diag(self):
        """Diagonal of ``(S^T S)^{-1}``, shape ``(..., K)``.

        Raises ``DecorrelatorInfeasible`` if any batch element is singular.
        """
        full = self.is_full_rank()
        if not np.all(full):
            raise DecorrelatorInfeasible(
                "decorrelator infeasible: signature correlation matrix is singular "
                f"(K={self.num_users}, N={self.processing_gain})")
        diag = np.diagonal(np.linalg.inv(self.gram), axis1=-2, axis2=-1).copy()
        diag.flags.writeable = False
        return diag

    def trial(self, index):
        """Extract one element of a batched realization."""
        return ChannelRealization(self.gains[index], self.signatures[index], _validated=False)

    @classmethod
    def stack(cls, realizations):
        realizations = list(realizations)
        return cls(np.stack([r.gains for r in realizations]),
                   np.stack([r.signatures for r in realizations]),
                   _validated=False)

    @classmethod
    def from_gains(cls, gains, processing_gain=None, signatures=None, rng=None):
        """Wrap explicit gains; signatures default to random binary sequences.

        Useful when gains are dictated by a test or a config file.  With
        neither ``signatures`` nor ``rng`` given, a fixed-seed generator is
        used so the result is reproducible.
        """
        gains = np.asarray(gains, dtype=float)
        if signatures is None:
            if processing_gain is None:
                raise ValueError("processing_gain is required when signatures are not given")
            rng = np.random.default_rng(0) if rng is None else rng
            signatures = random_signatures(rng, gains.shape[:-1], processing_gain)
        return cls(gains, signatures)


def random_signatures(rng, shape, processing_gain):
    """Random binary sequences with entries +-1/sqrt(N); ``shape`` is ``(..., K)``."""
    chips = rng.integers(0, 2, size=tuple(shape) + (processing_gain,), dtype=np.int8)
    return (2.0 * chips - 1.0) / math.sqrt(processing_gain)


def large_scale_gains(config):
    """Per-user path-loss factor ``c / d_k**nu`` (ones in iid-exponential mode)."""
    if config.channel_mode == PATH_LOSS:
        d = np.asarray(config.distances, dtype=float)
        return config.path_loss_constant / d ** config.path_loss_exponent
    return np.ones(config.num_users)


def sample_channel(config: SystemConfig, rng: np.random.Generator, full_rank=False,
                   max_redraws=1000) -> ChannelRealization:
    """Draw one channel realization.

    Small-scale power gains are i.i.d. unit-mean exponential (Rayleigh
    amplitudes), scaled by the path loss in path-loss mode.  Gains are drawn
    before signatures so that the gains for a given generator state do not
    depend on the processing gain.

    With ``full_rank=True`` the signatures are redrawn (from the same
    generator) until ``S^T S`` is invertible, as required by the
    decorrelator.
    """
    k, d, n = config.num_users, config.num_carriers, config.processing_gain
    fading = rng.exponential(1.0, size=(k, d))
    gains = fading * large_scale_gains(config)[:, None]
    sigs = random_signatures(rng, (k,), n)
    if full_rank:
        if n < k:
            raise DecorrelatorInfeasible(f"decorrelator infeasible: N={n} < K={k}")
        for _ in range(max_redraws):
            eig = np.linalg.eigvalsh(sigs @ sigs.T)
            if eig[0] > DECORRELATOR_RCOND * eig[-1]:
                break
            sigs = random_signatures(rng, (k,), n)
        else:
            raise DecorrelatorInfeasible("could not draw linearly independent signatures")
    return ChannelRealization(gains, sigs, _validated=False)


def sample_channels(config: SystemConfig, rngs: Sequence[np.random.Generator], full_rank=False):
    """Draw one realization per generator and stack them into a batch."""
    return ChannelRealization.stack(sample_channel(config, r, full_rank) for r in rngs)
