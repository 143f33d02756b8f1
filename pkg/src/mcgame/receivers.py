"""Output SINR of linear uplink receivers, per user and carrier.

Powers are ``(..., K, D)`` arrays of transmit powers in watts.  Every
receiver here is linear in the sense that user ``k``'s output SINR on
carrier ``l`` is ``effective_gain * p[k, l]``, with the effective gain
depending only on the *other* users' powers.  That is what makes the
required power for a target SINR a simple division.

Matched filter
    ``h p / (sigma^2 + (1/N) sum_{j != k} p_j h_j)`` -- the random-sequence
    (averaged cross-correlation) form.
Decorrelator
    ``h p / (sigma^2 [(S^T S)^{-1}]_kk)``; interference is nulled with a
    receiver bank built from all K signatures.
MMSE
    ``h p s_k^T A^{-1} s_k`` with ``A = sigma^2 I + sum_{j != k} p_j h_j s_j s_j^T``.
    Evaluated in the K-dimensional signature space through the Woodbury
    identity, so only the K x K cross-correlation matrix is needed.
"""

import enum
from typing import NamedTuple

import numpy as np


class ReceiverKind(str, enum.Enum):
    MATCHED_FILTER = "mf"
    DECORRELATOR = "de"
    MMSE = "mmse"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        aliases = {
            "mf": cls.MATCHED_FILTER, "matched_filter": cls.MATCHED_FILTER,
            "matchedfilter": cls.MATCHED_FILTER,
            "de": cls.DECORRELATOR, "decorrelator": cls.DECORRELATOR,
            "mmse": cls.MMSE,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown receiver {value!r}; expected one of mf, de, mmse") from None


class RequiredPower(NamedTuple):
    """Power needed for a target SINR; ``capped`` is set when it exceeds ``P_max``.

    When capped, ``power`` holds ``P_max``.
    """

    power: float
    capped: bool


def _others(num_users, user):
    return np.delete(np.arange(num_users), user)


def effective_gains(kind, powers, channel, user, config):
    """Effective gains of ``user`` on every carrier, shape ``(..., D)``.

    The SINR the user would get with power ``p`` on carrier ``l`` is
    ``gains[..., l] * p`` when the other users' powers are as in ``powers``
    (the user's own row is ignored).
    """
    kind = ReceiverKind.parse(kind)
    p = np.asarray(powers, dtype=float)
    h = channel.gains
    noise = config.noise_power
    own = h[..., user, :]

    if kind is ReceiverKind.MATCHED_FILTER:
        others = _others(h.shape[-2], user)
        interference = (p[..., others, :] * h[..., others, :]).sum(axis=-2)
        return own / (noise + interference / config.processing_gain)

    if kind is ReceiverKind.DECORRELATOR:
        return own / (noise * channel.decorrelator_diag[..., user, None])

    others = _others(h.shape[-2], user)
    gram = channel.gram
    if len(others) == 0:
        return own * (gram[..., user, user][..., None] / noise)
    # received powers of interferers, carriers moved in front: (..., D, K-1)
    weights = np.swapaxes(p[..., others, :] * h[..., others, :], -1, -2)
    root = np.sqrt(weights)
    cross = gram[..., others, user]                      # (..., K-1)
    inner = gram[..., others[:, None], others[None, :]]  # (..., K-1, K-1)
    c = root * cross[..., None, :]                       # (..., D, K-1)
    capacitance = root[..., :, None] * inner[..., None, :, :] * root[..., None, :]
    capacitance = capacitance + noise * np.eye(len(others))
    x = np.linalg.solve(capacitance, c[..., None])[..., 0]
    quad = (gram[..., user, user][..., None] - np.sum(c * x, axis=-1)) / noise
    return own * quad


def effective_gain(kind, powers, channel, user, carrier, config):
    """Effective gain of ``user`` on one ``carrier``."""
    return effective_gains(kind, powers, channel, user, config)[..., carrier]


def compute_sinr(kind, powers, channel, user, carrier, config):
    """Output SINR of ``user`` on ``carrier`` for the given power profile."""
    p = np.asarray(powers, dtype=float)
    return effective_gain(kind, p, channel, user, carrier, config) * p[..., user, carrier]


def sinr_matrix(kind, powers, channel, config):
    """All output SINRs, shape ``(..., K, D)``."""
    p = np.asarray(powers, dtype=float)
    gains = np.stack([effective_gains(kind, p, channel, k, config)
                      for k in range(channel.num_users)], axis=-2)
    return gains * p


def required_power(kind, powers, channel, user, carrier, target, config):
    """Transmit power for ``user`` to reach SINR ``target`` on ``carrier``.

    Other users' powers are held fixed.  Returns a :class:`RequiredPower`;
    the ``capped`` flag is set (and ``P_max`` returned) if the target would
    need more than ``config.max_power``.
    """
    if not target > 0:
        raise ValueError(f"target SINR must be > 0, got {target}")
    p = float(target / effective_gain(kind, powers, channel, user, carrier, config))
    if p > config.max_power:
        return RequiredPower(float(config.max_power), True)
    return RequiredPower(p, False)


def matched_filter_exact_sinr(powers, channel, config):
    """Matched-filter SINR using the realised signature correlations.

    ``h p / (sigma^2 + sum_{j != k} p_j h_j rho_jk^2)``.  The game models in
    this package use the averaged ``1/N`` form instead; this exact variant
    is what the MMSE receiver provably dominates.
    """
    p = np.asarray(powers, dtype=float)
    recv = p * channel.gains
    rho2 = channel.gram ** 2 * (1.0 - np.eye(channel.num_users))
    interference = rho2 @ recv
    return recv / (config.noise_power + interference)
