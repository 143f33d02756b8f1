"""Exception types shared across the package."""


class InfeasibleError(ValueError):
    """The requested operating point cannot be realised by the model."""


class DecorrelatorInfeasible(InfeasibleError):
    """The signature cross-correlation matrix is (numerically) singular."""


class InfeasibleOccupancy(InfeasibleError):
    """More users share a carrier than can simultaneously reach the target SINR."""


class NoPositiveRoot(ValueError):
    """The efficiency function has no positive solution of f(g) = g f'(g)."""


class EnumerationCapExceeded(ValueError):
    """The number of candidate carrier assignments exceeds the enumeration cap."""
