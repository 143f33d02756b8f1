"""Energy-efficient power control game for multi-carrier CDMA."""

__version__ = "0.1.0"

from .errors import (
    DecorrelatorInfeasible,
    EnumerationCapExceeded,
    InfeasibleError,
    InfeasibleOccupancy,
    NoPositiveRoot,
)
from .model import (
    ChannelRealization,
    EfficiencyModel,
    SystemConfig,
    efficiency_eval,
    sample_channel,
    sample_channels,
    solve_gamma_star,
)
from .receivers import ReceiverKind, compute_sinr, effective_gain, required_power, sinr_matrix
from .game import (
    BmpOutcome,
    BmpStatus,
    CarrierAssignment,
    assignment_profile,
    best_response,
    bmp_run,
    bmp_run_batch,
    independent_max_benchmark,
    multicarrier_utility,
    total_utility,
)
from .equilibrium import (
    ThetaTable,
    analytic_pmf_2x2,
    binomial_limit_pmf,
    check_equilibrium,
    classify_2x2,
    enumerate_equilibria,
    equilibrium_powers,
    theta,
)
from .montecarlo import ExperimentKind, ExperimentSpec, PmfEstimate, run_trials, summarize

__all__ = [name for name in dir() if not name.startswith("_")]
