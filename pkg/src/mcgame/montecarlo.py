"""Seeded Monte Carlo experiments over random channel realizations.

Every trial draws its own generator from ``(master seed, sweep index,
trial index)``, so results do not depend on chunking or on how many worker
processes run the chunks.
"""

import enum
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .game import bmp_run_batch, independent_max_benchmark_batch, total_utility
from .model import SystemConfig, sample_channels
from .receivers import ReceiverKind

THREADS_ENV = "MCGAME_THREADS"
Z95 = 1.96

# signature entries held in memory per chunk
_CHUNK_ELEMENTS = 1 << 22


class ExperimentKind(str, enum.Enum):
    PROB_VS_N = "prob-vs-n"
    PMF_X1 = "pmf"
    STDDEV_X1 = "stddev"
    UTILITY_VS_D = "utility-vs-d"
    JOINT_VS_INDEPENDENT = "compare"


@dataclass(frozen=True)
class ExperimentSpec:
    """What to sweep and how many trials per sweep point.

    The sweep values are processing gains for the probability, PMF and
    standard-deviation experiments, carrier counts for ``UTILITY_VS_D`` and
    user counts for ``JOINT_VS_INDEPENDENT``.

    ``UTILITY_VS_D`` keeps the bandwidth fixed: ``N = base.processing_gain // D``.
    With ``users_per_carrier`` set it instead scales ``K = users_per_carrier * D``
    at fixed ``N`` and allows ``10 * D`` BMP rounds.
    """

    kind: ExperimentKind
    sweep: Tuple[int, ...]
    base: SystemConfig = field(default_factory=SystemConfig)
    trials: int = 20000
    seed: int = 0
    receiver: Optional[ReceiverKind] = None
    users_per_carrier: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ExperimentKind(self.kind))
        object.__setattr__(self, "sweep", tuple(int(v) for v in self.sweep))
        if self.receiver is not None:
            object.__setattr__(self, "receiver", ReceiverKind.parse(self.receiver))
        if not self.sweep:
            raise ValueError("sweep must not be empty")
        if any(v < 1 for v in self.sweep):
            raise ValueError("sweep values must be positive integers")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def config_for(self, index):
        """System configuration of sweep point ``index``."""
        value = self.sweep[index]
        base = self.base
        if self.receiver is not None:
            base = base.replace(receiver=self.receiver)
        if self.kind is ExperimentKind.UTILITY_VS_D:
            if self.users_per_carrier is not None:
                return base.replace(num_carriers=value, num_users=self.users_per_carrier * value,
                                    bmp_max_iter=10 * value)
            if base.processing_gain // value < 1:
                raise ValueError(f"processing gain {base.processing_gain} too small for D={value}")
            return base.replace(num_carriers=value, processing_gain=base.processing_gain // value)
        if self.kind is ExperimentKind.JOINT_VS_INDEPENDENT:
            return base.replace(num_users=value)
        return base.replace(processing_gain=value)


def trial_rng(master_seed, sweep_index, trial_index):
    """Independent generator for one trial."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(sweep_index, trial_index))
    return np.random.default_rng(seq)


# ---------------------------------------------------------------------------
# Estimates
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PmfEstimate:
    """Empirical pseudo-PMF of the number of users on the first carrier.

    ``counts[m]`` counts trials that settled with ``m`` users on carrier 1;
    trials that did not settle are counted in ``no_equilibrium``.
    """

    counts: Tuple[int, ...]
    no_equilibrium: int
    trials: int

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if sum(self.counts) + self.no_equilibrium != self.trials:
            raise ValueError("counts and no-equilibrium count must add up to trials")

    @property
    def converged(self):
        return self.trials - self.no_equilibrium

    @property
    def frequencies(self):
        return np.asarray(self.counts, dtype=float) / self.trials

    @property
    def no_eq_frequency(self):
        return self.no_equilibrium / self.trials

    @property
    def half_widths(self):
        """95% normal-approximation half-widths of ``frequencies``."""
        return half_width(self.frequencies, self.trials)

    @property
    def no_eq_half_width(self):
        return float(half_width(self.no_eq_frequency, self.trials))

    @classmethod
    def from_outcomes(cls, x1, converged, num_users):
        x1 = np.asarray(x1)
        converged = np.asarray(converged, dtype=bool)
        counts = np.bincount(x1[converged], minlength=num_users + 1)
        return cls(tuple(counts), int(np.sum(~converged)), len(converged))


def half_width(freq, trials):
    freq = np.asarray(freq, dtype=float)
    return Z95 * np.sqrt(freq * (1.0 - freq) / trials)


def pmf_std(probabilities):
    """Standard deviation of ``m`` under (possibly unnormalised) weights over ``m = 0..K``.

    Returns ``None`` when all weights are zero.
    """
    w = np.asarray(probabilities, dtype=float)
    total = w.sum()
    if total <= 0:
        return None
    w = w / total
    m = np.arange(len(w))
    mean = np.sum(w * m)
    return float(math.sqrt(max(np.sum(w * (m - mean) ** 2), 0.0)))


@dataclass(frozen=True)
class SweepPoint:
    value: int
    config: SystemConfig
    pmf: PmfEstimate
    utility_mean: float
    utility_se: float
    mean_iterations: float
    benchmark_mean: Optional[float] = None
    benchmark_se: Optional[float] = None
    benchmark_infeasible: int = 0


@dataclass(frozen=True)
class ExperimentReport:
    spec: ExperimentSpec
    points: List[SweepPoint]


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------
def default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def chunk_bounds(trials, config, chunk_size=None):
    if chunk_size is None:
        per_trial = config.num_users * max(config.processing_gain, config.num_carriers)
        chunk_size = int(min(5000, max(256, _CHUNK_ELEMENTS // per_trial)))
    return [(start, min(start + chunk_size, trials)) for start in range(0, trials, chunk_size)]


def run_chunk(spec, index, start, stop):
    """Run trials ``start..stop-1`` of sweep point ``index``; returns per-trial arrays."""
    config = spec.config_for(index)
    kind = config.receiver
    rngs = [trial_rng(spec.seed, index, t) for t in range(start, stop)]
    channel = sample_channels(config, rngs, full_rank=kind is ReceiverKind.DECORRELATOR)
    outcome = bmp_run_batch(channel, config)
    result = {
        "converged": outcome.converged,
        "x1": outcome.occupancy(0),
        "iterations": outcome.iterations_used,
        "utility": total_utility(outcome.final_profile, channel, kind, config),
    }
    if spec.kind is ExperimentKind.JOINT_VS_INDEPENDENT:
        _, totals, _ = independent_max_benchmark_batch(channel, config, kind)
        result["benchmark"] = totals
    return result


def _mean_se(values):
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return math.nan, math.nan
    se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else math.nan
    return float(values.mean()), se


def run_trials(spec: ExperimentSpec, threads=None, chunk_size=None) -> ExperimentReport:
    """Run every sweep point of ``spec`` and aggregate the trials.

    A trial counts as "no equilibrium" when BMP has not settled within its
    round limit.  Utilities are evaluated on the end-of-run profile whether
    or not BMP settled.  ``threads > 1`` farms chunks out to worker
    processes; the report is identical either way.
    """
    threads = default_threads() if threads is None else max(1, int(threads))
    tasks = []
    for index in range(len(spec.sweep)):
        config = spec.config_for(index)
        for start, stop in chunk_bounds(spec.trials, config, chunk_size):
            tasks.append((index, start, stop))

    if threads == 1:
        results = [run_chunk(spec, *task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_chunk, spec, *task) for task in tasks]
            results = [f.result() for f in futures]

    points = []
    for index, value in enumerate(spec.sweep):
        config = spec.config_for(index)
        mine = [r for (i, _, _), r in zip(tasks, results) if i == index]
        merged = {key: np.concatenate([r[key] for r in mine]) for key in mine[0]}
        pmf = PmfEstimate.from_outcomes(merged["x1"], merged["converged"], config.num_users)
        u_mean, u_se = _mean_se(merged["utility"])
        extra = {}
        if "benchmark" in merged:
            bench = merged["benchmark"]
            ok = np.isfinite(bench)
            b_mean, b_se = _mean_se(bench[ok])
            extra = dict(benchmark_mean=b_mean, benchmark_se=b_se,
                         benchmark_infeasible=int(np.sum(~ok)))
        points.append(SweepPoint(value=value, config=config, pmf=pmf, utility_mean=u_mean,
                                 utility_se=u_se,
                                 mean_iterations=float(np.mean(merged["iterations"])),
                                 **extra))
    return ExperimentReport(spec, points)


# ---------------------------------------------------------------------------
# Derived statistics
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class SummaryRow:
    """Per-sweep-point statistics; ``None`` marks an undefined value."""

    value: int
    converged_fraction: float
    mean_x1: Optional[float]
    std_x1: Optional[float]
    utility_ratio: Optional[float]


def summarize(report: ExperimentReport):
    """Standard deviation of X1 over settled trials and joint/benchmark utility ratios."""
    rows = []
    for point in report.points:
        pmf = point.pmf
        if pmf.converged:
            w = np.asarray(pmf.counts, dtype=float) / pmf.converged
            mean_x1 = float(np.sum(w * np.arange(len(w))))
            std_x1 = pmf_std(w)
        else:
            mean_x1 = std_x1 = None
        ratio = None
        if point.benchmark_mean is not None and math.isfinite(point.benchmark_mean) \
                and point.benchmark_mean > 0:
            ratio = point.utility_mean / point.benchmark_mean
        rows.append(SummaryRow(point.value, pmf.converged / pmf.trials, mean_x1, std_x1, ratio))
    return rows
