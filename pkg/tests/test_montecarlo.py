import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcgame.equilibrium import binomial_limit_pmf
from mcgame.model import SystemConfig
from mcgame.montecarlo import (
    ExperimentKind,
    ExperimentSpec,
    PmfEstimate,
    chunk_bounds,
    pmf_std,
    run_trials,
    summarize,
    trial_rng,
)


def small_spec(**overrides):
    args = dict(kind="prob-vs-n", sweep=(8, 16), base=SystemConfig(), trials=600, seed=3)
    args.update(overrides)
    return ExperimentSpec(**args)


def assert_reports_equal(a, b):
    assert len(a.points) == len(b.points)
    for p, q in zip(a.points, b.points):
        assert p.pmf == q.pmf
        assert p.utility_mean == q.utility_mean
        assert p.mean_iterations == q.mean_iterations


@given(counts=st.lists(st.integers(0, 1000), min_size=1, max_size=12), no_eq=st.integers(0, 1000))
@settings(max_examples=100, deadline=None)
def test_pmf_estimate_conserves_counts(counts, no_eq):
    trials = sum(counts) + no_eq
    if trials == 0:
        return
    est = PmfEstimate(tuple(counts), no_eq, trials)
    assert est.frequencies.sum() + est.no_eq_frequency == pytest.approx(1.0, abs=1e-12)
    assert est.converged == sum(counts)
    with pytest.raises(ValueError):
        PmfEstimate(tuple(counts), no_eq + 1, trials)


@given(seed=st.integers(0, 2 ** 32), k=st.integers(1, 8), t=st.integers(1, 200))
@settings(max_examples=60, deadline=None)
def test_pmf_from_outcomes_conserves_counts(seed, k, t):
    rng = np.random.default_rng(seed)
    x1 = rng.integers(0, k + 1, size=t)
    converged = rng.random(t) < 0.7
    est = PmfEstimate.from_outcomes(x1, converged, k)
    assert len(est.counts) == k + 1
    assert sum(est.counts) + est.no_equilibrium == t


def test_half_widths():
    est = PmfEstimate((250, 500, 250), 0, 1000)
    np.testing.assert_allclose(est.half_widths, 1.96 * np.sqrt([0.1875, 0.25, 0.1875]) / math.sqrt(1000))
    assert est.no_eq_half_width == 0.0


def test_pmf_std_examples():
    assert pmf_std([0, 0, 1, 0]) == 0.0
    binomial = [binomial_limit_pmf(10, m) for m in range(11)]
    assert pmf_std(binomial) == pytest.approx(math.sqrt(10) / 2, rel=1e-12)
    assert pmf_std([0, 0, 0]) is None


def test_trial_rng_streams_are_distinct_and_reproducible():
    a = trial_rng(5, 0, 0).random(4)
    assert np.array_equal(a, trial_rng(5, 0, 0).random(4))
    assert not np.array_equal(a, trial_rng(5, 0, 1).random(4))
    assert not np.array_equal(a, trial_rng(5, 1, 0).random(4))
    assert not np.array_equal(a, trial_rng(6, 0, 0).random(4))


def test_spec_validation():
    with pytest.raises(ValueError):
        small_spec(sweep=())
    with pytest.raises(ValueError):
        small_spec(trials=0)
    with pytest.raises(ValueError):
        small_spec(sweep=(0,))
    with pytest.raises(ValueError):
        small_spec(seed=-1)


def test_config_for_each_kind():
    base = SystemConfig(num_users=30, processing_gain=256)
    assert small_spec(sweep=(32,)).config_for(0).processing_gain == 32
    util = ExperimentSpec("utility-vs-d", (1, 2, 4, 8), base=base)
    assert [(util.config_for(i).num_carriers, util.config_for(i).processing_gain)
            for i in range(4)] == [(1, 256), (2, 128), (4, 64), (8, 32)]
    scaled = ExperimentSpec("utility-vs-d", (3,), base=base, users_per_carrier=5)
    cfg = scaled.config_for(0)
    assert (cfg.num_users, cfg.num_carriers, cfg.processing_gain, cfg.bmp_max_iter) == (15, 3, 256, 30)
    compare = ExperimentSpec("compare", (4,), base=base)
    assert compare.config_for(0).num_users == 4
    de = small_spec(receiver="de")
    assert de.config_for(0).receiver.value == "de"


def test_chunking_does_not_change_results():
    spec = small_spec()
    assert_reports_equal(run_trials(spec, chunk_size=600), run_trials(spec, chunk_size=37))


def test_thread_count_does_not_change_results():
    spec = small_spec(trials=300)
    assert_reports_equal(run_trials(spec, threads=1, chunk_size=50),
                         run_trials(spec, threads=3, chunk_size=50))


def test_environment_sets_default_threads(monkeypatch):
    from mcgame import montecarlo
    monkeypatch.setenv(montecarlo.THREADS_ENV, "4")
    assert montecarlo.default_threads() == 4
    monkeypatch.setenv(montecarlo.THREADS_ENV, "junk")
    assert montecarlo.default_threads() == 1


def test_chunk_bounds_cover_trials():
    bounds = chunk_bounds(1001, SystemConfig(), chunk_size=100)
    assert bounds[0] == (0, 100) and bounds[-1] == (1000, 1001)
    assert sum(b - a for a, b in bounds) == 1001


def test_seed_changes_results():
    a = run_trials(small_spec(seed=1))
    b = run_trials(small_spec(seed=2))
    assert a.points[0].pmf != b.points[0].pmf


def test_no_equilibrium_near_analytic_value():
    spec = ExperimentSpec("prob-vs-n", (16,), base=SystemConfig(), trials=20000, seed=11)
    point = run_trials(spec).points[0]
    assert abs(point.pmf.no_eq_frequency - 0.0660) <= 0.01


def test_summary_std_grows_with_processing_gain():
    base = SystemConfig(num_users=10, num_carriers=2)
    spec = ExperimentSpec("stddev", (32, 64, 128), base=base, trials=1500, seed=0)
    rows = summarize(run_trials(spec))
    stds = [r.std_x1 for r in rows]
    assert stds[0] == pytest.approx(0.0, abs=0.05)
    assert stds[0] < stds[1] < stds[2]
    assert stds[2] < math.sqrt(10) / 2


def test_summary_undefined_when_nothing_settles():
    base = SystemConfig(num_users=10, num_carriers=2)
    rows = summarize(run_trials(ExperimentSpec("stddev", (16,), base=base, trials=50)))
    assert rows[0].converged_fraction == 0.0
    assert rows[0].std_x1 is None and rows[0].mean_x1 is None


def test_compare_report_has_benchmark():
    base = SystemConfig(num_carriers=2, processing_gain=128)
    report = run_trials(ExperimentSpec("compare", (2, 4), base=base, trials=200))
    for point, row in zip(report.points, summarize(report)):
        assert point.benchmark_infeasible == 0
        assert row.utility_ratio == pytest.approx(point.utility_mean / point.benchmark_mean)
    assert report.spec.kind is ExperimentKind.JOINT_VS_INDEPENDENT
