import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_channel
from mcgame.equilibrium import enumerate_equilibria, equilibrium_powers, theta
from mcgame.errors import InfeasibleError
from mcgame.game import (
    BmpStatus,
    CarrierAssignment,
    assignment_profile,
    best_response,
    best_response_profile,
    bmp_run,
    bmp_run_batch,
    independent_max_benchmark,
    independent_max_benchmark_batch,
    multicarrier_utility,
    per_carrier_utility,
    sinr_balanced_powers,
    total_utility,
    user_utilities,
)
from mcgame.model import ChannelRealization, SystemConfig, sample_channel, sample_channels
from mcgame.receivers import ReceiverKind, compute_sinr, effective_gains, sinr_matrix

NOISE = 5e-16
KINDS = list(ReceiverKind)


def tight(config, rounds=400):
    return config.replace(power_tolerance=1e-11, bmp_max_iter=rounds)


# ---------------------------------------------------------------------------
# Assignments and utilities
# ---------------------------------------------------------------------------
def test_assignment_labels():
    assert CarrierAssignment((0, 0), 2).label() == "(12,-)"
    assert CarrierAssignment((1, 1), 2).label() == "(-,12)"
    assert CarrierAssignment((0, 1), 2).label() == "(1,2)"
    assert CarrierAssignment((1, 0), 2).label() == "(2,1)"
    assert CarrierAssignment((0,) * 10 + (1,), 2).label().startswith("(1.2.3")
    np.testing.assert_array_equal(CarrierAssignment((2, 0, 2), 3).occupancy, [1, 0, 2])


def test_assignment_rejects_bad_carrier():
    with pytest.raises(ValueError):
        CarrierAssignment((0, 2), 2)


def test_assignment_from_profile():
    p = np.array([[0.0, 2.0], [1.0, 0.0]])
    assert CarrierAssignment.from_profile(p).carrier_of == (1, 0)
    with pytest.raises(ValueError):
        CarrierAssignment.from_profile(np.zeros((2, 2)))


def test_silent_user_has_zero_utility():
    cfg = SystemConfig(noise_power=NOISE)
    ch = make_channel([[1e-9, 1e-9], [1e-9, 1e-9]])
    p = np.array([[0.0, 0.0], [1e-6, 0.0]])
    assert multicarrier_utility(0, p, ch, "mf", cfg) == 0.0
    assert multicarrier_utility(1, p, ch, "mf", cfg) > 0


def test_utility_closed_form():
    cfg = SystemConfig(num_users=1, noise_power=NOISE)
    ch = make_channel([[2e-9, 1e-9]])
    p = np.array([[3e-6, 1e-6]])
    g1, g2 = 3e-6 * 2e-9 / NOISE, 1e-6 * 1e-9 / NOISE
    f = cfg.efficiency
    expected = cfg.throughput_scale * (f(g1) + f(g2)) / 4e-6
    assert multicarrier_utility(0, p, ch, "mf", cfg) == pytest.approx(expected, rel=1e-12)
    per_carrier = cfg.throughput_scale * (f(g1) / 3e-6 + f(g2) / 1e-6)
    assert per_carrier_utility(0, p, ch, "mf", cfg) == pytest.approx(per_carrier, rel=1e-12)


# ---------------------------------------------------------------------------
# Best response
# ---------------------------------------------------------------------------
def test_best_response_picks_largest_effective_gain():
    cfg = SystemConfig(noise_power=NOISE)
    ch = make_channel([[2e-9, 1e-9], [1e-9, 1e-9]])
    carrier, power = best_response(0, np.zeros((2, 2)), ch, "mf", cfg)
    assert carrier == 0
    assert power == pytest.approx(cfg.gamma_star * NOISE / 2e-9, rel=1e-12)


def test_best_response_tie_goes_to_first_carrier():
    cfg = SystemConfig(noise_power=NOISE)
    ch = make_channel([[1e-9, 1e-9], [1e-9, 1e-9]])
    assert best_response(0, np.zeros((2, 2)), ch, "mf", cfg)[0] == 0


def test_best_response_capped():
    cfg = SystemConfig(noise_power=NOISE, max_power=1e-9)
    ch = make_channel([[1e-9, 2e-9], [1e-9, 1e-9]])
    assert best_response(0, np.zeros((2, 2)), ch, "mf", cfg) == (1, 1e-9)


def test_best_response_profile_replaces_row():
    cfg = SystemConfig(noise_power=NOISE)
    ch = make_channel([[1e-9, 3e-9], [1e-9, 1e-9]])
    p = np.array([[5e-6, 5e-6], [1e-6, 0.0]])
    out = best_response_profile(0, p, ch, "mf", cfg)
    assert out[0, 0] == 0.0 and out[0, 1] > 0
    assert compute_sinr("mf", out, ch, 0, 1, cfg) == pytest.approx(cfg.gamma_star, rel=1e-12)
    np.testing.assert_array_equal(out[1], p[1])


@given(seed=st.integers(0, 10 ** 6), kind=st.sampled_from(KINDS))
@settings(max_examples=40, deadline=None)
def test_best_response_beats_grid_search(seed, kind):
    cfg = SystemConfig(num_users=3, num_carriers=2, processing_gain=8, noise_power=NOISE)
    rng = np.random.default_rng(seed)
    ch = sample_channel(cfg, rng, full_rank=True)
    p = rng.uniform(0.1, 3.0, (3, 2)) * NOISE / ch.gains
    user = int(rng.integers(3))
    carrier, power = best_response(user, p, ch, kind, cfg)
    chosen = p.copy()
    chosen[user] = 0.0
    chosen[user, carrier] = power
    best = multicarrier_utility(user, chosen, ch, kind, cfg)

    # oracle: every split of power over both carriers on a log grid
    g = effective_gains(kind, p, ch, user, cfg)
    scale = cfg.gamma_star / g.max()
    levels = np.concatenate([[0.0], scale * np.logspace(-2, 2, 161)])
    trial = np.repeat(p[None], levels.size ** 2, axis=0)
    grid = np.array(list(itertools.product(levels, levels)))
    trial[:, user, :] = grid
    keep = grid.sum(axis=1) > 0
    u = user_utilities(trial[keep], ch, kind, cfg)[:, user]
    assert best >= u.max() * (1 - 1e-9)


# ---------------------------------------------------------------------------
# BMP
# ---------------------------------------------------------------------------
def test_bmp_both_on_first_carrier_from_any_start(config2x2):
    cfg = tight(config2x2.replace(noise_power=NOISE))
    gstar, n_pg = cfg.gamma_star, cfg.processing_gain
    theta2 = theta(2, gstar, n_pg)
    gains = np.array([[3.0 * theta2, 1.0], [2.0 * theta2, 1.0]]) * 1e-9
    ch = make_channel(gains)
    for carriers in itertools.product(range(2), repeat=2):
        start = assignment_profile(CarrierAssignment(carriers, 2), ch, cfg)
        for order in ([0, 1], [1, 0]):
            out = bmp_run(ch, cfg, initial=start, order=order)
            assert out.status is BmpStatus.CONVERGED
            assert out.assignment.carrier_of == (0, 0)
            received = out.final_profile[:, 0] * gains[:, 0]
            np.testing.assert_allclose(received, gstar * NOISE * theta2, rtol=1e-8)


def test_bmp_double_equilibrium_depends_on_start(config2x2):
    cfg = config2x2.replace(noise_power=NOISE)
    ch = make_channel(np.ones((2, 2)) * 1e-9)
    assert [a.label() for a in enumerate_equilibria(ch, cfg)] == ["(1,2)", "(2,1)"]
    reached = set()
    for carriers in ((0, 1), (1, 0)):
        start = assignment_profile(CarrierAssignment(carriers, 2), ch, cfg)
        out = bmp_run(ch, cfg, initial=start)
        assert out.converged
        reached.add(out.assignment.carrier_of)
    assert reached == {(0, 1), (1, 0)}


def symmetric_cross_gain_channel(cfg, x):
    """Gains with h12 = h21 = sqrt(h11 h22) and h11/h22 = x."""
    h11, h22 = x, 1.0
    cross = math.sqrt(h11 * h22)
    return make_channel(np.array([[h11, cross], [cross, h22]]) * 1e-9)


def test_bmp_does_not_settle_with_symmetric_cross_gains(config2x2):
    cfg = config2x2.replace(noise_power=NOISE)
    t0, t2 = theta(0, cfg.gamma_star, 16), theta(2, cfg.gamma_star, 16)
    lo, hi = 1 / t2 ** 2, t0 ** 2
    assert lo < hi
    for x in np.linspace(lo, hi, 7)[1:-1]:
        for ratio in (x, 1 / x):
            ch = symmetric_cross_gain_channel(cfg, ratio)
            assert enumerate_equilibria(ch, cfg) == []
            for carriers in itertools.product(range(2), repeat=2):
                start = assignment_profile(CarrierAssignment(carriers, 2), ch, cfg)
                out = bmp_run(ch, cfg.replace(bmp_max_iter=200), initial=start)
                assert out.status is BmpStatus.NO_CONVERGENCE


def test_bmp_validates_inputs(config2x2):
    ch = make_channel(np.ones((2, 2)))
    with pytest.raises(ValueError):
        bmp_run(ch, config2x2, order=[0, 0])
    with pytest.raises(ValueError):
        bmp_run(ch, config2x2.replace(max_power=1.0), initial=np.full((2, 2), 2.0))


@pytest.mark.parametrize("kind", KINDS)
def test_bmp_converged_profile_is_fixed_point(kind):
    cfg = SystemConfig(num_users=3, num_carriers=2, processing_gain=32, noise_power=NOISE,
                       receiver=kind, power_tolerance=1e-12, bmp_max_iter=500)
    hits = 0
    for seed in range(40):
        ch = sample_channel(cfg, np.random.default_rng(seed), full_rank=True)
        out = bmp_run(ch, cfg)
        if not out.converged:
            continue
        hits += 1
        p = out.final_profile
        for k in range(3):
            carrier, power = best_response(k, p, ch, kind, cfg)
            assert carrier == out.assignment.carrier_of[k]
            assert power == pytest.approx(p[k, carrier], rel=1e-9)
        gamma = sinr_matrix(kind, p, ch, cfg)[np.arange(3), list(out.assignment.carrier_of)]
        np.testing.assert_allclose(gamma, cfg.gamma_star, rtol=1e-9)
    assert hits >= 30


@pytest.mark.parametrize("kind", KINDS)
def test_bmp_batch_matches_single_runs(kind):
    cfg = SystemConfig(num_users=3, num_carriers=3, processing_gain=12, noise_power=NOISE,
                       receiver=kind)
    rngs = [np.random.default_rng(s) for s in range(30)]
    singles = [sample_channel(cfg, r, full_rank=True) for r in rngs]
    batch = bmp_run_batch(ChannelRealization.stack(singles), cfg)
    for t, ch in enumerate(singles):
        out = bmp_run(ch, cfg)
        assert out.converged == batch.converged[t]
        assert out.iterations_used == batch.iterations_used[t]
        np.testing.assert_array_equal(out.final_profile, batch.final_profile[t])


def test_bmp_reports_capped_users():
    cfg = SystemConfig(num_users=1, num_carriers=2, noise_power=NOISE, max_power=1e-9)
    out = bmp_run(make_channel([[1e-9, 2e-9]]), cfg)
    assert out.converged
    assert out.capped_users == frozenset({0})
    assert out.final_profile[0, 1] == 1e-9


# ---------------------------------------------------------------------------
# SINR balancing and the per-carrier benchmark
# ---------------------------------------------------------------------------
@pytest.mark.parametrize("kind", KINDS)
def test_balanced_powers_reach_target(kind):
    cfg = SystemConfig(num_users=4, num_carriers=2, processing_gain=32, noise_power=NOISE)
    ch = sample_channel(cfg, np.random.default_rng(11), full_rank=True)
    mask = np.ones((4, 2), dtype=bool)
    p, ok = sinr_balanced_powers(mask, ch, cfg, kind)
    assert ok
    np.testing.assert_allclose(sinr_matrix(kind, p, ch, cfg), cfg.gamma_star, rtol=1e-9)


@pytest.mark.parametrize("kind", ["mf", "de"])
def test_balanced_closed_form_matches_iteration(kind):
    unbounded = SystemConfig(num_users=4, num_carriers=2, processing_gain=32, noise_power=NOISE)
    bounded = unbounded.replace(max_power=1e3)  # finite limit forces the iterative path
    ch = sample_channel(unbounded, np.random.default_rng(3), full_rank=True)
    mask = np.array([[1, 0], [1, 1], [0, 1], [1, 1]], dtype=bool)
    closed, ok1 = sinr_balanced_powers(mask, ch, unbounded, kind)
    iterated, ok2 = sinr_balanced_powers(mask, ch, bounded, kind)
    assert ok1 and ok2
    np.testing.assert_allclose(closed, iterated, rtol=1e-9)


def test_balanced_all_on_one_carrier_gets_theta_k():
    k, n_pg = 3, 32
    cfg = SystemConfig(num_users=k, num_carriers=1, processing_gain=n_pg, noise_power=NOISE)
    gains = np.array([[1.0], [2.0], [4.0]]) * 1e-9
    ch = make_channel(gains, n_pg)
    profile, total = independent_max_benchmark(ch, cfg)
    received = profile[:, 0] * gains[:, 0]
    np.testing.assert_allclose(received, NOISE * cfg.gamma_star * theta(k, cfg.gamma_star, n_pg),
                               rtol=1e-12)


def test_benchmark_equals_joint_for_single_user_with_equal_gains():
    cfg = SystemConfig(num_users=1, num_carriers=2, noise_power=NOISE)
    ch = make_channel([[1e-9, 1e-9]])
    _, bench = independent_max_benchmark(ch, cfg)
    joint = bmp_run(ch, cfg)
    joint_total = total_utility(joint.final_profile, ch, "mf", cfg)
    closed = cfg.throughput_scale * cfg.efficiency(cfg.gamma_star) * 1e-9 / (cfg.gamma_star * NOISE)
    assert bench == pytest.approx(closed, rel=1e-12)
    assert joint_total == pytest.approx(closed, rel=1e-12)


def test_benchmark_infeasible_when_carrier_overloaded():
    cfg = SystemConfig(num_users=5, num_carriers=2, processing_gain=16, noise_power=NOISE)
    ch = sample_channel(cfg, np.random.default_rng(0))
    with pytest.raises(InfeasibleError):
        independent_max_benchmark(ch, cfg)
    batch = sample_channels(cfg, [np.random.default_rng(s) for s in range(3)])
    _, totals, feasible = independent_max_benchmark_batch(batch, cfg)
    assert not feasible.any() and np.isnan(totals).all()


def test_equilibrium_powers_match_balancing(config2x2):
    cfg = config2x2.replace(noise_power=NOISE, num_users=3)
    ch = sample_channel(cfg, np.random.default_rng(2))
    for carriers in itertools.product(range(2), repeat=3):
        a = CarrierAssignment(carriers, 2)
        if max(a.occupancy) > 2:
            continue
        p, ok = sinr_balanced_powers(a.mask(), ch, cfg, "mf")
        assert ok
        np.testing.assert_allclose(p, equilibrium_powers(a, ch, cfg), rtol=1e-12)
