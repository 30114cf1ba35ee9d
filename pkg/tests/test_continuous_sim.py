"""Continuous-time construction: clocks, time change, switch law, engine.

Grid-identity tests use dt = 1/1024 so that every grid time j * dt is an
exact float and searchsorted comparisons cannot straddle a rounding error.
"""

import math

import numpy as np
import pytest
from scipy.stats import kstest

from fakebm.continuous_sim import (
    BrownianPath,
    ClockExhaustedError,
    OccupationClock,
    TimeChange,
    assemble_exp_fake_path,
    assemble_fake_path,
    inverse_clock,
    iter_fake_grid_chunks,
    occupation_clock,
    path_rng,
    sample_brownian_path,
    sample_switch_time,
    simulate_exp_marginal_samples,
    simulate_limit_path,
    simulate_marginal_samples,
)
from fakebm.densities import survival_ratio
from fakebm.intervals import build_interval_system

TWO_GAPS = [(0.1, 0.4), (0.6, 0.9)]
DT = 1.0 / 1024.0

EXP_WINDOW = (0.6, 1.1, 0.5, 1.0)
EXP_INTERVALS = [(0.7, 0.8), (0.9, 1.0)]


@pytest.fixture(scope="module")
def sys2():
    return build_interval_system(TWO_GAPS)


# ---------- driving path ----------


def test_brownian_path_shape_and_determinism():
    a = sample_brownian_path(5, 1.0, 1e-3)
    b = sample_brownian_path(5, 1.0, 1e-3)
    assert len(a.values) == 1001
    assert a.t_max == pytest.approx(1.0)
    assert np.array_equal(a.values, b.values)


def test_brownian_path_fixed_start():
    p = sample_brownian_path(5, 0.5, 1e-3, x0=2.5)
    assert p.values[0] == 2.5


def test_brownian_path_increment_moments():
    p = sample_brownian_path(11, 2.0, 1e-3)
    inc = np.diff(p.values)
    assert inc.mean() == pytest.approx(0.0, abs=4 * math.sqrt(1e-3 / 2000))
    assert inc.var() == pytest.approx(1e-3, rel=0.15)


def test_path_rng_substreams():
    a = path_rng(9, 3).standard_normal(4)
    b = path_rng(9, 3).standard_normal(4)
    c = path_rng(9, 4).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


# ---------- occupation clock and its inverse ----------


def test_occupation_clock_left_endpoint_rule(sys2):
    # active flags of the first four values: False True False True
    path = BrownianPath(dt=0.1, values=np.array([0.5, 0.2, 0.45, 0.7, 0.05]))
    clock = occupation_clock(path, sys2)
    assert np.allclose(clock.values, [0.0, 0.0, 0.1, 0.1, 0.2])


def test_time_change_inverts_clock(sys2):
    clock = OccupationClock(dt=0.1, values=np.array([0.0, 0.0, 0.1, 0.1, 0.2]))
    tc = TimeChange(clock)
    assert tc(0.0) == pytest.approx(0.2)
    assert tc(0.05) == pytest.approx(0.2)
    assert tc(0.1) == pytest.approx(0.4)
    assert inverse_clock(clock, 0.0) == pytest.approx(0.2)
    with pytest.raises(ClockExhaustedError):
        tc(0.2)


def test_clock_of_always_active_path_is_identity(sys2):
    path = sample_brownian_path(3, 0.5, DT, x0=7.0)
    assert path.values.min() > 1.0
    clock = occupation_clock(path, sys2)
    assert np.array_equal(clock.values, np.arange(len(path.values)) * DT)


# ---------- switch time ----------


def test_switch_time_zero_in_active_set(sys2):
    assert sample_switch_time(sys2, 0.25, seed=1) == 0.0
    assert sample_switch_time(sys2, -3.0, seed=1) == 0.0


def test_switch_time_positive_in_gap(sys2):
    t = sample_switch_time(sys2, 0.5, seed=1)
    assert t > 0.0


def test_switch_time_law_matches_survival_ratio(sys2):
    # P(T > t | start x0) = survival_ratio(x0, t)
    res = simulate_marginal_samples(
        sys2, (0.0,), 4000, seed=2024, dt=1e-4, t_driver=0.05, fixed_start=0.5
    )
    stat = kstest(res.switch_times, lambda t: 1.0 - survival_ratio(0.5, t)).statistic
    assert stat <= 1.5 * 1.36 / math.sqrt(4000)


# ---------- single-path assembly ----------


def test_always_active_path_reproduces_driver_exactly(sys2):
    driver = sample_brownian_path(3, 0.6, DT, x0=7.0)
    assert driver.values.min() > 1.0
    fake = assemble_fake_path(driver, sys2, seed=0, horizon=0.2)
    n = int(round(0.2 / DT))
    assert fake.switch_time == 0.0
    assert np.array_equal(fake.values, driver.values[: n + 1])
    assert fake.busy_start == driver.values[0]


def test_frozen_path_holds_then_moves_into_active_set(sys2):
    rng = np.random.default_rng(77)
    for _ in range(5):
        driver = sample_brownian_path(rng, 3.0, 1e-3, x0=0.5)
        try:
            fake = assemble_fake_path(driver, sys2, rng, horizon=0.8)
        except ClockExhaustedError:
            continue
        times = np.arange(len(fake.values)) * fake.dt
        lazy = times < fake.switch_time
        assert fake.switch_time > 0.0
        assert np.all(fake.values[lazy] == 0.5)
        busy_vals = fake.values[~lazy]
        if busy_vals.size:
            assert sys2.contains_many(busy_vals).all()
        assert fake.mode_at(0.0) == "lazy"
        return
    pytest.fail("clock ran out on every attempt")


def test_assemble_raises_when_clock_cannot_cover_horizon(sys2):
    driver = sample_brownian_path(3, 0.3, 1e-3, x0=0.25)
    with pytest.raises(ClockExhaustedError):
        assemble_fake_path(driver, sys2, seed=0, horizon=0.5)


def test_simulate_limit_path_runs_on_cantor_system():
    fake = simulate_limit_path(depth=3, t_max=0.2, dt=1e-3, seed=5)
    assert len(fake.values) == 201
    again = simulate_limit_path(depth=3, t_max=0.2, dt=1e-3, seed=5)
    assert np.array_equal(fake.values, again.values)


# ---------- many-path engine ----------


def test_engine_grid_identity_matches_driver(sys2):
    # always-active start: the engine's values are the driver values at the
    # query times, exactly
    t_grid = np.array([0.0, 32 * DT, 113 * DT])
    res = simulate_marginal_samples(
        sys2, t_grid, 1, seed=3, dt=DT, t_driver=0.5, fixed_start=7.0
    )
    driver = sample_brownian_path(path_rng(3, 0), 0.5, DT, x0=7.0)
    assert driver.values.min() > 1.0
    assert res.values[0, 0] == driver.values[0]
    assert res.values[0, 1] == driver.values[32]
    assert res.values[0, 2] == driver.values[113]
    assert not res.frozen.any()
    assert res.resampled == 0


def test_engine_chunk_and_worker_invariance(sys2):
    base = simulate_marginal_samples(sys2, (0.3,), 128, 7, dt=1e-3, chunk=128)
    small = simulate_marginal_samples(sys2, (0.3,), 128, 7, dt=1e-3, chunk=17)
    par = simulate_marginal_samples(sys2, (0.3,), 128, 7, dt=1e-3, chunk=32, workers=2)
    assert np.array_equal(base.values, small.values)
    assert np.array_equal(base.values, par.values)
    assert np.array_equal(base.switch_times, par.switch_times)
    assert np.array_equal(base.busy_start, par.busy_start)


def test_engine_prefix_stability(sys2):
    big = simulate_marginal_samples(sys2, (0.2,), 90, 13, dt=1e-3)
    small = simulate_marginal_samples(sys2, (0.2,), 40, 13, dt=1e-3)
    assert np.array_equal(big.values[:40], small.values)


def test_engine_frozen_paths_hold_start_busy_paths_sit_in_active(sys2):
    res = simulate_marginal_samples(sys2, (0.3, 0.8), 500, seed=41, dt=1e-3)
    assert res.values.shape == (500, 2)
    frozen_vals = res.values[res.frozen]
    starts = np.broadcast_to(res.x0[:, None], res.values.shape)[res.frozen]
    assert np.array_equal(frozen_vals, starts)
    busy_vals = res.values[~res.frozen]
    assert sys2.contains_many(busy_vals).all()
    # frozen starts are in a gap, and frozen flags are monotone in t
    assert not sys2.contains_many(res.x0[res.frozen[:, 0]]).any()
    assert not np.any(~res.frozen[:, 0] & res.frozen[:, 1])


def test_engine_busy_start_is_gap_edge_within_overshoot(sys2):
    res = simulate_marginal_samples(
        sys2, (0.0,), 400, seed=6, dt=1e-4, t_driver=0.1, fixed_start=0.5
    )
    land = res.busy_start
    assert np.isfinite(land).all()
    # overshoot past the edge is one Gaussian step, scale sqrt(dt) = 0.01
    near_left = np.abs(land - 0.4) < 0.05
    near_right = np.abs(land - 0.6) < 0.05
    assert np.all(near_left | near_right)
    # symmetric start: both sides within 4 sigma of half
    p = near_right.mean()
    assert abs(p - 0.5) <= 4 * math.sqrt(0.25 / 400)


def test_engine_resamples_exhausted_drivers(sys2):
    res = simulate_marginal_samples(
        sys2, (0.5,), 300, seed=8, dt=1e-3, t_driver=0.2, fixed_start=0.5
    )
    assert res.resampled > 0
    busy = ~res.frozen[:, 0]
    assert sys2.contains_many(res.values[busy, 0]).all()
    assert np.all(res.values[res.frozen[:, 0], 0] == 0.5)


def test_engine_raises_when_resampling_cannot_help(sys2):
    with pytest.raises(ClockExhaustedError):
        simulate_marginal_samples(
            sys2, (0.5,), 4, seed=8, dt=1e-3, t_driver=0.3, fixed_start=0.25
        )


def test_engine_rejects_bad_grids(sys2):
    with pytest.raises(ValueError):
        simulate_marginal_samples(sys2, (0.5, 0.2), 10, seed=1, dt=1e-3)
    with pytest.raises(ValueError):
        simulate_marginal_samples(sys2, (-0.1,), 10, seed=1, dt=1e-3)
    with pytest.raises(ValueError):
        simulate_marginal_samples(sys2, (), 10, seed=1, dt=1e-3)
    with pytest.raises(ValueError):
        simulate_marginal_samples(sys2, (0.5,), 0, seed=1, dt=1e-3)


def test_iter_chunks_arrive_in_path_order(sys2):
    starts = [
        part["start"]
        for part in iter_fake_grid_chunks(sys2, np.array([0.1]), 70, 21, dt=1e-3, chunk=32)
    ]
    assert starts == [0, 32, 64]


# ---------- exponential variant ----------


def test_exp_path_before_window_is_exponential_martingale():
    fake = assemble_exp_fake_path(EXP_WINDOW, EXP_INTERVALS, 0.9, 2e-3, seed=10)
    assert len(fake.values) == 451
    assert np.all(fake.values > 0)
    # log-values before t1 = 0.5 are a drifted random walk with variance dt
    logs = np.log(fake.values[:251]) + np.arange(251) * 2e-3 / 2.0
    inc = np.diff(logs)
    assert inc.var() == pytest.approx(2e-3, rel=0.3)
    again = assemble_exp_fake_path(EXP_WINDOW, EXP_INTERVALS, 0.9, 2e-3, seed=10)
    assert np.array_equal(fake.values, again.values)


def test_exp_path_freezes_inside_gap():
    system = build_interval_system(EXP_INTERVALS, domain=(0.6, 1.1))
    k1 = 250
    for seed in range(60):
        fake = assemble_exp_fake_path(EXP_WINDOW, EXP_INTERVALS, 0.9, 2e-3, seed=seed)
        x1 = fake.values[k1]
        if system.contains(float(x1)):
            continue
        times = np.arange(len(fake.values)) * 2e-3
        lazy = (times > 0.5) & (times < fake.switch_time)
        assert np.all(fake.values[lazy] == x1)
        busy = times >= max(fake.switch_time, 0.5 + 2e-3)
        if busy.any():
            assert system.contains_many(fake.values[busy]).all()
        return
    pytest.fail("no seed froze at the window start")


def test_exp_path_rejects_bad_window():
    with pytest.raises(ValueError):
        assemble_exp_fake_path((0.6, 1.1, 0.0, 1.0), EXP_INTERVALS, 0.9, 2e-3, seed=1)
    with pytest.raises(ValueError):
        assemble_exp_fake_path(EXP_WINDOW, EXP_INTERVALS, 1.5, 2e-3, seed=1)


def test_exp_samples_keep_unit_mean_and_velocity_structure():
    res = simulate_exp_marginal_samples(
        EXP_WINDOW, EXP_INTERVALS, (0.3, 0.6, 0.9), 800, seed=99, dt=2e-3
    )
    assert res.values.shape == (800, 3)
    assert np.all(res.values > 0)
    # martingale: every marginal has mean 1
    for q, t in enumerate((0.3, 0.6, 0.9)):
        sd = math.sqrt((math.exp(t) - 1.0) / 800)
        assert abs(res.values[:, q].mean() - 1.0) <= 4 * sd
    # nothing is frozen before the window opens
    assert not res.frozen[:, 0].any()
    # frozen values sit inside a gap of the (0.6, 1.1) domain
    system = build_interval_system(EXP_INTERVALS, domain=(0.6, 1.1))
    frozen_vals = res.values[:, 1][res.frozen[:, 1]]
    assert frozen_vals.size > 0
    assert not system.contains_many(frozen_vals).any()


def test_exp_samples_deterministic():
    a = simulate_exp_marginal_samples(EXP_WINDOW, EXP_INTERVALS, (0.7,), 60, seed=4, dt=2e-3)
    b = simulate_exp_marginal_samples(EXP_WINDOW, EXP_INTERVALS, (0.7,), 60, seed=4, dt=2e-3)
    assert np.array_equal(a.values, b.values)
    with pytest.raises(ValueError):
        simulate_exp_marginal_samples(EXP_WINDOW, EXP_INTERVALS, (1.2,), 60, seed=4)
