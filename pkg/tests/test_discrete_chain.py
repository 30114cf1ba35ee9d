"""Two-mode lattice chain: kernel rows, hazards, exact DP, and the sampler."""

from fractions import Fraction

import numpy as np
import pytest

from fakebm.discrete_chain import (
    Mode,
    busy_transition,
    evolve,
    initial_joint,
    lazy_hazard,
    marginal,
    max_marginal_deviation,
    run_marginal_certification,
    sample_endpoints,
    sample_path,
    switch_jump,
)
from fakebm.intervals import build_interval_system, lattice_project
from fakebm.lazy_walk import pmf_value

TWO_GAPS = [(0.1, 0.4), (0.6, 0.9)]


@pytest.fixture(scope="module")
def lat_m8():
    # spacing 0.5: single frozen site 1 between boundary sites 0 and 2
    return lattice_project(build_interval_system(TWO_GAPS), 8, j_max=60)


@pytest.fixture(scope="module")
def lat_ragged():
    # spacing 0.1; site 3 faces a gap of lattice length 2 on the left
    # (active flank at 1) and length 3 on the right (active flank at 6)
    sys_ = build_interval_system([(0.05, 0.15), (0.25, 0.35), (0.55, 0.95)])
    return lattice_project(sys_, 200, j_max=260)


# ---------- busy kernel ----------


def test_busy_row_interior(lat_m8):
    assert busy_transition(lat_m8, 5) == [
        (4, Fraction(1, 4)),
        (5, Fraction(1, 2)),
        (6, Fraction(1, 4)),
    ]


def test_busy_row_across_unequal_gaps(lat_ragged):
    assert busy_transition(lat_ragged, 3) == [
        (1, Fraction(1, 8)),
        (3, Fraction(19, 24)),
        (6, Fraction(1, 12)),
    ]


def test_busy_row_boundary_one_sided(lat_ragged):
    assert busy_transition(lat_ragged, 6) == [
        (3, Fraction(1, 12)),
        (6, Fraction(2, 3)),
        (7, Fraction(1, 4)),
    ]


def test_busy_row_gap_of_lattice_length_one():
    # the gap (0.4, 0.6) at spacing 0.2 holds no frozen site, so the rows
    # on its edges are plain interior rows
    lat = lattice_project(build_interval_system(TWO_GAPS), 50)
    assert busy_transition(lat, 2) == [
        (1, Fraction(1, 4)),
        (2, Fraction(1, 2)),
        (3, Fraction(1, 4)),
    ]


def test_busy_rows_are_zero_mean_laws(lat_ragged):
    for i in range(-20, 21):
        if not lat_ragged.is_active(i):
            continue
        row = busy_transition(lat_ragged, i)
        assert sum(p for _, p in row) == 1
        assert sum(dest * p for dest, p in row) == i
        assert all(p > 0 for _, p in row)


def test_busy_row_rejects_frozen_site(lat_m8):
    with pytest.raises(ValueError):
        busy_transition(lat_m8, 1)


# ---------- lazy hazard ----------


def test_lazy_hazard_known_values():
    assert lazy_hazard(1, 2, 8) == Fraction(3, 80)
    assert lazy_hazard(2, 7, 8) == Fraction(1, 63)
    # n = 8: (9 - 2) / (2 (81 - 1))
    assert lazy_hazard(1, 0, 8) == Fraction(7, 160)


def test_lazy_hazard_is_one_step_mass_loss():
    # hazard = 1 - mass(n+1, i) / mass(n, i) for the lazy walk
    for m in (8, 50):
        for step in range(0, 11):
            for i in (-2, -1, 0, 1, 2):
                n = m + step
                direct = 1 - Fraction(pmf_value(n + 1, i), 1) / pmf_value(n, i)
                assert lazy_hazard(i, step, m) == direct


def test_lazy_hazard_positive_on_gap_sites(lat_m8):
    for step in range(50):
        for i in lat_m8.gap_sites:
            h = lazy_hazard(i, step, lat_m8.m)
            assert 0 < h < 1


def test_lazy_hazard_rejects_growing_site():
    # at n = m + step < 2 i^2 the site is still gaining mass
    with pytest.raises(ValueError):
        lazy_hazard(3, 0, 8)


# ---------- switch jump ----------


def test_switch_jump_unequal_flanks(lat_ragged):
    assert switch_jump(lat_ragged, 5) == [
        (3, Fraction(1, 3)),
        (6, Fraction(2, 3)),
    ]
    assert switch_jump(lat_ragged, 4) == [
        (3, Fraction(2, 3)),
        (6, Fraction(1, 3)),
    ]


def test_switch_jump_is_martingale(lat_ragged):
    for i in lat_ragged.gap_sites:
        row = switch_jump(lat_ragged, i)
        assert sum(p for _, p in row) == 1
        assert sum(dest * p for dest, p in row) == i


def test_switch_jump_rejects_active_site(lat_m8):
    with pytest.raises(ValueError):
        switch_jump(lat_m8, 0)


# ---------- exact DP evolution ----------


def test_initial_joint_splits_modes(lat_m8):
    joint = initial_joint(lat_m8, 8)
    assert set(joint.lazy) == {1}
    assert joint.lazy[1] == pmf_value(8, 1)
    assert joint.busy[0] == pmf_value(8, 0)
    assert joint.total_mass() == 1


def test_evolve_preserves_walk_marginal_exactly(lat_m8):
    joint = initial_joint(lat_m8, 8)
    for _ in range(12):
        joint = evolve(joint, lat_m8, 8)
        assert max_marginal_deviation(joint, lat_m8, 8) == 0
        assert joint.total_mass() == 1


def test_evolve_keeps_global_mean_zero(lat_m8):
    joint = initial_joint(lat_m8, 8)
    for _ in range(10):
        joint = evolve(joint, lat_m8, 8)
    mean = sum(j * p for j, p in marginal(joint).items())
    assert mean == 0


def test_evolve_mode_supports_stay_disjoint(lat_m8):
    joint = initial_joint(lat_m8, 8)
    gap = set(lat_m8.gap_sites)
    for _ in range(8):
        joint = evolve(joint, lat_m8, 8)
        assert set(joint.lazy) <= gap
        assert not (set(joint.busy) & gap)


def test_lazy_mass_decays_but_persists(lat_m8):
    joint = initial_joint(lat_m8, 8)
    masses = [joint.lazy[1]]
    for _ in range(15):
        joint = evolve(joint, lat_m8, 8)
        masses.append(joint.lazy[1])
    assert all(b < a for a, b in zip(masses, masses[1:]))
    assert masses[-1] > 0


def test_float_backend_tracks_rational(lat_m8):
    jr = initial_joint(lat_m8, 8, backend="rational")
    jf = initial_joint(lat_m8, 8, backend="float")
    for _ in range(10):
        jr = evolve(jr, lat_m8, 8)
        jf = evolve(jf, lat_m8, 8)
    mr = marginal(jr)
    mf = marginal(jf)
    for j, p in mr.items():
        assert mf[j] == pytest.approx(float(p), abs=1e-14)


def test_certification_report_exact_backend(lat_m8):
    report = run_marginal_certification(lat_m8, steps=12, backend="rational")
    assert report["exactly_zero"] is True
    assert report["max_abs_deviation"] == 0.0
    assert report["mass_deficit"] == 0.0
    assert report["m"] == 8
    assert report["N"] == 2
    assert report["steps"] == 12
    assert report["elapsed_s"] > 0


def test_certification_report_float_backend():
    lat = lattice_project(build_interval_system(TWO_GAPS), 50, j_max=110)
    report = run_marginal_certification(lat, steps=30, backend="float")
    assert report["max_abs_deviation"] <= 1e-12
    assert report["mass_deficit"] <= 1e-12


# ---------- samplers ----------


def test_sample_path_shape_and_determinism(lat_m8):
    a = sample_path(lat_m8, 30, seed=123)
    b = sample_path(lat_m8, 30, seed=123)
    c = sample_path(lat_m8, 30, seed=124)
    assert a == b
    assert a != c
    assert len(a) == 31


def test_sample_path_mode_and_move_legality(lat_m8):
    gap = set(lat_m8.gap_sites)
    seen_switch = False
    for seed in range(40):
        states = sample_path(lat_m8, 40, seed=seed)
        for prev, cur in zip(states, states[1:]):
            if prev.mode is Mode.LAZY:
                assert prev.position in gap
                if cur.mode is Mode.LAZY:
                    assert cur.position == prev.position
                else:
                    seen_switch = True
                    left, right = lat_m8.gap_neighbors(prev.position)
                    assert cur.position in (left, right)
            else:
                assert cur.mode is Mode.BUSY
                legal = {prev.position - 1, prev.position, prev.position + 1}
                if prev.position in lat_m8.boundary_sites:
                    legal |= set(lat_m8.gap_neighbors(prev.position))
                assert cur.position in legal
    assert seen_switch


def test_sample_path_window_guard(lat_m8):
    with pytest.raises(ValueError):
        sample_path(lat_m8, 60, seed=0)


def test_sample_endpoints_deterministic_and_block_stable(lat_m8):
    pos_a, frz_a = sample_endpoints(lat_m8, 5, 4096 + 50, seed=99)
    pos_b, frz_b = sample_endpoints(lat_m8, 5, 4096 + 50, seed=99)
    assert np.array_equal(pos_a, pos_b)
    assert np.array_equal(frz_a, frz_b)
    pos_c, frz_c = sample_endpoints(lat_m8, 5, 4096, seed=99)
    assert np.array_equal(pos_a[:4096], pos_c)
    assert np.array_equal(frz_a[:4096], frz_c)


def test_sample_endpoints_matches_dp_marginal(lat_m8):
    n = 20000
    horizon = 12
    pos, frozen = sample_endpoints(lat_m8, horizon, n, seed=31337)
    joint = initial_joint(lat_m8, 8, backend="float")
    for _ in range(horizon):
        joint = evolve(joint, lat_m8, 8)
    law = marginal(joint)

    counts = {}
    for j in pos:
        counts[int(j)] = counts.get(int(j), 0) + 1
    # every observed site is in the DP support
    assert set(counts) <= {j for j, p in law.items() if p > 0}
    # z test per site with expected count >= 10, 4 sigma
    for j, p in law.items():
        if n * p < 10:
            continue
        sd = (n * p * (1 - p)) ** 0.5
        assert abs(counts.get(j, 0) - n * p) <= 4 * sd

    # frozen fraction matches the DP lazy mass
    p_lazy = sum(joint.lazy.values())
    sd = (n * p_lazy * (1 - p_lazy)) ** 0.5
    assert abs(frozen.sum() - n * p_lazy) <= 4 * sd
    # frozen particles sit on gap sites, busy ones on active sites
    assert set(pos[frozen].tolist()) <= set(lat_m8.gap_sites)
    assert not (set(pos[~frozen].tolist()) & set(lat_m8.gap_sites))
