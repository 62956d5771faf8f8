"""Classification, bisection brackets, sweeps, and separation checks."""

import math

import numpy as np
import pytest

import oracle_rk4 as orc
from boundstates.classify import (
    _side_for_bisection,
    classify,
    find_kth_bound_state,
    intersection_scan,
    uniqueness_sweep,
    verify_separation,
)
from boundstates.errors import BracketError, ConfigError, UndecidedError
from boundstates.shooting import integrate


def test_energy_shortcut_below_beta(prob_t2, cubic):
    # F(alpha) < 0 anywhere in (0, beta) settles the sign question with no
    # integration at all
    rng = np.random.default_rng(11)
    for alpha in rng.uniform(0.05, cubic.beta - 1e-6, 50):
        res = classify(prob_t2, float(alpha), k_max=1)
        assert res.membership == "P_k"
        assert res.pn_side == "P"
        assert res.membership_code() == "P1"
        assert math.isinf(res.ball_min)


def test_shortcut_can_be_disabled(prob_t2):
    res = classify(prob_t2, 1.2, k_max=1, shortcut=False)
    assert res.membership_code() == "P1"
    assert math.isfinite(res.ball_min)


def test_ground_bracket_against_fixed_step_oracle(bracket_t2):
    ref = orc.ground_alpha_star(2.0, 3.0, 2.0, 10.0, h=1e-3, iters=33)
    assert abs(bracket_t2.alpha_star - ref) <= 1e-6
    assert bracket_t2.k == 1
    assert bracket_t2.orientation == "P_below_N_above"
    assert bracket_t2.lo < bracket_t2.alpha_star < bracket_t2.hi
    assert bracket_t2.width <= 1e-12
    assert bracket_t2.slope_at_Zk is not None and bracket_t2.slope_at_Zk > 0.0


def test_bracket_stable_under_tolerance_change(prob_t2, bracket_t2):
    loose = find_kth_bound_state(prob_t2, 1, 2.0, 10.0, tol=1e-8)
    assert abs(loose.alpha_star - bracket_t2.alpha_star) <= 1e-8
    assert loose.width <= 1e-8


def test_classification_near_the_bracket(prob_t2, bracket_t2):
    a = bracket_t2.alpha_star
    # the default G skin is much wider than the bracket, so values within
    # 1e-10 of the midpoint still read as a bound state at level 1
    for da in (0.0, 1e-10, -1e-10):
        res = classify(prob_t2, a + da, k_max=1)
        assert res.membership == "G_k_within_tol"
        assert res.membership_code() == "G1"
    below = classify(prob_t2, a - 1e-2, k_max=1)
    assert below.membership_code() == "P1"
    above = classify(prob_t2, a + 1e-2, k_max=1)
    assert above.membership_code() == "N1"
    assert above.record_at(1).Z is not None
    assert above.ball_min > below.g_tol or math.isinf(below.ball_min)


def test_level_records_with_zero_cap(prob_t14):
    res = classify(prob_t14, 8.0, k_max=2)
    assert res.terminal_k == 2
    assert res.membership_code() == "N2"
    assert res.records[0].code() == "N1"
    assert res.record_at(1).Z < res.record_at(2).Z
    assert res.pn_side == "N"
    d = res.to_dict()
    assert d["membership_code"] == "N2"
    assert len(d["records"]) == 2
    assert d["tail"] is None


def test_second_level_bracket(bracket_t14_k2):
    assert bracket_t14_k2.k == 2
    assert bracket_t14_k2.alpha_star == pytest.approx(5.42900567269, abs=1e-8)
    assert bracket_t14_k2.orientation == "P_below_N_above"


def test_sweep_finds_exactly_one_transition(prob_t2, bracket_t2):
    result = uniqueness_sweep(prob_t2, 1, 4.0, 4.7, step=0.1,
                              refine_tol=1e-8)
    assert len(result.transitions) == 1
    assert len(result.brackets) == 1
    assert result.brackets[0].alpha_star == pytest.approx(
        bracket_t2.alpha_star, abs=1e-7)
    a_left, a_right, side_left, side_right = result.transitions[0]
    assert a_left < bracket_t2.alpha_star < a_right
    assert side_left == "P" and side_right == "N"


def test_sweep_below_beta_is_all_P(prob_t2):
    result = uniqueness_sweep(prob_t2, 1, 0.2, 1.35, step=0.05)
    assert result.transitions == []
    assert result.brackets == []
    assert all(row.membership_code == "P1" for row in result.rows)


def test_sweep_parallel_matches_serial(prob_t2):
    serial = uniqueness_sweep(prob_t2, 1, 4.0, 4.7, step=0.1,
                              refine_tol=1e-8)
    threaded = uniqueness_sweep(prob_t2, 1, 4.0, 4.7, step=0.1,
                                refine_tol=1e-8, threads=2)
    assert [r.membership_code for r in serial.rows] == \
        [r.membership_code for r in threaded.rows]
    assert threaded.brackets[0].alpha_star == pytest.approx(
        serial.brackets[0].alpha_star, abs=1e-12)


def test_separation_on_ground_bracket(prob_t2, bracket_t2):
    rep = verify_separation(prob_t2, bracket_t2, delta=1e-3, n_pairs=5)
    assert rep.all_ok
    assert len(rep.pairs) == 5
    for pair in rep.pairs:
        assert pair["ok"]
        assert pair["Z_1"] > pair["Z_2"]
        assert pair["slope_1"] < pair["slope_2"]
    assert rep.below_code == "P1"
    assert rep.below_ok
    d = rep.to_dict()
    assert d["k"] == 1 and len(d["pairs"]) == 5


def test_separation_rejects_excessive_delta(prob_t2, bracket_t2):
    # far above the bracket trajectories are still N, but 10 units above
    # the domain check trips first; use a width that walks off the N side
    with pytest.raises((BracketError, ConfigError)):
        verify_separation(prob_t2, bracket_t2, delta=-1.0)


def test_bisection_needs_straddling_endpoints(prob_t2):
    with pytest.raises(BracketError, match="both endpoints"):
        find_kth_bound_state(prob_t2, 1, 1.1, 1.3)


def test_bisection_input_validation(prob_t2):
    with pytest.raises(ConfigError):
        find_kth_bound_state(prob_t2, 1, 5.0, 4.0)
    with pytest.raises(ConfigError):
        find_kth_bound_state(prob_t2, 1, 2.0, 10.0, tol=0.0)
    with pytest.raises(ConfigError):
        classify(prob_t2, 4.0, k_max=0)
    with pytest.raises(ConfigError):
        classify(prob_t2, 4.0, tol=-1.0)
    with pytest.raises(ConfigError):
        classify(prob_t2, -2.0)


def test_undecided_at_short_horizon(prob_t2):
    # near the critical value the energy hugs zero well past r=2, so the
    # doubled horizon still cannot decide; 4.0 itself would settle early
    res = classify(prob_t2, 4.3374, k_max=1, r_max=1.0)
    assert res.pn_side == "UND"
    assert res.membership == "undecided"
    assert res.doubled
    assert res.r_max_used == pytest.approx(2.0)
    with pytest.raises(UndecidedError, match="after one doubling"):
        _side_for_bisection(res)


def test_intersection_scan_straddling_pair(prob_t2, bracket_t2):
    a = bracket_t2.alpha_star
    t1 = integrate(prob_t2, a + 0.1, r_max=30.0)
    t2 = integrate(prob_t2, a + 0.4, r_max=30.0)
    z2 = classify(prob_t2, a + 0.4, keep_trajectory=True)
    rep = intersection_scan(t1, t2, (1e-6, 12.0))
    assert rep.first is not None
    r_I, U_I = rep.first
    assert 0.0 < r_I < 12.0
    assert U_I > 0.0
    rs = [p[0] for p in rep.points]
    assert rs == sorted(rs)
    # the curves are ordered by alpha at the origin, so a window that stops
    # short of the crossing sees nothing
    empty = intersection_scan(t1, t2, (1e-6, 0.2))
    assert empty.first is None
    assert empty.points == []
    d = rep.to_dict()
    assert d["first"] == [r_I, U_I]


def test_sweep_input_validation(prob_t2):
    with pytest.raises(ConfigError):
        uniqueness_sweep(prob_t2, 1, 4.0, 4.0)
    with pytest.raises(ConfigError):
        uniqueness_sweep(prob_t2, 1, 4.0, 4.7, step=-0.1)
