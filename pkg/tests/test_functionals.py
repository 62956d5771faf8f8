"""Level-parameterized functionals: inverses, closed-form anchors,
derivative identities against finite differences, and monitors."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from boundstates.errors import DomainError, SingularWindowError
from boundstates.functionals import (
    branch_boundaries,
    branch_inverse,
    default_s_grid,
    eval_P,
    eval_S12,
    eval_T,
    eval_W_family,
    monotonicity_monitor,
    s_threshold,
    trace_S12,
    trace_functional,
)
from boundstates.classify import intersection_scan
from boundstates.shooting import extract_markers, integrate

A_STAR_T2 = 4.337387677282095
A_STAR_T14 = 5.42900567269


@pytest.fixture(scope="module")
def ground_pair(prob_t2):
    # branch-1 trajectories on the N side of the theta=2 ground state:
    # one hugging the critical point, one well separated
    ta = integrate(prob_t2, A_STAR_T2 + 1e-6, r_max=60.0)
    tb = integrate(prob_t2, A_STAR_T2 + 0.3, r_max=60.0)
    return ta, tb


@pytest.fixture(scope="module")
def critical_pair_t14(prob_t14):
    # two trajectories just below the theta=1.4 second transition; both
    # dip below -beta at the first minimum
    t1 = integrate(prob_t14, A_STAR_T14 - 2e-4, r_max=40.0)
    t2 = integrate(prob_t14, A_STAR_T14 - 1e-4, r_max=40.0)
    return t1, t2


def _gapped(lo, hi, n, avoid):
    ss = np.linspace(lo, hi, n)
    keep = np.ones(len(ss), dtype=bool)
    for z, w in avoid:
        keep &= np.abs(ss - z) > w
    return ss[keep]


def _max_rel_err(trace):
    an, fd = trace.derivative_analytic, trace.derivative_fd
    fin = np.isfinite(an) & np.isfinite(fd)
    assert np.sum(fin) >= 0.8 * len(an)
    return float(np.max(np.abs(an[fin] - fd[fin]) / np.maximum(1.0, np.abs(an[fin]))))


# -- branch inverses -------------------------------------------------------------


def test_branch_inverse_round_trip(ground_pair):
    ta, _ = ground_pair
    inv = branch_inverse(ta, 1, "down")
    lo, hi = inv.s_range
    rng = np.random.default_rng(7)
    for s in rng.uniform(lo + 1e-6, hi - 1e-6, 40):
        r = inv.r_of(float(s))
        u, v = ta.eval(r)
        assert abs(u - s) <= 1e-10 * max(1.0, abs(s))
        assert inv.uprime_of(float(s)) == v


def test_branch_top_is_origin(ground_pair):
    ta, _ = ground_pair
    inv = branch_inverse(ta, 1, "down")
    assert inv.r_of(inv.s_range[1]) == 0.0
    assert eval_P(ta, inv, inv.s_range[1]) == 0.0


def test_branch_boundaries_structure(ground_pair):
    ta, _ = ground_pair
    bounds = branch_boundaries(ta)
    assert bounds[0] == 0.0
    assert bounds[-1] == pytest.approx(ta.r_end)
    assert all(b2 > b1 for b1, b2 in zip(bounds, bounds[1:]))
    m = extract_markers(ta)
    assert m.T[0] in bounds


def test_branch_inverse_rejections(ground_pair):
    ta, _ = ground_pair
    with pytest.raises(DomainError):
        branch_inverse(ta, 1, "up")  # branch 1 runs down
    with pytest.raises(DomainError):
        branch_inverse(ta, 99, "down")
    with pytest.raises(DomainError):
        branch_inverse(ta, 1, "sideways")
    inv = branch_inverse(ta, 1, "down")
    with pytest.raises(DomainError):
        inv.r_of(inv.s_range[1] + 0.5)
    with pytest.raises(DomainError):
        inv.r_of(inv.s_range[0] - 0.5)


def test_ordering_of_level_radii(ground_pair, cubic):
    # u strictly decreasing on branch 1, so deeper levels sit further out
    ta, _ = ground_pair
    inv = branch_inverse(ta, 1, "down")
    assert inv.r_of(cubic.beta) < inv.r_of(cubic.b)


# -- closed-form anchors ---------------------------------------------------------


def test_P_at_beta_matches_closed_form(ground_pair, prob_t2, cubic):
    ta, _ = ground_pair
    inv = branch_inverse(ta, 1, "down")
    beta = cubic.beta
    r = inv.r_of(beta)
    v = inv.uprime_of(beta)
    # F(beta) = 0, so only the -Q u'^2 term survives
    assert eval_P(ta, inv, beta) == pytest.approx(
        -float(prob_t2.weight.Q(r)) * v * v, rel=1e-12)


def test_T_anchors_and_path_refusal(ground_pair, prob_t2, cubic):
    ta, _ = ground_pair
    inv = branch_inverse(ta, 1, "down")
    beta = cubic.beta
    r = inv.r_of(beta)
    v = inv.uprime_of(beta)
    assert eval_T(ta, inv, beta) == pytest.approx(
        -0.5 * float(prob_t2.weight.int_h(r)) * v * v, rel=1e-12)
    # at the branch top r = 0 and u' = 0, leaving only the level integral
    top = inv.s_range[1]
    ref, _ = quad(cubic.ratio_Ff, beta, top, epsabs=1e-13, epsrel=1e-12)
    assert eval_T(ta, inv, top) == pytest.approx(-ref, rel=1e-9)
    # below b the level integral would cross the excluded window at b
    with pytest.raises(SingularWindowError):
        eval_T(ta, inv, 0.5)


def test_W_family_closed_forms(ground_pair, prob_t2, cubic):
    ta, _ = ground_pair
    inv = branch_inverse(ta, 1, "down")
    beta = cubic.beta
    r = inv.r_of(beta)
    v = inv.uprime_of(beta)
    wt = eval_W_family(ta, inv, beta, "Wtilde")
    assert wt.value == pytest.approx(float(prob_t2.weight.q(r)) * abs(v), rel=1e-12)
    assert wt.radicand == pytest.approx(v * v, rel=1e-10)
    # theta=2 has h(r) = r, so V is r times the root
    s = 2.0
    r2 = inv.r_of(s)
    v2 = inv.uprime_of(s)
    rad = v2 * v2 + 2.0 * float(cubic.F(s))
    assert eval_W_family(ta, inv, s, "V").value == pytest.approx(
        r2 * math.sqrt(rad), rel=1e-12)
    with pytest.raises(DomainError):
        eval_W_family(ta, inv, s, "Wbar")  # needs an up branch
    with pytest.raises(DomainError):
        eval_W_family(ta, inv, s, "Wfoo")
    # below the radicand threshold the root is refused
    with pytest.raises(DomainError):
        eval_W_family(ta, inv, -1.0, "Wtilde")


def test_V_at_minus_beta(critical_pair_t14, prob_t14, cubic):
    t1, _ = critical_pair_t14
    inv = branch_inverse(t1, 1, "down")
    beta = cubic.beta
    r = inv.r_of(-beta)
    v = inv.uprime_of(-beta)
    assert eval_W_family(t1, inv, -beta, "V").value == pytest.approx(
        float(prob_t14.weight.h(r)) * abs(v), rel=1e-12)


def test_Wtilde_squared_equals_weighted_energy(ground_pair, prob_t2, cubic):
    ta, _ = ground_pair
    inv = branch_inverse(ta, 1, "down")
    for s in np.linspace(0.3, 4.0, 25):
        r = inv.r_of(float(s))
        u, v = ta.eval(r)
        I = v * v + 2.0 * float(cubic.F(u))
        w2 = eval_W_family(ta, inv, float(s), "Wtilde").value ** 2
        assert abs(w2 - float(prob_t2.weight.q(r)) ** 2 * I) <= 1e-9 * max(1.0, abs(w2))


def test_S12_anchors(ground_pair):
    ta, tb = ground_pair
    ia = branch_inverse(ta, 1, "down")
    ib = branch_inverse(tb, 1, "down")
    # at its own top the first trajectory has r=0 and u'=0
    assert eval_S12(ta, tb, ia, ib, ia.s_range[1]) == 0.0
    ss = np.linspace(0.2, 4.0, 30)
    vals = [eval_S12(ta, tb, ia, ib, float(s)) for s in ss]
    assert all(v > 0.0 for v in vals)
    # identical trajectories give the constant ratio 1
    ia2 = branch_inverse(ta, 1, "down")
    for s in (0.5, 2.0, 4.0):
        assert eval_S12(ta, ta, ia, ia2, s) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(DomainError):
        eval_S12(tb, ta, ib, ia, ia.s_range[1])  # u2' vanishes there


# -- radicand thresholds ---------------------------------------------------------


def test_s_threshold_near_critical(ground_pair):
    ta, _ = ground_pair
    inv = branch_inverse(ta, 1, "down")
    sst = s_threshold(ta, inv)
    assert -3e-4 < sst < -1e-4

    def rad(s):
        v = inv.uprime_of(s)
        u = ta.eval(inv.r_of(s))[0]
        return v * v + 2.0 * float(ta.problem.nonlin.F(u))

    assert abs(rad(sst)) <= 1e-10
    assert rad(sst + 1e-5) > 0.0
    assert rad(sst - 1e-5) < 0.0


def test_s_threshold_bottom_and_refusal(critical_pair_t14):
    t1, _ = critical_pair_t14
    inv1 = branch_inverse(t1, 1, "down")
    # energy stays positive down to the first minimum, which lies below -beta
    assert s_threshold(t1, inv1) == inv1.s_range[0]
    # on the way back up the energy has gone negative before the branch top
    inv2 = branch_inverse(t1, 2, "up")
    with pytest.raises(DomainError):
        s_threshold(t1, inv2)


# -- derivative identities -------------------------------------------------------


def test_derivatives_down_branch(ground_pair, cubic):
    ta, _ = ground_pair
    inv = branch_inverse(ta, 1, "down")
    alpha = inv.s_range[1]
    beta, b = cubic.beta, cubic.b
    windows = [(0.0, 2e-3), (b, 2e-3), (-b, 2e-3)]
    grids = {
        "I": _gapped(inv.s_range[0] + 5e-3, alpha - 5e-3, 300, windows),
        "P": _gapped(inv.s_range[0] + 5e-3, alpha - 5e-3, 300, windows),
        "Wtilde": _gapped(0.05, alpha - 1e-3, 250, [(b, 2e-3)]),
        "What": _gapped(0.05, alpha - 1e-3, 250, [(b, 2e-3)]),
        "V": _gapped(0.05, alpha - 1e-3, 250, [(b, 2e-3)]),
        "T": np.linspace(b + 0.02, alpha - 1e-3, 200),
    }
    for name, ss in grids.items():
        tr = trace_functional(ta, inv, name, s_grid=ss)
        assert _max_rel_err(tr) <= 1e-5, name


def test_derivatives_up_branch(critical_pair_t14, cubic):
    t1, _ = critical_pair_t14
    inv = branch_inverse(t1, 2, "up")
    m1 = inv.s_range[0]
    beta, b = cubic.beta, cubic.b
    grids = {
        "Pbar": np.linspace(m1 + 1e-3, -beta, 120),
        "Tbar": np.linspace(m1 + 1e-3, -b - 1e-2, 60),
        "Wbar": np.linspace(m1 + 1e-3, -0.05, 150),
    }
    for name, ss in grids.items():
        tr = trace_functional(t1, inv, name, s_grid=ss)
        assert _max_rel_err(tr) <= 1e-5, name
    with pytest.raises(SingularWindowError):
        eval_T(t1, inv, -0.5)  # level integral crosses the window at -b


def test_derivatives_S12_pair(ground_pair, cubic):
    ta, tb = ground_pair
    ia = branch_inverse(ta, 1, "down")
    ib = branch_inverse(tb, 1, "down")
    lo = max(ia.s_range[0], ib.s_range[0])
    hi = min(ia.s_range[1], ib.s_range[1])
    span = hi - lo
    windows = [(0.0, 2e-3), (cubic.b, 2e-3), (-cubic.b, 2e-3)]
    ss = _gapped(lo + 0.01 * span, hi - 0.01 * span, 250, windows)
    tr = trace_S12(ta, tb, ia, ib, s_grid=ss)
    assert _max_rel_err(tr) <= 1e-5
    iau = branch_inverse(ta, 2, "up")
    ibu = branch_inverse(tb, 2, "up")
    lo = max(iau.s_range[0], ibu.s_range[0])
    hi = min(iau.s_range[1], ibu.s_range[1])
    span = hi - lo
    ss = _gapped(lo + 0.01 * span, hi - 0.01 * span, 150, windows)
    trb = trace_S12(ta, tb, iau, ibu, s_grid=ss, name="S12bar")
    assert _max_rel_err(trb) <= 1e-5


def test_direction_requirements(ground_pair, critical_pair_t14):
    ta, _ = ground_pair
    inv_down = branch_inverse(ta, 1, "down")
    with pytest.raises(DomainError):
        trace_functional(ta, inv_down, "Pbar", s_grid=[2.0])
    with pytest.raises(DomainError):
        trace_functional(ta, inv_down, "Tbar", s_grid=[2.0])
    with pytest.raises(DomainError):
        trace_functional(ta, inv_down, "nosuch", s_grid=[2.0])
    t1, _ = critical_pair_t14
    inv_up = branch_inverse(t1, 2, "up")
    with pytest.raises(DomainError):
        trace_functional(t1, inv_up, "T", s_grid=[-1.2])


# -- the comparison chain near a transition --------------------------------------


def test_What_ordering_near_transition(critical_pair_t14, cubic):
    # two shots bracketing nothing: both just below the second transition,
    # alpha1 < alpha2; the lower one stays inside on the way down
    t1, t2 = critical_pair_t14
    beta = cubic.beta
    m1 = extract_markers(t1)
    m2 = extract_markers(t2)
    u_min1 = t1.eval(m1.T[0])[0]
    u_min2 = t2.eval(m2.T[0])[0]
    assert u_min1 < -beta and u_min2 < -beta
    assert u_min1 > u_min2  # deeper start digs deeper
    inv1 = branch_inverse(t1, 1, "down")
    inv2 = branch_inverse(t2, 1, "down")
    rep = intersection_scan(t1, t2, (1e-6, 2.0))
    assert rep.first is not None
    U = rep.first[1]
    assert U > beta
    ss = np.linspace(-beta, U - 1e-9, 100)
    w1 = np.array([eval_W_family(t1, inv1, float(s), "What").value for s in ss])
    w2 = np.array([eval_W_family(t2, inv2, float(s), "What").value for s in ss])
    r1 = np.array([inv1.r_of(float(s)) for s in ss])
    r2 = np.array([inv2.r_of(float(s)) for s in ss])
    assert np.all(w1 < w2)
    assert np.all(r1 > r2)


# -- monitors --------------------------------------------------------------------


def test_monitor_P_clean_on_claim_range(ground_pair, cubic):
    ta, _ = ground_pair
    inv = branch_inverse(ta, 1, "down")
    ss = np.linspace(cubic.beta, inv.s_range[1] - 1e-3, 200)
    tr = trace_functional(ta, inv, "P", s_grid=ss)
    rep = monotonicity_monitor(tr, "nonneg")
    assert rep.clean
    assert rep.n_violations == 0
    assert rep.n_checked == 200
    # P itself stays nonpositive there, anchored at P(alpha)=0
    assert np.nanmax(tr.value) <= 1e-8


def test_monitor_Pbar_clean_up_branch(critical_pair_t14, cubic):
    t1, _ = critical_pair_t14
    inv = branch_inverse(t1, 2, "up")
    ss = np.linspace(inv.s_range[0] + 1e-3, -cubic.beta, 120)
    tr = trace_functional(t1, inv, "Pbar", s_grid=ss)
    rep = monotonicity_monitor(tr, "nonpos", (inv.s_range[0], -cubic.beta))
    assert rep.clean
    assert rep.worst_value <= 0.0


def test_monitor_flags_violations(ground_pair, cubic):
    # dT/ds changes sign between b and alpha, so either claim must fail
    ta, _ = ground_pair
    inv = branch_inverse(ta, 1, "down")
    ss = np.linspace(cubic.b + 0.02, inv.s_range[1] - 1e-3, 200)
    tr = trace_functional(ta, inv, "T", s_grid=ss)
    up = monotonicity_monitor(tr, "nonneg")
    dn = monotonicity_monitor(tr, "nonpos")
    assert not up.clean and not dn.clean
    assert up.n_violations > 0 and dn.n_violations > 0
    assert up.worst_value < 0.0 < dn.worst_value
    assert ss[0] <= up.worst_s <= ss[-1]
    with pytest.raises(DomainError):
        monotonicity_monitor(tr, "increasing")


def test_monitor_empty_range_not_applied(ground_pair, cubic):
    ta, _ = ground_pair
    inv = branch_inverse(ta, 1, "down")
    ss = np.linspace(cubic.b + 0.02, inv.s_range[1] - 1e-3, 50)
    tr = trace_functional(ta, inv, "T", s_grid=ss)
    rep = monotonicity_monitor(tr, "nonneg", (0.0, 0.5))
    assert rep.n_checked == 0
    assert rep.clean
    d = rep.to_dict()
    assert d["s_range"] == [0.0, 0.5]


def test_default_s_grid_respects_windows(ground_pair, cubic):
    ta, _ = ground_pair
    inv = branch_inverse(ta, 1, "down")
    ss = default_s_grid(inv, cubic, n=256)
    lo, hi = inv.s_range
    assert np.all((ss > lo) & (ss < hi))
    win = 2.0 * cubic.exclusion_halfwidth()
    for z in (0.0, cubic.b, -cubic.b):
        assert np.all(np.abs(ss - z) > win)
    assert np.all(np.diff(ss) > 0)


def test_trace_rows_shape(ground_pair):
    ta, _ = ground_pair
    inv = branch_inverse(ta, 1, "down")
    tr = trace_functional(ta, inv, "I", s_grid=np.linspace(0.5, 4.0, 16))
    rows = list(tr.rows())
    assert len(rows) == 16
    assert all(len(r) == 4 for r in rows)
    assert rows[3][0] == tr.s[3] and rows[3][1] == tr.value[3]
