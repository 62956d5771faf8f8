"""Shooting integrator: series start, events, energy decay, markers, tails."""

from __future__ import annotations

import math

import numpy as np
import pytest

import oracle_rk4 as orc
from boundstates import (
    ConfigError,
    CustomNonlinearity,
    DomainError,
    PowerMinusLinear,
    PowerWeight,
    Problem,
    asymptotic_tail_test,
    extract_markers,
    integrate,
    series_start,
)


def test_series_start_slope(prob_t2):
    # v = -f(alpha) Q/q = -f(alpha) r/(theta+1) near the origin
    alpha = 3.0
    f_a = alpha**3 - alpha
    for r in (1e-8, 1e-6, 1e-4):
        u0, v0 = series_start(prob_t2, alpha, r)
        assert v0 == pytest.approx(-f_a * r / 3.0, rel=1e-6)
        assert u0 == pytest.approx(alpha - f_a * r * r / 6.0, rel=1e-12)


def test_trajectory_matches_rk4_oracle(prob_t2):
    traj = integrate(prob_t2, 3.0, r_max=6.0)
    ts = [0.5, 1.2, 2.5, 4.0, 5.5]
    us, vs = orc.rk4_values(2.0, 3.0, 3.0, ts, h=5e-4)
    for t, u_ref, v_ref in zip(ts, us, vs):
        assert traj.u(t) == pytest.approx(u_ref, abs=1e-8)
        assert traj.uprime(t) == pytest.approx(v_ref, abs=1e-8)


def test_oracle_energy_agrees(prob_t2):
    traj = integrate(prob_t2, 3.0, r_max=6.0)
    us, vs = orc.rk4_values(2.0, 3.0, 3.0, [2.0], h=5e-4)
    I_ref = orc.energy(us[0], vs[0], 3.0)
    assert traj.energy(2.0) == pytest.approx(I_ref, abs=1e-9)


def test_self_convergence_under_rtol(prob_t14):
    a = integrate(prob_t14, 6.0, r_max=8.0, rtol=1e-8)
    b = integrate(prob_t14, 6.0, r_max=8.0, rtol=1e-11)
    ts = np.linspace(0.5, 7.5, 15)
    err = max(abs(a.u(t) - b.u(t)) for t in ts)
    assert err <= 1e-6


def test_energy_never_increases_random_instances():
    rng = np.random.default_rng(42)
    nl = PowerMinusLinear(3.0)
    for _ in range(25):
        theta = float(rng.uniform(1.3, 3.5))
        alpha = float(rng.uniform(0.2, 8.0))
        prob = Problem(PowerWeight(theta), nl)
        traj = integrate(prob, alpha, r_max=25.0, rtol=1e-9)
        assert traj.max_energy_increase <= 10.0 * 1e-9 * max(1.0, abs(traj.I0))


def test_energy_decay_rate_identity(prob_t2):
    # I' = -2 (q'/q) u'^2, so I(r2) - I(r1) matches the quadrature of the loss
    from scipy.integrate import quad

    traj = integrate(prob_t2, 3.0, r_max=5.0)
    r1, r2 = 0.8, 3.2
    loss = quad(lambda r: -2.0 * (2.0 / r) * traj.uprime(r) ** 2, r1, r2,
                limit=300)[0]
    assert traj.energy(r2) - traj.energy(r1) == pytest.approx(loss, abs=1e-8)


def test_markers_alternate(prob_t14):
    traj = integrate(prob_t14, 8.0, r_max=40.0)
    mk = extract_markers(traj, k_max=4)
    assert len(mk.Z) >= 2
    # zeros and extrema interlace: Z_1 < T_1 < Z_2 < T_2 < ...
    for i in range(len(mk.T)):
        assert mk.Z[i] < mk.T[i]
        if i + 1 < len(mk.Z):
            assert mk.T[i] < mk.Z[i + 1]
    # slopes at consecutive zeros alternate in sign
    for s1, s2 in zip(mk.slopes, mk.slopes[1:]):
        assert s1 * s2 < 0.0
    # extremum values alternate minimum, maximum, ...
    for i, val in enumerate(mk.extremum_values):
        assert (val < 0.0) == (i % 2 == 0)


def test_event_records_present(prob_t14):
    traj = integrate(prob_t14, 8.0, r_max=40.0)
    kinds = {e.kind for e in traj.events}
    assert "u_zero" in kinds and "uprime_zero" in kinds
    zs = sorted(e.r for e in traj.events if e.kind == "u_zero")
    for e in traj.events:
        if e.kind == "u_zero":
            assert abs(traj.u(e.r)) <= 1e-8
            assert abs(e.value_slope - traj.uprime(e.r)) <= 1e-8


def test_zero_cap_stops_integration(prob_t14):
    traj = integrate(prob_t14, 8.0, r_max=40.0, k_cap=1)
    assert traj.stop_reason == "zero_cap"
    crossings = [e for e in traj.events if e.kind == "u_zero"]
    assert len(crossings) == 1
    assert traj.r_end == pytest.approx(crossings[0].r, rel=1e-9)


def test_stop_energy_terminates_on_negative_energy(prob_t2):
    # strictly inside (b, beta): I(0) = 2F(alpha) < 0 already
    traj = integrate(prob_t2, 1.2, stop_energy=True)
    assert traj.stop_reason == "negative_energy"
    assert traj.energy(traj.r_end) < 0.0


def test_alpha_validation(prob_t2):
    with pytest.raises((ConfigError, DomainError)):
        integrate(prob_t2, 0.0)
    with pytest.raises((ConfigError, DomainError)):
        integrate(prob_t2, -1.0)
    nl = CustomNonlinearity(lambda s: s**3 - s, lambda s: 3.0 * s * s - 1.0,
                            c=2.0)
    prob = Problem(PowerWeight(2.0), nl)
    with pytest.raises((ConfigError, DomainError)):
        integrate(prob, 2.5)


def test_domain_error_beyond_span(prob_t2):
    traj = integrate(prob_t2, 3.0, r_max=4.0)
    with pytest.raises(DomainError):
        traj.u(4.5)


def test_constant_solution_at_level_b(prob_t2):
    traj = integrate(prob_t2, 1.0, r_max=30.0)
    rs = np.linspace(0.5, 29.0, 12)
    assert max(abs(traj.u(r) - 1.0) for r in rs) <= 1e-8
    mk = extract_markers(traj, k_max=2)
    assert len(mk.Z) == 0


def test_tail_test_yes_and_no_cases(prob_t2):
    # the constant solution at the level b converges trivially
    traj = integrate(prob_t2, 1.0, r_max=40.0)
    tail = asymptotic_tail_test(traj)
    assert tail.converged
    assert tail.matched_zero == pytest.approx(1.0, abs=1e-9)
    assert abs(tail.residual_f) <= 1e-9
    # a small start grows toward b and keeps oscillating around it
    # (f'(b) > 0 makes the approach underdamped), so no monotone tail
    traj = integrate(prob_t2, 0.05, r_max=60.0)
    tail = asymptotic_tail_test(traj)
    assert not tail.converged


def test_tail_test_rejects_unfinished_run(prob_t2):
    traj = integrate(prob_t2, 4.0, r_max=2.0)
    tail = asymptotic_tail_test(traj)
    assert not tail.converged


def test_double_zero_detection(prob_t2, bracket_t2):
    # at the ground-state level to 1e-12 the trajectory enters the hard
    # dead zone around (u, u') = (0, 0) and is zero-extended
    traj = integrate(prob_t2, bracket_t2.alpha_star, stop_energy=True, k_cap=3)
    if traj.stop_reason == "double_zero":
        assert traj.zero_extension_from is not None
        r_probe = traj.zero_extension_from * 1.5
        assert traj.u(r_probe) == 0.0 and traj.uprime(r_probe) == 0.0
        tail = asymptotic_tail_test(traj)
        assert tail.converged and tail.matched_zero == 0.0
    else:
        # bisection endpoint fell just off the dead-zone ball; the stop is
        # then one of the decided exits, never the horizon
        assert traj.stop_reason in ("zero_cap", "negative_energy")


def test_escape_guard_raises():
    from boundstates import IntegrationToleranceError

    # a runaway forcing term drives u past the a-priori bound; the guard
    # must flag the run rather than hand back a trajectory
    runaway = CustomNonlinearity(lambda s: -s, lambda s: -1.0,
                                 lambda s: -0.5 * s * s, b=1.0, beta=1.4)
    prob = Problem(PowerWeight(2.0), runaway)
    with pytest.raises(IntegrationToleranceError):
        integrate(prob, 2.0, r_max=50.0, energy_guard=False)


def test_markers_of_ground_state(prob_t2, bracket_t2):
    alpha = bracket_t2.alpha_star + 1e-4
    traj = integrate(prob_t2, alpha, k_cap=1)
    mk = extract_markers(traj, k_max=1)
    assert len(mk.Z) == 1
    z = mk.Z[0]
    us, _ = orc.rk4_values(2.0, 3.0, alpha, [z], h=5e-4)
    assert abs(us[0]) <= 1e-6
    z_ref = orc.first_zero(2.0, 3.0, alpha, h=5e-4)
    assert z == pytest.approx(z_ref, abs=1e-6)
