"""Weight families: closed forms, dual quadrature routes, limit constants."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from boundstates import (
    ConfigError,
    DomainError,
    PiecewiseLogWeight,
    PowerSumWeight,
    PowerWeight,
    QuadratureWeight,
    TabulatedWeight,
    weight_constants,
)
from boundstates.weights import limit_by_extrapolation

RS_1000 = np.geomspace(1e-3, 1e3, 1000)


@pytest.mark.parametrize("theta", [1.5, 2.0, 3.0])
def test_power_closed_forms(theta):
    w = PowerWeight(theta)
    assert np.max(np.abs(w.H(RS_1000) - 1.0 / (theta + 1.0))) <= 1e-9
    assert np.max(np.abs(w.h_prime(RS_1000) - 1.0 / (theta - 1.0))) <= 1e-9
    assert np.max(np.abs(w.G(RS_1000) - (theta - 1.0) / 2.0)) <= 1e-9


@pytest.mark.parametrize("theta", [1.5, 2.0, 3.0])
def test_power_algebraic_relations(theta):
    w = PowerWeight(theta)
    rs = np.geomspace(0.01, 50.0, 60)
    # h = q * integral of 1/q over (r, inf); h' = (q'/q) h - 1
    assert np.allclose(w.h(rs), rs / (theta - 1.0), rtol=1e-12)
    hp = w.q_prime(rs) / w.q(rs) * w.h(rs) - 1.0
    assert np.allclose(hp, w.h_prime(rs), rtol=0, atol=1e-12)
    assert np.allclose(w.int_Q_over_q(rs), rs * rs / (2.0 * (theta + 1.0)),
                       rtol=1e-12)


def test_power_vs_quadrature_route():
    th = 2.3
    w = PowerWeight(th)
    wq = QuadratureWeight(lambda r: r**th, lambda r: th * r ** (th - 1.0))
    rs = np.array([0.05, 0.3, 1.0, 4.2, 19.0])
    for name in ("Q", "h", "H", "G", "int_h"):
        a = np.asarray(getattr(w, name)(rs), dtype=float)
        b = np.asarray(getattr(wq, name)(rs), dtype=float)
        assert np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a))) <= 1e-8, name


def test_power_sum_against_direct_quadrature():
    th, c = 1.5, 1.0
    w = PowerSumWeight(th, c)
    q = lambda t: t**th * (t + c)
    for r in (0.3, 1.0, 5.7, 42.0):
        Q_ref = quad(q, 0.0, r, limit=400)[0]
        assert abs(float(w.Q(r)) - Q_ref) <= 1e-9 * max(1.0, Q_ref)
        tail_ref = quad(lambda t: 1.0 / q(t), r, np.inf, limit=400)[0]
        assert abs(float(w.tail(r)) - tail_ref) <= 1e-8 * tail_ref
        iQq_ref = quad(lambda t: quad(q, 0.0, t, limit=400)[0] / q(t), 0.0, r,
                       limit=400)[0]
        assert abs(float(w.int_Q_over_q(r)) - iQq_ref) <= 1e-7 * max(1.0, iQq_ref)
        ih = float(w.Q(r)) * float(w.tail(r)) + float(w.int_Q_over_q(r))
        assert abs(float(w.int_h(r)) - ih) <= 1e-9 * max(1.0, ih)


def test_power_sum_series_tail_matches_quadrature_handover():
    w = PowerSumWeight(1.5, 1.0)
    # the evaluation strategy switches at r = 2c; both sides must agree
    for r in (1.9, 2.0, 2.1, 3.0):
        ref = quad(lambda t: 1.0 / (t**1.5 * (t + 1.0)), r, np.inf, limit=400)[0]
        assert abs(float(w.tail(r)) - ref) <= 1e-10 * ref


@pytest.mark.parametrize(
    "theta,c,expect",
    [(2.0, 1.0, (0.25, 0.5, 1.0)), (1.5, 1.0, (1.0 / 3.5, 2.0 / 3.0, 0.75))],
)
def test_power_sum_constants(theta, c, expect):
    consts = weight_constants(PowerSumWeight(theta, c))
    H_inf, ell, G_bar = expect
    assert abs(consts.H_inf - H_inf) <= 1e-7
    assert abs(consts.ell_inf - ell) <= 1e-7
    assert abs(consts.G_bar - G_bar) <= 1e-6
    assert consts.identity_residual <= 1e-6


def test_limit_identity_relates_H_inf_and_ell_inf():
    for w in (PowerSumWeight(2.0, 1.0), PowerWeight(2.0), PiecewiseLogWeight(2.0)):
        consts = weight_constants(w)
        rhs = consts.ell_inf / (1.0 + 2.0 * consts.ell_inf)
        assert abs(consts.H_inf - rhs) <= 1e-6


def test_piecewise_log_constants():
    w = PiecewiseLogWeight(2.0)
    assert abs(w.mu - 2.5) <= 1e-12  # r0 = e^2 forces mu = theta + 1/2
    consts = weight_constants(w)
    assert abs((1.0 + 2.0 * consts.ell_inf) - 7.0 / 3.0) <= 1e-4
    assert abs(consts.G_bar - 0.75) <= 1e-4
    assert consts.identity_residual <= 1e-6


def test_piecewise_log_c1_matching():
    w = PiecewiseLogWeight(2.0)
    r0 = w.r0
    eps = 1e-9 * r0
    assert abs(float(w.q(r0 - eps)) - float(w.q(r0 + eps))) <= 1e-6 * float(w.q(r0))
    assert abs(float(w.q_prime(r0 - eps)) - float(w.q_prime(r0 + eps))) <= 1e-6 * float(
        w.q_prime(r0)
    )
    with pytest.raises(ConfigError):
        PiecewiseLogWeight(2.0, mu=2.8)  # inconsistent with r0 = e^2
    with pytest.raises(ConfigError):
        PiecewiseLogWeight(2.0, r0=2.0)


def test_piecewise_log_tail_vs_direct_quadrature():
    w = PiecewiseLogWeight(2.0)
    r0, th, mu = w.r0, w.theta, w.mu
    A = math.log(r0) / math.e

    def q(t):
        return t**th if t < r0 else A * t**mu / math.log(t)

    for r in (3.0, 12.0):
        ref = quad(lambda t: 1.0 / q(t), r, np.inf, limit=600)[0]
        got = float(w.tail(r))
        assert abs(got - ref) <= 1e-7 * ref
        assert abs(float(w.h(r)) - float(w.q(r)) * ref) <= 1e-6 * float(w.h(r))


def test_grid_table_matches_pointwise():
    w = PowerSumWeight(2.0, 0.7)
    rs = np.geomspace(0.01, 100.0, 200)
    table = w.grid_table(rs)
    sub = slice(3, None, 17)
    for name in ("q", "Q", "H", "h", "h_prime", "G", "int_h"):
        ref = np.asarray(getattr(w, name)(rs[sub]), dtype=float)
        got = table[name][sub]
        assert np.max(np.abs(got - ref) / np.maximum(1.0, np.abs(ref))) <= 5e-8, name


def test_tabulated_weight_round_trip_and_range():
    base = PowerWeight(2.0)
    rs = np.geomspace(1e-3, 1e3, 400)
    w = TabulatedWeight(rs, base.q(rs), base.q_prime(rs))
    probe = np.geomspace(0.01, 100.0, 40)
    assert np.max(np.abs(w.q(probe) - base.q(probe)) / base.q(probe)) <= 1e-6
    assert np.max(np.abs(np.asarray(w.h(probe)) - np.asarray(base.h(probe)))
                  / np.asarray(base.h(probe))) <= 1e-3
    assert np.max(np.abs(np.asarray(w.H(probe)) - 1.0 / 3.0)) <= 1e-3
    with pytest.raises(DomainError):
        w.values(1e-5)


def test_tabulated_weight_rejects_thin_or_unsorted_tables():
    rs = np.geomspace(0.1, 10.0, 50)
    q = rs**2
    qp = 2.0 * rs
    with pytest.raises(ConfigError):
        TabulatedWeight(rs[:5], q[:5], qp[:5])
    bad = rs.copy()
    bad[10] = bad[9]
    with pytest.raises(ConfigError):
        TabulatedWeight(bad, q, qp)
    # tail exponent <= 1 makes 1/q non-integrable at infinity
    flat = TabulatedWeight(rs, rs**0.8, 0.8 * rs ** (-0.2))
    from boundstates import TailNotIntegrableError

    with pytest.raises(TailNotIntegrableError):
        flat.tail(1.0)


def test_limit_by_extrapolation_polynomial_and_noise():
    xs = 1.0 / (8.0 * 2.0 ** np.arange(12.0))[::-1]
    xs = xs[::-1]  # largest first
    vs = 0.7 + 1.3 * xs - 0.4 * xs * xs
    lim, err, conv = limit_by_extrapolation(xs, vs)
    assert conv and abs(lim - 0.7) <= 1e-9
    rng = np.random.default_rng(7)
    noisy = 0.7 + 0.3 * rng.standard_normal(len(xs))
    lim, err, conv = limit_by_extrapolation(xs, noisy)
    assert not conv


def test_weight_validation_errors_name_the_field():
    with pytest.raises(ConfigError, match="weight.theta"):
        PowerWeight(1.0)
    with pytest.raises(ConfigError, match="weight.theta"):
        PowerSumWeight(0.9, 1.0)
    with pytest.raises(ConfigError, match="weight.c"):
        PowerSumWeight(2.0, -1.0)
    with pytest.raises(DomainError):
        PowerWeight(2.0).values(0.0)
    with pytest.raises(ConfigError):
        PowerWeight(2.0).grid_table(np.array([1.0, 0.5, 2.0]))


@settings(max_examples=20, deadline=None)
@given(
    theta=st.floats(min_value=1.2, max_value=3.5),
    c=st.floats(min_value=0.2, max_value=3.0),
)
def test_power_sum_limit_identity_property(theta, c):
    consts = weight_constants(PowerSumWeight(theta, c))
    assert abs(consts.H_inf - 1.0 / (theta + 2.0)) <= 1e-6
    assert abs(consts.ell_inf - 1.0 / theta) <= 1e-6
    rhs = consts.ell_inf / (1.0 + 2.0 * consts.ell_inf)
    assert abs(consts.H_inf - rhs) <= 1e-6
