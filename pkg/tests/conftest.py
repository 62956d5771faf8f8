"""Shared fixtures: problem instances and cached expensive brackets."""

from __future__ import annotations

import numpy as np
import pytest

from boundstates import (
    CustomNonlinearity,
    PowerMinusLinear,
    PowerWeight,
    Problem,
    find_kth_bound_state,
)


@pytest.fixture(scope="session")
def cubic():
    return PowerMinusLinear(3.0)


@pytest.fixture(scope="session")
def prob_t2(cubic):
    return Problem(PowerWeight(2.0), cubic)


@pytest.fixture(scope="session")
def prob_t14(cubic):
    return Problem(PowerWeight(1.4), cubic)


@pytest.fixture(scope="session")
def prob_t12(cubic):
    return Problem(PowerWeight(1.2), cubic)


@pytest.fixture(scope="session")
def bracket_t2(prob_t2):
    # tight bracket reused by classification, functional and variation tests
    return find_kth_bound_state(prob_t2, 1, 2.0, 10.0, tol=1e-12)


@pytest.fixture(scope="session")
def bracket_t14_k2(prob_t14):
    return find_kth_bound_state(prob_t14, 2, 4.5, 5.5, tol=1e-10)


@pytest.fixture(scope="session")
def bracket_t12(prob_t12):
    return find_kth_bound_state(prob_t12, 1, 2.0, 10.0, tol=1e-10)


def _saturating_f(s):
    a = abs(s)
    if a <= 1.0:
        return s**3 - s
    return float(np.sign(s) * (1.0 - np.exp(-2.0 * (a - 1.0))))


def _saturating_fp(s):
    a = abs(s)
    if a <= 1.0:
        return 3.0 * s**2 - 1.0
    return float(2.0 * np.exp(-2.0 * (a - 1.0)))


def _saturating_F(s):
    a = abs(s)
    if a <= 1.0:
        return s**4 / 4.0 - s**2 / 2.0
    return -0.25 + (a - 1.0) + (np.exp(-2.0 * (a - 1.0)) - 1.0) / 2.0


@pytest.fixture(scope="session")
def saturating_nonlin():
    """Odd nonlinearity that is concave beyond its positive zero, so the
    tangent-line bound f(s) >= f'(s)(s - b) holds with room to spare."""
    return CustomNonlinearity(_saturating_f, _saturating_fp, _saturating_F,
                              label="saturating")
