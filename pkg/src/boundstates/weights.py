"""Radial weight families and their derived quantities.

A weight is a function q(r) > 0 on (0, inf) with q(0) = 0 and q' > 0.  The
solver and the hypothesis audit need a cluster of derived quantities:

    Q(r)   = integral of q over (0, r)
    H(r)   = (Q/q)'(r), computed algebraically as 1 - Q q' / q^2
    h(r)   = q(r) * integral of 1/q over (r, inf)
    h'(r)  = derivative of h; identically h q'/q - 1
    IH(r)  = integral of h over (0, r)
    G(r)   = (q'/(q h)) * IH(r) - 1/2
    Gt(r)  = 2 G h / sqrt(IH)   (the combination driving (q6)/(q7))

Built-in families carry closed forms; anything missing falls back to
quadrature.  A quadrature-only wrapper exists so the closed forms can be
cross-checked against an independent route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate as _quadpack
from scipy.special import expi

from .errors import ConfigError, DomainError, TailNotIntegrableError

__all__ = [
    "Weight",
    "PowerWeight",
    "PowerSumWeight",
    "PiecewiseLogWeight",
    "TabulatedWeight",
    "QuadratureWeight",
    "WeightValues",
    "WeightConstants",
    "eval_weight",
    "weight_constants",
    "default_audit_grid",
    "limit_by_extrapolation",
]

_E = math.e
_QUAD_OPTS = dict(epsabs=1e-14, epsrel=1e-12, limit=200)

# Nodes and weights of 8-point Gauss-Legendre on [0, 1], used for the
# vectorized per-interval integrals of the grid calculator.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = (_GL_X + 1.0) / 2.0
_GL_W = _GL_W / 2.0


def _li(x_log: float) -> float:
    """Logarithmic integral li(exp(x_log)), through expi to keep the
    argument in log scale."""
    return float(expi(x_log))


def _quad(fn, lo, hi) -> float:
    val, _err = _quadpack.quad(fn, lo, hi, **_QUAD_OPTS)
    if not math.isfinite(val):
        raise DomainError(f"quadrature over ({lo}, {hi}) returned {val}")
    return val


@dataclass(frozen=True)
class WeightValues:
    """All derived weight quantities at a single radius."""

    r: float
    q: float
    q_prime: float
    Q: float
    H: float
    h: float
    h_prime: float
    int_h: float
    G: float
    Gtilde: float


@dataclass
class WeightConstants:
    """Limit constants of a weight, with extrapolation diagnostics."""

    H_inf: float
    ell_inf: float
    G_bar: float
    identity_residual: float  # |H_inf - ell_inf / (1 + 2 ell_inf)|
    C_q7: float | None = None
    a_q7: float | None = None
    diagnostics: dict = field(default_factory=dict)


class Weight:
    """Base weight.  Subclasses override q/q_prime plus whatever closed
    forms they have; the rest falls back to quadrature."""

    family = "abstract"

    # -- primitives ---------------------------------------------------------

    def q(self, r):
        raise NotImplementedError

    def q_prime(self, r):
        raise NotImplementedError

    def logderiv_fn(self) -> Callable[[float], float]:
        """Fast scalar q'/q for the ODE right-hand side."""
        qp, q = self.q_prime, self.q
        return lambda r: float(qp(r)) / float(q(r))

    # -- derived, quadrature fallbacks ---------------------------------------

    def Q(self, r):
        return self._map_scalar(self._Q_quad, r)

    def tail(self, r):
        """Integral of 1/q over (r, inf)."""
        return self._map_scalar(self._tail_quad, r)

    def h(self, r):
        return np.asarray(self.q(r), dtype=float) * np.asarray(self.tail(r), dtype=float)

    def h_prime(self, r):
        return (
            np.asarray(self.q_prime(r), dtype=float)
            * np.asarray(self.tail(r), dtype=float)
            - 1.0
        )

    def int_h(self, r):
        return self._map_scalar(self._int_h_quad, r)

    def int_Q_over_q(self, r):
        """Integral of Q/q over (0, r); needed by the series start."""
        return self._map_scalar(
            lambda x: _quad(lambda t: self._Q_quad(t) / float(self.q(t)), 0.0, x), r
        )

    # -- derived, algebraic ---------------------------------------------------

    def H(self, r):
        q = np.asarray(self.q(r), dtype=float)
        return 1.0 - np.asarray(self.Q(r), dtype=float) * np.asarray(
            self.q_prime(r), dtype=float
        ) / (q * q)

    def G(self, r):
        q = np.asarray(self.q(r), dtype=float)
        return (
            np.asarray(self.q_prime(r), dtype=float)
            / (q * np.asarray(self.h(r), dtype=float))
        ) * np.asarray(self.int_h(r), dtype=float) - 0.5

    def Gtilde(self, r):
        ih = np.asarray(self.int_h(r), dtype=float)
        return (
            2.0
            * np.asarray(self.G(r), dtype=float)
            * np.asarray(self.h(r), dtype=float)
            / np.sqrt(ih)
        )

    def values(self, r: float) -> WeightValues:
        if r <= 0.0:
            raise DomainError(f"weight quantities need r > 0, got r={r}")
        return WeightValues(
            r=float(r),
            q=float(self.q(r)),
            q_prime=float(self.q_prime(r)),
            Q=float(self.Q(r)),
            H=float(self.H(r)),
            h=float(self.h(r)),
            h_prime=float(self.h_prime(r)),
            int_h=float(self.int_h(r)),
            G=float(self.G(r)),
            Gtilde=float(self.Gtilde(r)),
        )

    def grid_table(self, rs) -> dict:
        """All derived quantities on an increasing grid, vectorized.

        Families with closed forms land on those; otherwise a piecewise
        interpolation of q in log-log scale carries per-interval
        Gauss-Legendre integrals, with the infinite tail of 1/q taken by
        adaptive quadrature at the last grid point.
        """
        rs = np.asarray(rs, dtype=float)
        if rs.ndim != 1 or len(rs) < 2 or np.any(np.diff(rs) <= 0.0):
            raise ConfigError("grid_table needs a strictly increasing 1-d grid")
        q = np.asarray(self.q(rs), dtype=float)
        qp = np.asarray(self.q_prime(rs), dtype=float)
        Q = self._Q_grid(rs)
        tail = self._tail_grid(rs)
        ih = self._int_h_grid(rs, Q, tail)
        h = q * tail
        hp = qp * tail - 1.0
        H = self._H_grid(rs, q, qp, Q)
        G = self._G_grid(rs, q, qp, h, ih)
        Gt = 2.0 * G * h / np.sqrt(ih)
        return {
            "r": rs, "q": q, "q_prime": qp, "Q": Q, "H": H, "h": h,
            "h_prime": hp, "int_h": ih, "G": G, "Gtilde": Gt, "tail": tail,
        }

    # -- grid helpers (subclasses override when closed forms exist) ----------

    def _subnodes(self, rs):
        """Gauss-Legendre subnodes of every grid interval plus q there,
        via monotone interpolation of log q against log r."""
        from scipy.interpolate import PchipInterpolator

        ip = PchipInterpolator(np.log(rs), np.log(np.asarray(self.q(rs), dtype=float)))
        t = rs[:-1, None] + np.diff(rs)[:, None] * _GL_X[None, :]
        qt = np.exp(ip(np.log(t)))
        return t, qt

    def _Q_grid(self, rs):
        t, qt = self._subnodes(rs)
        inc = np.diff(rs) * (qt @ _GL_W)
        head = self._Q_quad(rs[0])
        return head + np.concatenate(([0.0], np.cumsum(inc)))

    def _tail_grid(self, rs):
        t, qt = self._subnodes(rs)
        inc = np.diff(rs) * ((1.0 / qt) @ _GL_W)
        last = self._tail_quad(rs[-1])
        back = np.concatenate(([0.0], np.cumsum(inc[::-1])))[::-1]
        return last + back

    def _int_h_grid(self, rs, Q, tail):
        # integral of h over (0, r) = Q tail + integral of Q/q over (0, r)
        t, qt = self._subnodes(rs)
        Qt = np.empty_like(qt)
        run = self._Q_quad(rs[0])
        w_run = np.diff(rs)[:, None] * _GL_W[None, :] * qt
        for i in range(qt.shape[0]):
            # Q at subnodes of interval i: cumulative GL inside the interval
            Qt[i] = run + np.cumsum(w_run[i]) - w_run[i] / 2.0
            run += w_run[i].sum()
        inc = np.diff(rs) * ((Qt / qt) @ _GL_W)
        head = _quad(lambda x: self._Q_quad(x) / float(self.q(x)), 0.0, rs[0])
        intQq = head + np.concatenate(([0.0], np.cumsum(inc)))
        return Q * tail + intQq

    def _H_grid(self, rs, q, qp, Q):
        return 1.0 - Q * qp / (q * q)

    def _G_grid(self, rs, q, qp, h, ih):
        return (qp / (q * h)) * ih - 0.5

    def describe(self) -> dict:
        return {"family": self.family}

    # -- internals ------------------------------------------------------------

    def _Q_quad(self, r: float) -> float:
        return _quad(lambda t: float(self.q(t)), 0.0, r)

    def _tail_quad(self, r: float) -> float:
        inv = lambda t: 1.0 / float(self.q(t))
        val, err = _quadpack.quad(inv, r, np.inf, **_QUAD_OPTS)
        if math.isfinite(val) and err <= max(1e-6 * abs(val), 1e-10):
            return val
        # Settle convergence on a doubling sequence before failing.
        hi = 64.0 * max(r, 1.0)
        total = _quad(inv, r, hi)
        for _ in range(14):
            piece = _quad(inv, hi, 2.0 * hi)
            total += piece
            hi *= 2.0
            if piece < 1e-12 * max(1.0, abs(total)):
                return total
        raise TailNotIntegrableError(
            f"{self.family}: integral of 1/q over ({r}, inf) does not settle; "
            "(q4) integrability fails"
        )

    def _int_h_quad(self, r: float) -> float:
        # by parts: integral of h over (0, r) = Q(r) tail(r) + integral Q/q
        return float(self.Q(r)) * self._tail_quad(r) + float(self.int_Q_over_q(r))

    @staticmethod
    def _map_scalar(fn, r):
        arr = np.asarray(r, dtype=float)
        if arr.ndim == 0:
            return fn(float(arr))
        return np.array([fn(float(x)) for x in arr])


class PowerWeight(Weight):
    """q(r) = r^theta with theta > 1.  Everything is in closed form."""

    family = "power"

    def __init__(self, theta: float):
        if not theta > 1.0:
            raise ConfigError(f"weight.theta: power family needs theta > 1, got {theta}")
        self.theta = float(theta)

    def q(self, r):
        return np.asarray(r, dtype=float) ** self.theta

    def q_prime(self, r):
        return self.theta * np.asarray(r, dtype=float) ** (self.theta - 1.0)

    def logderiv_fn(self):
        th = self.theta
        return lambda r: th / r

    def Q(self, r):
        return np.asarray(r, dtype=float) ** (self.theta + 1.0) / (self.theta + 1.0)

    def tail(self, r):
        return np.asarray(r, dtype=float) ** (1.0 - self.theta) / (self.theta - 1.0)

    def h(self, r):
        return np.asarray(r, dtype=float) / (self.theta - 1.0)

    def h_prime(self, r):
        return np.full_like(np.asarray(r, dtype=float), 1.0 / (self.theta - 1.0))

    def int_h(self, r):
        rr = np.asarray(r, dtype=float)
        return rr * rr / (2.0 * (self.theta - 1.0))

    def int_Q_over_q(self, r):
        rr = np.asarray(r, dtype=float)
        return rr * rr / (2.0 * (self.theta + 1.0))

    def H(self, r):
        return np.full_like(np.asarray(r, dtype=float), 1.0 / (self.theta + 1.0))

    def G(self, r):
        return np.full_like(np.asarray(r, dtype=float), (self.theta - 1.0) / 2.0)

    def _Q_grid(self, rs):
        return self.Q(rs)

    def _tail_grid(self, rs):
        return self.tail(rs)

    def _int_h_grid(self, rs, Q, tail):
        return self.int_h(rs)

    def _H_grid(self, rs, q, qp, Q):
        return self.H(rs)

    def _G_grid(self, rs, q, qp, h, ih):
        return self.G(rs)

    def describe(self) -> dict:
        return {"family": self.family, "theta": self.theta}


class PowerSumWeight(Weight):
    """q(r) = r^(theta+1) + c r^theta with theta > 1, c > 0."""

    family = "power_sum"

    def __init__(self, theta: float, c: float):
        if not theta >= 1.0:
            raise ConfigError(f"weight.theta: power_sum family needs theta >= 1, got {theta}")
        if not c > 0.0:
            raise ConfigError(f"weight.c: power_sum family needs c > 0, got {c}")
        self.theta = float(theta)
        self.c = float(c)

    def q(self, r):
        rr = np.asarray(r, dtype=float)
        return rr ** self.theta * (rr + self.c)

    def q_prime(self, r):
        rr = np.asarray(r, dtype=float)
        return (self.theta + 1.0) * rr ** self.theta + self.c * self.theta * rr ** (
            self.theta - 1.0
        )

    def logderiv_fn(self):
        th, c = self.theta, self.c
        return lambda r: ((th + 1.0) * r + c * th) / (r * (r + c))

    def Q(self, r):
        rr = np.asarray(r, dtype=float)
        return rr ** (self.theta + 2.0) / (self.theta + 2.0) + self.c * rr ** (
            self.theta + 1.0
        ) / (self.theta + 1.0)

    def int_Q_over_q(self, r):
        rr = np.asarray(r, dtype=float)
        c, th = self.c, self.theta
        lg = np.log1p(rr / c)
        return (rr * rr / 2.0 - c * rr + c * c * lg) / (th + 2.0) + c * (
            rr - c * lg
        ) / (th + 1.0)

    def int_h(self, r):
        def one(x: float) -> float:
            return float(self.Q(x)) * self._tail_quad(x) + float(self.int_Q_over_q(x))

        return self._map_scalar(one, r)

    def _Q_grid(self, rs):
        return self.Q(rs)

    def _int_h_grid(self, rs, Q, tail):
        return Q * tail + self.int_Q_over_q(rs)

    def _tail_quad(self, r: float) -> float:
        # Adaptive quadrature degrades far out; the alternating series in
        # c/r is exact to machine precision once it is geometric.
        if r <= 2.0 * self.c:
            return super()._tail_quad(r)
        th, c = self.theta, self.c
        base = r ** (-th)
        ratio = 1.0
        total = 0.0
        for k in range(400):
            term = base * ratio / (th + k)
            total += term
            if abs(term) <= 1e-17 * abs(total):
                break
            ratio *= -c / r
        return total

    def describe(self) -> dict:
        return {"family": self.family, "theta": self.theta, "c": self.c}


class PiecewiseLogWeight(Weight):
    """Power core with a logarithmically corrected tail:

        q(r) = r^theta                          for r < r0
        q(r) = (ln(r0)/e) * r^mu / ln(r)        for r >= r0

    with theta, mu > 1, r0 >= e^2 and the C^1 matching constraint
    r0^(mu - theta) = e (equivalently mu = theta + 1/ln(r0))."""

    family = "piecewise_log"

    def __init__(self, theta: float, r0: float = _E * _E, mu: float | None = None):
        if not theta > 1.0:
            raise ConfigError(
                f"weight.theta: piecewise_log family needs theta > 1, got {theta}"
            )
        if not r0 >= _E * _E - 1e-12:
            raise ConfigError(f"weight.r0: piecewise_log family needs r0 >= e^2, got {r0}")
        self.theta = float(theta)
        self.r0 = float(r0)
        implied = self.theta + 1.0 / math.log(self.r0)
        if mu is None:
            self.mu = implied
        else:
            if abs(mu - implied) > 1e-9 * max(1.0, abs(implied)):
                raise ConfigError(
                    "weight.mu: piecewise_log needs r0^(mu-theta) = e; "
                    f"mu={mu} but theta and r0 imply mu={implied}"
                )
            self.mu = float(mu)
        self._A = math.log(self.r0) / _E
        mu, r0 = self.mu, self.r0
        # Matching constant carrying the tail information into r < r0.
        self._C0 = (_E / (mu - 1.0) ** 2) * (r0 ** (1.0 - mu) / math.log(r0)) * (
            (mu - 1.0) * math.log(r0) + 1.0
        )
        self._Q_r0 = self.r0 ** (self.theta + 1.0) / (self.theta + 1.0)
        self._li_r0 = _li((mu + 1.0) * math.log(r0))
        self._li2_r0 = _li(2.0 * math.log(r0))
        self._int_h_r0 = float(self._int_h_low(np.asarray(self.r0)))

    def _split(self, r):
        rr = np.asarray(r, dtype=float)
        return rr, rr < self.r0

    @staticmethod
    def _safe_log(rr, floor):
        return np.log(np.maximum(rr, floor))

    def q(self, r):
        rr, low = self._split(r)
        lo = rr ** self.theta
        lg = self._safe_log(rr, self.r0)
        hi = self._A * rr ** self.mu / lg
        return np.where(low, lo, hi)

    def q_prime(self, r):
        rr, low = self._split(r)
        lo = self.theta * rr ** (self.theta - 1.0)
        lg = self._safe_log(rr, self.r0)
        hi = self._A * rr ** (self.mu - 1.0) * (self.mu * lg - 1.0) / (lg * lg)
        return np.where(low, lo, hi)

    def logderiv_fn(self):
        th, mu, r0 = self.theta, self.mu, self.r0

        def ld(r: float) -> float:
            if r < r0:
                return th / r
            return mu / r - 1.0 / (r * math.log(r))

        return ld

    def Q(self, r):
        rr, low = self._split(r)
        lo = rr ** (self.theta + 1.0) / (self.theta + 1.0)
        lg = self._safe_log(rr, self.r0)
        li = np.vectorize(_li)((self.mu + 1.0) * lg)
        hi = self._Q_r0 + self._A * (li - self._li_r0)
        return np.where(low, lo, hi)

    def h(self, r):
        rr, low = self._split(r)
        th, mu = self.theta, self.mu
        lo = (rr - self.r0 ** (1.0 - th) * rr ** th) / (th - 1.0) + self._C0 * rr ** th
        lg = self._safe_log(rr, self.r0)
        hi = rr / (mu - 1.0) + rr / ((mu - 1.0) ** 2 * lg)
        return np.where(low, lo, hi)

    def h_prime(self, r):
        rr, low = self._split(r)
        th, mu = self.theta, self.mu
        lo = (1.0 - th * self.r0 ** (1.0 - th) * rr ** (th - 1.0)) / (
            th - 1.0
        ) + self._C0 * th * rr ** (th - 1.0)
        lg = self._safe_log(rr, self.r0)
        hi = 1.0 / (mu - 1.0) + (lg - 1.0) / ((mu - 1.0) ** 2 * lg * lg)
        return np.where(low, lo, hi)

    def tail(self, r):
        return np.asarray(self.h(r), dtype=float) / np.asarray(self.q(r), dtype=float)

    def _int_h_low(self, rr):
        th = self.theta
        return (
            rr * rr / 2.0 - self.r0 ** (1.0 - th) * rr ** (th + 1.0) / (th + 1.0)
        ) / (th - 1.0) + self._C0 * rr ** (th + 1.0) / (th + 1.0)

    def int_h(self, r):
        rr, low = self._split(r)
        mu = self.mu
        lo = self._int_h_low(rr)
        lg = self._safe_log(rr, self.r0)
        li2 = np.vectorize(_li)(2.0 * lg)
        hi = (
            self._int_h_r0
            + (rr * rr - self.r0 * self.r0) / (2.0 * (mu - 1.0))
            + (li2 - self._li2_r0) / (mu - 1.0) ** 2
        )
        return np.where(low, lo, hi)

    def int_Q_over_q(self, r):
        rr = np.asarray(r, dtype=float)
        if np.any(rr >= self.r0):
            return self._map_scalar(
                lambda x: _quad(lambda t: float(self.Q(t)) / float(self.q(t)), 0.0, x),
                r,
            )
        return rr * rr / (2.0 * (self.theta + 1.0))

    def _Q_grid(self, rs):
        return self.Q(rs)

    def _tail_grid(self, rs):
        return self.tail(rs)

    def _int_h_grid(self, rs, Q, tail):
        return self.int_h(rs)

    def describe(self) -> dict:
        return {
            "family": self.family,
            "theta": self.theta,
            "mu": self.mu,
            "r0": self.r0,
        }


class TabulatedWeight(Weight):
    """Weight given by samples (r_i, q_i, q'_i) on an increasing grid.

    q is interpolated monotonically (PCHIP in log-log scale); the tail of
    1/q beyond the grid is estimated from a power-law fit over the last
    decade.  Requests outside [r_min, r_max] are refused."""

    family = "tabulated"

    def __init__(self, r_grid, q_values, q_prime_values):
        r_grid = np.asarray(r_grid, dtype=float)
        q_values = np.asarray(q_values, dtype=float)
        q_prime_values = np.asarray(q_prime_values, dtype=float)
        if r_grid.ndim != 1 or len(r_grid) < 8:
            raise ConfigError("weight.table: need at least 8 grid points")
        if np.any(np.diff(r_grid) <= 0.0):
            raise ConfigError("weight.table: r grid must be strictly increasing")
        if np.any(q_values <= 0.0) or r_grid[0] <= 0.0:
            raise ConfigError("weight.table: need r > 0 and q > 0 on the grid")
        from scipy.interpolate import PchipInterpolator

        self.r_min = float(r_grid[0])
        self.r_max = float(r_grid[-1])
        self._q_ip = PchipInterpolator(np.log(r_grid), np.log(q_values))
        self._qp_ip = PchipInterpolator(r_grid, q_prime_values)
        # Power-law tail fit over the last decade: q ~ a r^p.
        mask = r_grid >= self.r_max / 10.0
        p, la = np.polyfit(np.log(r_grid[mask]), np.log(q_values[mask]), 1)
        self._tail_p = float(p)
        self._tail_a = float(math.exp(la))
        if self._tail_p <= 1.0 + 1e-9:
            self._tail_beyond = None  # 1/q ~ r^-p, p <= 1: diverges
        else:
            self._tail_beyond = self.r_max ** (1.0 - self._tail_p) / (
                self._tail_a * (self._tail_p - 1.0)
            )

    def _check_range(self, r):
        rr = np.asarray(r, dtype=float)
        if np.any(rr < self.r_min * (1.0 - 1e-12)) or np.any(
            rr > self.r_max * (1.0 + 1e-12)
        ):
            raise DomainError(
                f"tabulated weight defined on [{self.r_min}, {self.r_max}], "
                "requested r outside"
            )
        return np.clip(rr, self.r_min, self.r_max)

    def q(self, r):
        return np.exp(self._q_ip(np.log(self._check_range(r))))

    def q_prime(self, r):
        return self._qp_ip(self._check_range(r))

    def _head_exponent(self) -> float:
        return max(
            float(self.q_prime(self.r_min)) * self.r_min / float(self.q(self.r_min)),
            1.0,
        )

    def _Q_quad(self, r: float) -> float:
        # The unseen piece (0, r_min) follows the power law through the
        # first grid point, consistent with q(0) = 0.
        head = float(self.q(self.r_min)) * self.r_min / (self._head_exponent() + 1.0)
        return head + _quad(
            lambda t: float(self.q(t)), self.r_min, float(self._check_range(r))
        )

    def _tail_quad(self, r: float) -> float:
        if self._tail_beyond is None:
            raise TailNotIntegrableError(
                "tabulated weight tail exponent <= 1; integral of 1/q over "
                "(r, inf) diverges and (q4) fails"
            )
        r = float(self._check_range(r))
        return _quad(lambda t: 1.0 / float(self.q(t)), r, self.r_max) + self._tail_beyond

    def int_Q_over_q(self, r):
        p0 = self._head_exponent()
        head = self.r_min * self.r_min / ((p0 + 1.0) * 2.0)
        return self._map_scalar(
            lambda x: head
            + _quad(lambda t: self._Q_quad(t) / float(self.q(t)), self.r_min, x),
            self._check_range(r),
        )

    def describe(self) -> dict:
        return {
            "family": self.family,
            "r_min": self.r_min,
            "r_max": self.r_max,
            "tail_exponent": self._tail_p,
        }


class QuadratureWeight(Weight):
    """Wrap callables (q, q') and push every derived quantity through the
    generic quadrature route.  Used to cross-check closed forms."""

    family = "quadrature"

    def __init__(self, q_fn, q_prime_fn, label: str = "quadrature"):
        self._q_fn = q_fn
        self._qp_fn = q_prime_fn
        self.label = label

    def q(self, r):
        return self._map_scalar(lambda x: float(self._q_fn(x)), r)

    def q_prime(self, r):
        return self._map_scalar(lambda x: float(self._qp_fn(x)), r)

    def describe(self) -> dict:
        return {"family": self.family, "label": self.label}


# ---------------------------------------------------------------------------
# limits at infinity


def limit_by_extrapolation(xs, vs, agree_tol: float = 1e-7):
    """Neville extrapolation of the points (xs, vs) to x = 0.

    xs must be positive, ordered from largest to smallest.  Returns
    (limit, err_estimate, converged); convergence means three successive
    tableau diagonal values agree to agree_tol relative to max(1, |limit|).
    """
    xs = np.asarray(xs, dtype=float)
    vs = np.asarray(vs, dtype=float)
    n = len(xs)
    if n == 0:
        return math.nan, math.inf, False
    tab = np.empty(n)
    tab[0] = vs[0]
    diag = [vs[0]]
    best, best_err = float(vs[0]), math.inf
    streak = 0
    for i in range(1, n):
        tab[i] = vs[i]
        for j in range(i - 1, -1, -1):
            # tab[j] holds P_{j, i-1}; after update it holds P_{j, i}(0)
            tab[j] = (xs[i] * tab[j] - xs[j] * tab[j + 1]) / (xs[i] - xs[j])
        diag.append(float(tab[0]))
        err = abs(diag[-1] - diag[-2])
        if err < best_err:
            best, best_err = diag[-1], err
        if err <= agree_tol * max(1.0, abs(diag[-1])):
            streak += 1
            if streak >= 2:  # three successive diagonal values pairwise close
                return diag[-1], err, True
        else:
            streak = 0
    # A single decisive agreement well under tolerance also counts.
    converged = best_err <= 0.1 * agree_tol * max(1.0, abs(best))
    return best, best_err, converged


def _limit_at_infinity(fn, *, r_lo: float = 8.0, levels: int = 40, depth: int = 14,
                       agree_tol: float = 1e-7):
    """Extrapolate fn(r) for r -> inf on the geometric grid r_lo * 2^j.

    Both 1/r and 1/log(r) are tried as extrapolation variable; the
    converged candidate with the smaller error estimate wins.  Returns
    (value, diagnostics)."""
    rs, vs = [], []
    r = r_lo
    for _ in range(levels):
        try:
            v = float(fn(r))
        except (OverflowError, FloatingPointError, DomainError):
            break
        if not math.isfinite(v):
            break
        rs.append(r)
        vs.append(v)
        r *= 2.0
    if len(rs) < 4:
        return math.nan, {"converged": False, "reason": "too few finite samples"}
    candidates = {}
    # Deeper Neville tableaus are not uniformly better (ill-conditioned in
    # 1/log r), so several depths compete.
    for d in (8, depth, 20):
        d = min(d, len(rs))
        rs_a = np.asarray(rs[-d:])
        vs_a = np.asarray(vs[-d:])
        for name, xs in (("1/r", 1.0 / rs_a), ("1/log r", 1.0 / np.log(rs_a))):
            cand = limit_by_extrapolation(xs, vs_a, agree_tol)
            key = f"{name}@{d}"
            candidates[key] = cand
    usable = {k: v for k, v in candidates.items() if v[2]}
    pool = usable if usable else candidates
    pick = min(pool, key=lambda k: pool[k][1])
    lim, err, conv = candidates[pick]
    diag = {
        "converged": bool(conv),
        "variable": pick,
        "err_estimate": float(err),
        "n_samples": len(rs),
        "r_last": rs[-1],
    }
    return lim, diag


def default_audit_grid(lo: float = 1e-4, hi: float = 1e4, n: int = 4000) -> np.ndarray:
    """Log-spaced radial grid used by the hypothesis audit."""
    if not (lo > 0.0 and hi > lo and n >= 16):
        raise ConfigError("check.grid: need 0 < lo < hi and n >= 16")
    return np.geomspace(lo, hi, int(n))


def eval_weight(weight: Weight, r: float) -> WeightValues:
    """All derived quantities of the weight at radius r."""
    return weight.values(r)


def weight_constants(
    weight: Weight,
    *,
    agree_tol: float = 1e-7,
    grid: np.ndarray | None = None,
    table: dict | None = None,
    q7_a_grid=None,
    q7_c_steps: int = 33,
) -> WeightConstants:
    """Limit constants H_inf, ell_inf, G_bar plus the (q7) pair (C, a).

    Limits are extrapolated on geometric radius grids; nothing is copied
    from a family's symbolic form, so closed-form families exercise the
    same code path as generic ones.
    """
    diagnostics: dict = {}
    H_inf, d = _limit_at_infinity(lambda r: float(weight.H(r)), agree_tol=agree_tol)
    diagnostics["H_inf"] = d
    ell_inf, d = _limit_at_infinity(
        lambda r: float(weight.h_prime(r)), agree_tol=agree_tol
    )
    diagnostics["ell_inf"] = d
    if math.isfinite(H_inf) and math.isfinite(ell_inf):
        identity_residual = abs(H_inf - ell_inf / (1.0 + 2.0 * ell_inf))
    else:
        identity_residual = math.nan

    if table is None:
        if grid is None:
            grid = default_audit_grid(n=1500)
        table = weight.grid_table(grid)
    grid = table["r"]
    G_vals = table["G"]
    i_max = int(np.argmax(G_vals))
    G_bar = float(G_vals[i_max])
    lo = grid[max(i_max - 1, 0)]
    hi = grid[min(i_max + 1, len(grid) - 1)]
    fine = np.geomspace(lo, hi, 65)
    G_bar = max(G_bar, float(np.max(np.asarray(weight.G(fine), dtype=float))))
    sup_at_edge = i_max >= len(grid) - max(2, len(grid) // 10)
    diagnostics["G_bar"] = {
        "arg_sup": float(grid[i_max]),
        "sup_at_grid_edge": bool(sup_at_edge),
    }
    if sup_at_edge:
        # The supremum is still climbing at the grid boundary, so it lives
        # at infinity; extrapolate the limit and keep the larger value.
        G_lim, d = _limit_at_infinity(lambda r: float(weight.G(r)), agree_tol=agree_tol)
        diagnostics["G_bar"]["limit"] = float(G_lim)
        diagnostics["G_bar"]["limit_diag"] = d
        if d.get("converged") and math.isfinite(G_lim):
            G_bar = max(G_bar, float(G_lim))

    constants = WeightConstants(
        H_inf=float(H_inf),
        ell_inf=float(ell_inf),
        G_bar=float(G_bar),
        identity_residual=float(identity_residual),
        diagnostics=diagnostics,
    )
    _search_q7(constants, table, q7_a_grid, q7_c_steps)
    return constants


def _search_q7(constants, table, a_grid, c_steps) -> None:
    """Coarse search for (a, C) with G_bar <= C <= 1 making h^(1-a) (C - G)
    nondecreasing on the grid.  Fills C_q7/a_q7 in place (None if absent)."""
    G_bar = constants.G_bar
    if not math.isfinite(G_bar) or G_bar > 1.0:
        constants.diagnostics["q7"] = {"reason": f"G_bar={G_bar} leaves no C <= 1"}
        return
    if a_grid is None:
        a_grid = [round(0.1 * k, 1) for k in range(1, 10)]
    h_vals = table["h"]
    G_vals = table["G"]
    c_values = [G_bar] + list(G_bar + (1.0 - G_bar) * np.linspace(0.0, 1.0, c_steps)[1:])
    for C in c_values:
        for a in a_grid:
            v = h_vals ** (1.0 - a) * (C - G_vals)
            d = np.diff(v)
            tol = 1e-10 * np.maximum(np.abs(v[:-1]), np.abs(v[1:])) + 1e-300
            if np.all(d >= -tol):
                constants.C_q7 = float(C)
                constants.a_q7 = float(a)
                constants.diagnostics["q7"] = {"C": float(C), "a": float(a)}
                return
    constants.diagnostics["q7"] = {"reason": "no (a, C) pair on the coarse search grid"}
