"""Integration of the singular radial IVP with dense output and events.

The equation u'' + (q'/q) u' + f(u) = 0 with u(0) = alpha, u'(0) = 0 is
singular at r = 0; integration starts from a frozen-f series on
[0, r_start] and proceeds with an adaptive high-order Runge-Kutta pair.
Recorded events: transversal u-zeros, u'-zeros, and the double-zero ball
u^2 + u'^2 <= eps_dz^2 after which the solution is extended by zero.

The energy I(r) = u'^2 + 2 F(u) is nonincreasing along solutions; the
integrator verifies this up to tolerance and the classifier builds on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import (
    ConfigError,
    DomainError,
    IntegrationToleranceError,
    NumericError,
    SingularWindowError,
)
from .nonlin import Nonlinearity
from .weights import Weight

__all__ = [
    "Problem",
    "EventRecord",
    "Trajectory",
    "Markers",
    "TailResult",
    "series_start",
    "integrate",
    "extract_markers",
    "asymptotic_tail_test",
    "default_eps_dz",
]

FPRIME_CAP_WINDOW = 1e-12  # |u| below this: f'(u) evaluated at the window edge


def default_eps_dz(alpha: float) -> float:
    return 1e-9 * max(1.0, alpha)


@dataclass(frozen=True)
class Problem:
    """A weight q plus a nonlinearity f; immutable and shareable."""

    weight: Weight
    nonlin: Nonlinearity

    def describe(self) -> dict:
        return {"weight": self.weight.describe(),
                "nonlinearity": self.nonlin.describe()}


@dataclass(frozen=True)
class EventRecord:
    kind: str  # u_zero | uprime_zero | double_zero | asymptotic_tail
    r: float
    value_slope: float  # u' at a u-zero; u at a u'-zero
    k: int | None = None  # level the event contributes to (set by extraction)


def series_start(problem: Problem, alpha: float, r_start: float):
    """(u, u') at r_start from integrating (q u')' = -q f(u) with f frozen
    at f(alpha):

        u(r)  = alpha - f(alpha) * integral_0^r (Q/q)
        u'(r) = -f(alpha) * Q(r)/q(r)

    Raises when r_start is too large for the frozen-coefficient error."""
    w, nl = problem.weight, problem.nonlin
    fa = float(nl.f(alpha))
    u0 = alpha - fa * float(w.int_Q_over_q(r_start))
    v0 = -fa * float(w.Q(r_start)) / float(w.q(r_start))
    df = abs(float(nl.f(u0)) - fa)
    if df > 1e-3 * max(abs(fa), 1e-12):
        raise SingularWindowError(
            f"series start at r_start={r_start} drifts f by {df:.3e}; "
            "choose a smaller r_start"
        )
    return u0, v0


def _first_zero_scale(problem: Problem, alpha: float) -> float:
    """Frozen-f estimate of the radius where u first drops to beta (or by
    half, below beta); sets the horizon and series-start scales."""
    w, nl = problem.weight, problem.nonlin
    fa = abs(float(nl.f(alpha)))
    if fa == 0.0:
        return 1.0
    target = alpha - nl.beta if alpha > nl.beta else alpha / 2.0
    g = lambda r: fa * float(w.int_Q_over_q(r)) - target
    hi = 1e-3
    for _ in range(120):
        if g(hi) > 0.0:
            break
        hi *= 2.0
    else:
        return hi
    lo = hi / 2.0 if hi > 1e-3 else 1e-12
    if g(lo) >= 0.0:
        return lo
    return float(brentq(g, lo, hi, rtol=1e-6))


def _pick_r_start(problem: Problem, alpha: float, scale: float) -> float:
    w, nl = problem.weight, problem.nonlin
    fa = float(nl.f(alpha))
    if fa == 0.0:
        return 1e-6
    fpa = abs(float(nl.f_prime(alpha)))
    rs = min(1e-6 * scale, 1e-3)
    for _ in range(200):
        drop = abs(fa) * float(w.int_Q_over_q(rs))
        if fpa * drop <= 1e-9 * max(abs(fa), 1e-300) and drop <= 1e-9 * max(1.0, alpha):
            return rs
        rs /= 4.0
        if rs < 1e-280:
            raise NumericError("could not find a valid series-start radius")
    raise NumericError("could not find a valid series-start radius")


class Trajectory:
    """Dense solution of the IVP on [0, r_end] with event records.

    Evaluation is piecewise: the frozen-f series on [0, r_start], the
    integrator's dense output beyond, and identically zero past a double
    zero.  When integrated jointly with the variational system, phi and
    phi' are evaluable the same way."""

    def __init__(self, problem, alpha, r_start, sol, events, *,
                 rtol, eps_dz, zero_extension_from=None, variational=False,
                 phi_series=None, stop_reason="horizon"):
        self.problem = problem
        self.alpha = float(alpha)
        self.r_start = float(r_start)
        self.sol = sol
        self.events = events
        self.rtol = rtol
        self.eps_dz = eps_dz
        self.zero_extension_from = zero_extension_from
        self.variational = variational
        self.stop_reason = stop_reason
        self._phi_series = phi_series
        self._fa = float(problem.nonlin.f(alpha))
        self._fpa = float(problem.nonlin.f_prime(alpha))
        self.nodes_r = sol.t
        self.nodes_u = sol.y[0]
        self.nodes_v = sol.y[1]
        self.r_end = float(sol.t[-1])
        self.I0 = 2.0 * float(problem.nonlin.F(alpha))
        I = self.nodes_v ** 2 + 2.0 * np.asarray(
            problem.nonlin.F(self.nodes_u), dtype=float)
        self.energy_nodes = I
        self.max_energy_increase = float(np.max(np.diff(I))) if len(I) > 1 else 0.0

    # -- evaluation -----------------------------------------------------------

    def _series_uv(self, r: float):
        w = self.problem.weight
        if r <= 0.0:
            return self.alpha, 0.0
        u = self.alpha - self._fa * float(w.int_Q_over_q(r))
        v = -self._fa * float(w.Q(r)) / float(w.q(r))
        return u, v

    def eval(self, r: float):
        """(u, u') at radius r; r may be anywhere in [0, r_end]."""
        if self.zero_extension_from is not None and r >= self.zero_extension_from:
            return 0.0, 0.0
        if r <= self.r_start:
            return self._series_uv(r)
        if r > self.r_end * (1.0 + 1e-12):
            raise DomainError(f"r={r} beyond the computed span {self.r_end}")
        y = self.sol.sol(min(r, self.r_end))
        return float(y[0]), float(y[1])

    def u(self, r):
        return self._vec(r, 0)

    def uprime(self, r):
        return self._vec(r, 1)

    def _vec(self, r, idx):
        arr = np.asarray(r, dtype=float)
        if arr.ndim == 0:
            return self.eval(float(arr))[idx]
        return np.array([self.eval(float(x))[idx] for x in arr])

    def energy(self, r):
        arr = np.asarray(r, dtype=float)
        scalar = arr.ndim == 0
        rs = np.atleast_1d(arr)
        out = np.empty_like(rs)
        for i, x in enumerate(rs):
            u, v = self.eval(float(x))
            out[i] = v * v + 2.0 * float(self.problem.nonlin.F(u))
        return float(out[0]) if scalar else out

    def phi_eval(self, r: float):
        """(phi, phi') of the variational system, when integrated jointly."""
        if not self.variational:
            raise NumericError("trajectory was integrated without the "
                               "variational system")
        if self.zero_extension_from is not None and r >= self.zero_extension_from:
            return 0.0, 0.0
        if r <= self.r_start:
            w = self.problem.weight
            if r <= 0.0:
                return 1.0, 0.0
            phi = 1.0 - self._fpa * float(w.int_Q_over_q(r))
            psi = -self._fpa * float(w.Q(r)) / float(w.q(r))
            return phi, psi
        y = self.sol.sol(min(r, self.r_end))
        return float(y[2]), float(y[3])


def integrate(
    problem: Problem,
    alpha: float,
    r_max: float | None = None,
    rtol: float = 1e-10,
    *,
    variational: bool = False,
    stop_energy: bool = False,
    k_cap: int | None = None,
    energy_guard: bool = True,
) -> Trajectory:
    """Integrate the IVP from a series start to r_max (or to a terminal
    event).  Optional terminal conditions: the energy dropping below
    -eps_I (the level is then settled: no further sign changes can occur)
    and a cap on the number of transversal u-zeros."""
    w, nl = problem.weight, problem.nonlin
    if not alpha > 0.0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    if alpha >= nl.c:
        raise DomainError(f"alpha={alpha} outside the domain (0, {nl.c})")
    eps = default_eps_dz(alpha)
    scale = _first_zero_scale(problem, alpha)
    r_start = _pick_r_start(problem, alpha, scale)
    if r_max is None:
        r_max = 50.0 * scale
        fp0 = nl.fprime_at_zero()
        if fp0 < 0.0:
            lam = math.sqrt(-fp0)
            r_max = max(r_max, (math.log(max(1.0, alpha) / eps) + 20.0) / lam)
    if r_max <= r_start:
        raise ConfigError(f"r_max={r_max} does not exceed r_start={r_start}")

    u0, v0 = series_start(problem, alpha, r_start)
    ld = w.logderiv_fn()
    f = nl.f_scalar_fn()
    if variational:
        fp = nl.f_prime_scalar_fn()
        cap = FPRIME_CAP_WINDOW

        def rhs(r, y):
            u, v, phi, psi = y
            l = ld(r)
            ue = u if abs(u) >= cap else math.copysign(cap, u) if u != 0.0 else cap
            return (v, -l * v - f(u), psi, -l * psi - fp(ue) * phi)

        fpa = float(nl.f_prime(alpha))
        phi0 = 1.0 - fpa * float(w.int_Q_over_q(r_start))
        psi0 = -fpa * float(w.Q(r_start)) / float(w.q(r_start))
        y0 = [u0, v0, phi0, psi0]
    else:

        def rhs(r, y):
            return (y[1], -ld(r) * y[1] - f(y[0]))

        y0 = [u0, v0]

    bound = 2.0 * max(alpha, nl.beta) + 1.0
    I_floor = 1e-9 * max(1.0, abs(2.0 * float(nl.F(alpha))))
    Ffn = nl.F
    # Below the level beta the energy starts negative, so the crossing
    # event can never fire; the verdict is already settled at the start.
    settled_at_start = stop_energy and 2.0 * float(nl.F(alpha)) <= -I_floor
    if settled_at_start:
        r_max = min(r_max, max(4.0 * r_start, 0.5 * scale))

    def ev_u(r, y):
        return y[0]

    def ev_up(r, y):
        return y[1]

    def ev_ball(r, y):
        return y[0] * y[0] + y[1] * y[1] - eps * eps

    ev_ball.terminal = True
    ev_ball.direction = -1

    def ev_escape(r, y):
        return bound - abs(y[0])

    ev_escape.terminal = True
    ev_escape.direction = -1

    events = [ev_u, ev_up, ev_ball, ev_escape]
    if k_cap is not None:
        ev_u.terminal = int(k_cap)
    if stop_energy:

        def ev_energy(r, y):
            return y[1] * y[1] + 2.0 * float(Ffn(y[0])) + I_floor

        ev_energy.terminal = True
        ev_energy.direction = -1
        events.append(ev_energy)

    sol = solve_ivp(
        rhs, (r_start, r_max), y0, method="DOP853", dense_output=True,
        rtol=rtol, atol=max(1e-14, 1e-3 * eps), events=events,
    )
    if sol.status < 0:
        raise IntegrationToleranceError(f"integrator failed: {sol.message}")

    recs: list[EventRecord] = []
    for r, y in zip(sol.t_events[0], sol.y_events[0]):
        kind = "u_zero" if abs(y[1]) > eps else "double_zero"
        recs.append(EventRecord(kind, float(r), float(y[1])))
    for r, y in zip(sol.t_events[1], sol.y_events[1]):
        if abs(y[0]) > eps:
            recs.append(EventRecord("uprime_zero", float(r), float(y[0])))
    zero_from = None
    stop_reason = "horizon"
    if len(sol.t_events[2]) > 0:
        r_dz = float(sol.t_events[2][0])
        y_dz = sol.y_events[2][0]
        recs.append(EventRecord("double_zero", r_dz, float(y_dz[1])))
        zero_from = r_dz
        stop_reason = "double_zero"
    if len(sol.t_events[3]) > 0:
        raise IntegrationToleranceError(
            f"solution escaped the a-priori bound {bound:.3g} at "
            f"r={float(sol.t_events[3][0]):.6g}; tolerance failure"
        )
    if stop_energy and (
        len(sol.t_events[4]) > 0
        or (settled_at_start and stop_reason == "horizon")
    ):
        stop_reason = "negative_energy"
    elif k_cap is not None and sol.status == 1 and stop_reason == "horizon":
        if len(sol.t_events[0]) >= int(k_cap):
            stop_reason = "zero_cap"
    recs.sort(key=lambda e: e.r)
    # collapse events that coincide within root-finder resolution
    dedup: list[EventRecord] = []
    for e in recs:
        if dedup and e.kind == dedup[-1].kind and abs(e.r - dedup[-1].r) <= 1e-11 * max(1.0, abs(e.r)):
            continue
        dedup.append(e)

    traj = Trajectory(
        problem, alpha, r_start, sol, dedup, rtol=rtol, eps_dz=eps,
        zero_extension_from=zero_from, variational=variational,
        stop_reason=stop_reason,
    )
    if energy_guard and traj.max_energy_increase > 10.0 * rtol * max(1.0, abs(traj.I0)):
        raise IntegrationToleranceError(
            f"energy increased by {traj.max_energy_increase:.3e} along the "
            f"trajectory (tolerance {10.0 * rtol * max(1.0, abs(traj.I0)):.3e})"
        )
    return traj


@dataclass
class Markers:
    """Z_k (transversal sign changes) and T_k (first subsequent extremum),
    in the alternating order Z_1 < T_1 < Z_2 < ..."""

    Z: list = field(default_factory=list)
    T: list = field(default_factory=list)
    slopes: list = field(default_factory=list)  # u' at each Z_k
    extremum_values: list = field(default_factory=list)  # u at each T_k
    double_zero_r: float | None = None
    extra_extrema: list = field(default_factory=list)  # bounces beyond T_k
    events: list = field(default_factory=list)  # annotated with k


def extract_markers(traj: Trajectory, k_max: int | None = None) -> Markers:
    """Assign event records to levels.  A u-zero with |u'| > eps_dz is the
    next Z_k; the first u'-zero after Z_k is T_k; further u'-zeros before
    Z_{k+1} are bounces.  u'-zeros before Z_1 (possible when alpha < b
    makes u non-monotone near 0) are bounces at level 0."""
    m = Markers()
    annotated = []
    k = 0
    waiting_T = False
    for e in traj.events:
        if e.kind == "u_zero":
            if k_max is not None and k >= k_max:
                annotated.append(EventRecord(e.kind, e.r, e.value_slope, None))
                continue
            if m.slopes and math.copysign(1.0, e.value_slope) == math.copysign(1.0, m.slopes[-1]):
                raise NumericError(
                    f"consecutive sign changes at r={m.Z[-1]:.6g} and "
                    f"r={e.r:.6g} carry the same slope sign; event "
                    "localization is inconsistent"
                )
            k += 1
            m.Z.append(e.r)
            m.slopes.append(e.value_slope)
            waiting_T = True
            annotated.append(EventRecord(e.kind, e.r, e.value_slope, k))
        elif e.kind == "uprime_zero":
            if waiting_T:
                m.T.append(e.r)
                m.extremum_values.append(e.value_slope)
                waiting_T = False
                annotated.append(EventRecord(e.kind, e.r, e.value_slope, k))
            else:
                m.extra_extrema.append(e.r)
                annotated.append(EventRecord(e.kind, e.r, e.value_slope, None))
        elif e.kind == "double_zero":
            if m.double_zero_r is None:
                m.double_zero_r = e.r
            annotated.append(EventRecord(e.kind, e.r, e.value_slope, k + 1))
    m.events = annotated
    return m


@dataclass
class TailResult:
    converged: bool
    ell: float | None = None
    matched_zero: float | None = None
    residual_f: float = math.nan
    reason: str = ""


def asymptotic_tail_test(traj: Trajectory, r_tail: float | None = None,
                         n: int = 64) -> TailResult:
    """Decide whether u settles to a zero of f over the last decade of the
    computed span: u monotone, |u'| decaying, and f(limit) small.  The
    extended-by-zero case converges to 0 by construction."""
    if traj.zero_extension_from is not None:
        return TailResult(True, 0.0, 0.0, 0.0, "extended by zero")
    r_hi = traj.r_end
    r_lo = max(r_hi / 10.0, 2.0 * traj.r_start) if r_tail is None else r_tail
    if r_lo >= r_hi:
        return TailResult(False, reason="window empty")
    rs = np.linspace(r_lo, r_hi, n)
    us = np.array([traj.eval(float(r))[0] for r in rs])
    vs = np.array([traj.eval(float(r))[1] for r in rs])
    ell = float(us[-1])
    dev = np.abs(us - ell)
    monotone = np.all(np.diff(dev) <= 1e-12 * max(1.0, abs(traj.alpha)))
    decaying = abs(vs[-1]) <= 1e-6 * max(1.0, traj.alpha) and abs(
        vs[-1]) <= abs(vs[0]) + 1e-12
    if not (monotone and decaying):
        return TailResult(False, reason="tail not monotone-decaying")
    resid = abs(float(traj.problem.nonlin.f(ell)))
    zeros = [0.0, traj.problem.nonlin.b, -traj.problem.nonlin.b]
    matched = min(zeros, key=lambda z: abs(ell - z))
    if abs(ell - matched) > 1e-3 * max(1.0, traj.problem.nonlin.b):
        return TailResult(False, ell=ell, residual_f=resid,
                          reason="limit far from any zero of f")
    return TailResult(True, ell, matched, resid, "monotone decay")
