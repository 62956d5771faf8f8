"""Level-parameterized functionals along monotone branches of a trajectory.

Between consecutive extrema the solution u is strictly monotone, so
s -> r(s) inverts it there.  The functionals P, S12, the W family and T
are evaluated through that inverse; each carries an analytic derivative
in s, and traces pair those with finite differences so monotonicity
claims can be monitored sample by sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DomainError, NumericError, SingularWindowError
from .shooting import Trajectory, extract_markers

__all__ = [
    "BranchInverse",
    "WValue",
    "FunctionalTrace",
    "MonitorReport",
    "branch_inverse",
    "branch_boundaries",
    "eval_P",
    "eval_Pbar",
    "eval_S12",
    "eval_W_family",
    "eval_T",
    "s_threshold",
    "default_s_grid",
    "trace_functional",
    "trace_S12",
    "monotonicity_monitor",
    "TRACE_NAMES",
]

TRACE_NAMES = ("I", "P", "Pbar", "S12", "S12bar", "Wtilde", "Wbar", "What",
               "V", "T", "Tbar")
DEFAULT_SAMPLES = 512


def branch_boundaries(traj: Trajectory):
    """Radii of all u'-zeros (extrema and bounces), bracketed by 0 and the
    effective end of the span; consecutive pairs delimit monotone branches."""
    m = extract_markers(traj)
    end = traj.zero_extension_from if traj.zero_extension_from is not None else traj.r_end
    inner = sorted(set(m.T) | set(m.extra_extrema))
    inner = [r for r in inner if r < end * (1.0 - 1e-12)]
    return [0.0] + inner + [end]


class BranchInverse:
    """Monotone map s -> r on one branch, built from dense output by
    root-finding u(r) = s between bracketing integration nodes."""

    def __init__(self, traj: Trajectory, i: int, direction: str,
                 r_lo: float, r_hi: float):
        self.traj = traj
        self.i = i
        self.direction = direction
        self.r_lo = r_lo
        self.r_hi = r_hi
        u_lo = traj.eval(r_lo)[0]
        u_hi = traj.eval(r_hi)[0]
        self.s_top = max(u_lo, u_hi)
        self.s_bot = min(u_lo, u_hi)
        mask = (traj.nodes_r > r_lo) & (traj.nodes_r < r_hi)
        rs = np.concatenate([[r_lo], traj.nodes_r[mask], [r_hi]])
        us = np.array([traj.eval(float(r))[0] for r in rs])
        if direction == "down":
            rs, us = rs[::-1], us[::-1]
        # keep a strictly increasing subsequence in u for bracketing
        keep = [0]
        for j in range(1, len(us)):
            if us[j] > us[keep[-1]]:
                keep.append(j)
        self._u_asc = us[keep]
        self._r_asc = rs[keep]

    @property
    def s_range(self):
        return (self.s_bot, self.s_top)

    def r_of(self, s: float) -> float:
        slack = 1e-12 * max(1.0, abs(self.s_top), abs(self.s_bot))
        if s > self.s_top + slack or s < self.s_bot - slack:
            raise DomainError(
                f"s={s} outside branch {self.i} range "
                f"[{self.s_bot:.6g}, {self.s_top:.6g}]"
            )
        if s >= self._u_asc[-1]:
            return float(self._r_asc[-1])
        if s <= self._u_asc[0]:
            return float(self._r_asc[0])
        j = int(np.searchsorted(self._u_asc, s))
        a, b = float(self._r_asc[j - 1]), float(self._r_asc[j])
        lo, hi = (a, b) if a < b else (b, a)
        g = lambda r: self.traj.eval(float(r))[0] - s
        if lo == hi:
            return lo
        return float(brentq(g, lo, hi, xtol=1e-15, rtol=1e-14))

    def uprime_of(self, s: float) -> float:
        return self.traj.eval(self.r_of(s))[1]


def branch_inverse(traj: Trajectory, i: int, direction: str) -> BranchInverse:
    """Inverse on the i-th monotone branch (1-based).  The requested
    direction must match the sign of u' on the branch interior."""
    if direction not in ("down", "up"):
        raise DomainError(f"direction must be 'down' or 'up', got {direction!r}")
    bounds = branch_boundaries(traj)
    if not 1 <= i <= len(bounds) - 1:
        raise DomainError(
            f"branch {i} does not exist; trajectory has {len(bounds) - 1}"
        )
    r_lo, r_hi = bounds[i - 1], bounds[i]
    mid = 0.5 * (r_lo + r_hi)
    slope = traj.eval(mid)[1]
    actual = "down" if slope < 0.0 else "up"
    if slope == 0.0 or actual != direction:
        raise DomainError(
            f"branch {i} runs {actual}, not {direction} (u'={slope:.3e} at midpoint)"
        )
    return BranchInverse(traj, i, direction, r_lo, r_hi)


# -- pointwise functional values -----------------------------------------------


def _uv_at(inv: BranchInverse, s: float):
    r = inv.r_of(s)
    u, v = inv.traj.eval(r)
    return r, v


def eval_P(traj: Trajectory, inv: BranchInverse, s: float) -> float:
    """P(s) = -Q(r(s)) (u'^2 + 2F(s)) - 2 q(r(s)) u' (F/f)(s) on a down
    branch.  dP/ds = q u' (1 - 2H - 2(F/f)')."""
    nl = traj.problem.nonlin
    w = traj.problem.weight
    ratio = nl.ratio_Ff(s)  # refuses the windows at 0 and +-b
    r, v = _uv_at(inv, s)
    if r == 0.0:
        return 0.0
    rad = v * v + 2.0 * float(nl.F(s))
    return -float(w.Q(r)) * rad - 2.0 * float(w.q(r)) * v * ratio


def eval_Pbar(traj: Trajectory, inv: BranchInverse, s: float) -> float:
    """P on an up branch (the inverse r-bar); identical formula."""
    if inv.direction != "up":
        raise DomainError("Pbar needs an up-branch inverse")
    return eval_P(traj, inv, s)


def _deriv_P(traj: Trajectory, inv: BranchInverse, s: float) -> float:
    nl = traj.problem.nonlin
    w = traj.problem.weight
    dr = nl.d_ratio_Ff(s)
    r, v = _uv_at(inv, s)
    if r == 0.0:
        return 0.0
    H = float(w.values(r).H)
    return float(w.q(r)) * v * (1.0 - 2.0 * H - 2.0 * dr)


def eval_S12(traj1: Trajectory, traj2: Trajectory, inv1: BranchInverse,
             inv2: BranchInverse, s: float) -> float:
    """S12(s) = q(r1(s))|u1'| / (q(r2(s))|u2'|)."""
    w = traj1.problem.weight
    r1, v1 = _uv_at(inv1, s)
    r2, v2 = _uv_at(inv2, s)
    if v2 == 0.0:
        raise DomainError(f"S12 undefined at s={s}: u2' vanishes there")
    return float(w.q(r1)) * abs(v1) / (float(w.q(r2)) * abs(v2))


def _deriv_S12(traj1, traj2, inv1, inv2, s: float) -> float:
    nl = traj1.problem.nonlin
    val = eval_S12(traj1, traj2, inv1, inv2, s)
    v1 = inv1.uprime_of(s)
    v2 = inv2.uprime_of(s)
    if v1 == 0.0 or v2 == 0.0:
        return math.nan
    return val * float(nl.f(s)) * (1.0 / (v2 * v2) - 1.0 / (v1 * v1))


@dataclass(frozen=True)
class WValue:
    value: float
    radicand: float


def eval_W_family(traj: Trajectory, inv: BranchInverse, s: float,
                  which: str) -> WValue:
    """One of the square-root functionals:

      Wtilde = q sqrt(rad)            with rad = u'^2 + 2F(s)
      Wbar   = (Q/q)(r-bar) sqrt(rad)
      What   = (int_0^r h)^(1/2) sqrt(rad)
      V      = h(r) sqrt(rad)

    The radicand must be nonnegative (s above the branch threshold)."""
    nl = traj.problem.nonlin
    w = traj.problem.weight
    r, v = _uv_at(inv, s)
    rad = v * v + 2.0 * float(nl.F(s))
    if rad < 0.0:
        raise DomainError(
            f"negative radicand {rad:.3e} at s={s}: below the branch threshold"
        )
    if which == "Wbar" and inv.direction != "up":
        raise DomainError("Wbar needs an up-branch inverse")
    root = math.sqrt(rad)
    if r == 0.0:
        return WValue(0.0, rad)
    if which == "Wtilde":
        val = float(w.q(r)) * root
    elif which == "Wbar":
        val = float(w.Q(r)) / float(w.q(r)) * root
    elif which == "What":
        val = math.sqrt(float(w.int_h(r))) * root
    elif which == "V":
        val = float(w.h(r)) * root
    else:
        raise DomainError(f"unknown W-family member {which!r}")
    return WValue(val, rad)


def _deriv_W(traj: Trajectory, inv: BranchInverse, s: float, which: str) -> float:
    nl = traj.problem.nonlin
    w = traj.problem.weight
    r, v = _uv_at(inv, s)
    rad = v * v + 2.0 * float(nl.F(s))
    if rad <= 0.0 or v == 0.0 or r == 0.0:
        return math.nan
    root = math.sqrt(rad)
    F = float(nl.F(s))
    vals = w.values(r)
    if which == "Wtilde":
        return 2.0 * vals.q * vals.q_prime * F / (v * vals.q * root)
    if which == "Wbar":
        return vals.H * root / v - (vals.Q * vals.q_prime / vals.q ** 2) * v / root
    if which == "What":
        What = math.sqrt(vals.int_h) * root
        return vals.h * (F - vals.G * v * v) / (v * What)
    if which == "V":
        return (2.0 * vals.h_prime * F - v * v) / (v * root)
    raise DomainError(f"unknown W-family member {which!r}")


def _ratio_fn_extended(nl):
    """F/f as a quadrature integrand, extended continuously through 0."""
    win = nl.exclusion_halfwidth()
    fp0 = nl.fprime_at_zero()

    def g(t: float) -> float:
        if abs(t) < win:
            if fp0 != 0.0:
                return 0.5 * t
            edge = math.copysign(win, t) if t != 0.0 else win
            return nl.ratio_Ff(edge) / edge * t
        return nl.ratio_Ff(t)

    return g


def _T_base(nl, direction: str) -> float:
    return nl.beta if direction == "down" else -nl.beta


def _check_T_path(nl, lo: float, hi: float):
    win = nl.exclusion_halfwidth()
    for z in (nl.b, -nl.b):
        if lo < z + win and hi > z - win:
            raise SingularWindowError(
                f"quadrature path [{lo:.6g}, {hi:.6g}] crosses the excluded "
                f"window at {z:.6g}"
            )


def _T_quad(traj: Trajectory, s: float, direction: str) -> float:
    """T_-(s) = -int_beta^s F/f (down) or T_+(s) = -int_{-beta}^s (up)."""
    nl = traj.problem.nonlin
    base = _T_base(nl, direction)
    if s == base:
        return 0.0
    lo, hi = min(base, s), max(base, s)
    _check_T_path(nl, lo, hi)
    g = _ratio_fn_extended(nl)
    val, _ = quad(g, base, s, epsabs=1e-13, epsrel=1e-11, limit=200)
    return -val


def eval_T(traj: Trajectory, inv: BranchInverse, s: float) -> float:
    """T(s) = -(F/f)(s) h(r) u' - (1/2)(int_0^r h)(u'^2 + 2F(s)) + T_-(s)
    on a down branch; the up version uses r-bar and T_+.
    dT/ds = (G(r) - (F/f)') h u'."""
    nl = traj.problem.nonlin
    w = traj.problem.weight
    ratio = nl.ratio_Ff(s)
    quad_part = _T_quad(traj, s, inv.direction)
    r, v = _uv_at(inv, s)
    if r == 0.0:
        return quad_part
    rad = v * v + 2.0 * float(nl.F(s))
    return -ratio * float(w.h(r)) * v - 0.5 * float(w.int_h(r)) * rad + quad_part


def _deriv_T(traj: Trajectory, inv: BranchInverse, s: float) -> float:
    nl = traj.problem.nonlin
    w = traj.problem.weight
    dr = nl.d_ratio_Ff(s)
    r, v = _uv_at(inv, s)
    if r == 0.0:
        return math.nan
    vals = w.values(r)
    return (vals.G - dr) * vals.h * v


def s_threshold(traj: Trajectory, inv: BranchInverse, n: int = 256) -> float:
    """Infimum s on the branch where u'(r(s))^2 + 2F(s) stays positive;
    equals the branch bottom when the radicand never crosses zero."""
    nl = traj.problem.nonlin
    lo, hi = inv.s_range

    def rad(s: float) -> float:
        v = inv.uprime_of(s)
        return v * v + 2.0 * float(nl.F(s))

    ss = np.linspace(hi, lo, n)
    prev = ss[0]
    prev_val = rad(float(prev))
    if prev_val <= 0.0:
        raise DomainError(
            f"radicand nonpositive at the branch top s={hi:.6g}"
        )
    for s in ss[1:]:
        val = rad(float(s))
        if val <= 0.0:
            return float(brentq(rad, float(s), float(prev),
                                xtol=1e-13, rtol=1e-12))
        prev, prev_val = s, val
    return float(lo)


# -- traces and monitors --------------------------------------------------------


@dataclass
class FunctionalTrace:
    name: str
    s: np.ndarray
    value: np.ndarray
    derivative_analytic: np.ndarray
    derivative_fd: np.ndarray

    def rows(self):
        for i in range(len(self.s)):
            yield (self.s[i], self.value[i], self.derivative_analytic[i],
                   self.derivative_fd[i])


def default_s_grid(inv: BranchInverse, nl, n: int = DEFAULT_SAMPLES):
    """n sample levels on the branch, log-spaced toward s = 0 (where the
    exclusion windows sit), clipped away from the endpoints and from the
    windows at 0 and +-b."""
    lo, hi = inv.s_range
    span = hi - lo
    if span <= 0.0:
        raise DomainError("branch has empty s-range")
    m = 1e-6 * span
    lo, hi = lo + m, hi - m
    s0 = 1e-4 * span
    g = lambda s: math.copysign(math.log1p(abs(s) / s0), s)
    ginv = lambda t: math.copysign(s0 * math.expm1(abs(t)), t)
    ts = np.linspace(g(lo), g(hi), n)
    ss = np.array([ginv(float(t)) for t in ts])
    win = 2.0 * nl.exclusion_halfwidth()
    keep = np.ones(len(ss), dtype=bool)
    for z in (0.0, nl.b, -nl.b):
        keep &= np.abs(ss - z) > win
    return ss[keep]


def _value_deriv_fns(name, traj, inv, traj2=None, inv2=None):
    if name == "I":
        nl = traj.problem.nonlin
        w = traj.problem.weight

        def val(s):
            r, v = _uv_at(inv, s)
            return v * v + 2.0 * float(nl.F(s))

        def der(s):
            r, v = _uv_at(inv, s)
            if r == 0.0:
                return 0.0
            return -2.0 * float(w.q_prime(r)) / float(w.q(r)) * v

        return val, der
    if name in ("P", "Pbar"):
        if name == "Pbar" and inv.direction != "up":
            raise DomainError("Pbar needs an up-branch inverse")
        return (lambda s: eval_P(traj, inv, s),
                lambda s: _deriv_P(traj, inv, s))
    if name in ("S12", "S12bar"):
        if traj2 is None or inv2 is None:
            raise DomainError(f"{name} needs a second trajectory")
        return (lambda s: eval_S12(traj, traj2, inv, inv2, s),
                lambda s: _deriv_S12(traj, traj2, inv, inv2, s))
    if name in ("Wtilde", "Wbar", "What", "V"):
        return (lambda s: eval_W_family(traj, inv, s, name).value,
                lambda s: _deriv_W(traj, inv, s, name))
    if name in ("T", "Tbar"):
        want = "down" if name == "T" else "up"
        if inv.direction != want:
            raise DomainError(f"{name} needs a {want}-branch inverse")
        return (lambda s: eval_T(traj, inv, s),
                lambda s: _deriv_T(traj, inv, s))
    raise DomainError(f"unknown functional {name!r}; expected one of {TRACE_NAMES}")


def _safe(fn, s):
    try:
        v = fn(s)
    except (DomainError, SingularWindowError):
        return math.nan
    return v if math.isfinite(v) else math.nan


def _build_trace(name, val_fn, der_fn, ss, inv, nl, fd_rel=1e-6):
    lo, hi = inv.s_range
    win = nl.exclusion_halfwidth()
    vals = np.array([_safe(val_fn, float(s)) for s in ss])
    ders = np.array([_safe(der_fn, float(s)) for s in ss])
    fds = np.full(len(ss), math.nan)
    for i, s in enumerate(ss):
        # near the F/f poles the integrand curvature blows up, and near the
        # branch endpoints the inverse map does; shrink the step so the
        # truncation term stays below the agreement tolerance
        dist = min(abs(s - z) for z in (0.0, nl.b, -nl.b))
        d_end = min(abs(s - lo), abs(hi - s))
        h = min(fd_rel * max(1.0, abs(s)), 1e-3 * dist, 0.05 * d_end)
        if h <= 0.0:
            continue
        a, b = s - h, s + h
        if a <= lo or b >= hi:
            continue
        if any(abs(x - z) <= win for x in (a, b) for z in (0.0, nl.b, -nl.b)):
            continue
        va, vb = _safe(val_fn, float(a)), _safe(val_fn, float(b))
        if math.isnan(va) or math.isnan(vb):
            continue
        fds[i] = (vb - va) / (2.0 * h)
    return FunctionalTrace(name, np.asarray(ss, dtype=float), vals, ders, fds)


def trace_functional(traj: Trajectory, inv: BranchInverse, name: str,
                     s_grid=None, n: int = DEFAULT_SAMPLES,
                     fd_rel: float = 1e-6) -> FunctionalTrace:
    """Sample one functional over the branch: value, analytic derivative,
    and a central finite difference of the value column."""
    nl = traj.problem.nonlin
    val_fn, der_fn = _value_deriv_fns(name, traj, inv)
    ss = default_s_grid(inv, nl, n) if s_grid is None else np.asarray(s_grid, dtype=float)
    return _build_trace(name, val_fn, der_fn, ss, inv, nl, fd_rel)


def trace_S12(traj1: Trajectory, traj2: Trajectory, inv1: BranchInverse,
              inv2: BranchInverse, s_grid=None, n: int = DEFAULT_SAMPLES,
              fd_rel: float = 1e-6, name: str = "S12") -> FunctionalTrace:
    nl = traj1.problem.nonlin
    val_fn, der_fn = _value_deriv_fns(name, traj1, inv1, traj2, inv2)
    if s_grid is None:
        lo1, hi1 = inv1.s_range
        lo2, hi2 = inv2.s_range
        lo, hi = max(lo1, lo2), min(hi1, hi2)
        if hi <= lo:
            raise DomainError("branches share no s-range")
        span = hi - lo
        m = 1e-6 * span
        ss = np.linspace(lo + m, hi - m, n)
        win = 2.0 * nl.exclusion_halfwidth()
        keep = np.ones(len(ss), dtype=bool)
        for z in (0.0, nl.b, -nl.b):
            keep &= np.abs(ss - z) > win
        ss = ss[keep]
    else:
        ss = np.asarray(s_grid, dtype=float)
    return _build_trace(name, val_fn, der_fn, ss, inv1, nl, fd_rel)


@dataclass
class MonitorReport:
    name: str
    claim: str  # nonneg | nonpos
    s_lo: float
    s_hi: float
    n_checked: int
    n_violations: int
    worst_value: float
    worst_s: float
    tol: float
    clean: bool

    def to_dict(self) -> dict:
        return {
            "name": self.name, "claim": self.claim,
            "s_range": [self.s_lo, self.s_hi], "n_checked": self.n_checked,
            "n_violations": self.n_violations, "worst_value": self.worst_value,
            "worst_s": self.worst_s, "tol": self.tol, "clean": self.clean,
        }


def monotonicity_monitor(trace: FunctionalTrace, claim: str, s_range=None,
                         tol: float = 1e-8) -> MonitorReport:
    """Check the sign of the sampled analytic derivative over the claimed
    s-range.  Violations beyond tol (scaled by the largest derivative
    magnitude in range) are counted and the worst one located."""
    if claim not in ("nonneg", "nonpos"):
        raise DomainError(f"claim must be 'nonneg' or 'nonpos', got {claim!r}")
    ss = trace.s
    ds = trace.derivative_analytic
    if s_range is None:
        mask = np.isfinite(ds)
        s_lo, s_hi = float(np.min(ss)), float(np.max(ss))
    else:
        s_lo, s_hi = float(min(s_range)), float(max(s_range))
        mask = np.isfinite(ds) & (ss >= s_lo) & (ss <= s_hi)
    n = int(np.sum(mask))
    if n == 0:
        return MonitorReport(trace.name, claim, s_lo, s_hi, 0, 0,
                             math.nan, math.nan, tol, True)
    d = ds[mask]
    s_sel = ss[mask]
    scale = max(1.0, float(np.max(np.abs(d))))
    tol_eff = tol * scale
    bad = d < -tol_eff if claim == "nonneg" else d > tol_eff
    n_bad = int(np.sum(bad))
    if n_bad:
        signed = d if claim == "nonpos" else -d
        j = int(np.argmax(signed))
        worst_v, worst_s = float(d[j]), float(s_sel[j])
    else:
        worst_v, worst_s = (float(np.min(d)), float(s_sel[int(np.argmin(d))])) \
            if claim == "nonneg" else (float(np.max(d)), float(s_sel[int(np.argmax(d))]))
    return MonitorReport(trace.name, claim, s_lo, s_hi, n, n_bad,
                         worst_v, worst_s, tol_eff, n_bad == 0)
