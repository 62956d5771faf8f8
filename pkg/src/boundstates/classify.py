"""Membership classification N_k / G_k / P_k and bound-state location.

The decisive facts: the energy I = u'^2 + 2F(u) is nonincreasing and
equals u'^2 at any u-zero, so I < 0 forbids further sign changes; N_k and
P_k are open, so bisection between them brackets a G_k point.  Exact
double zeros are a codimension-one event, so G_k is reported as a
within-tolerance label around the ball u^2 + u'^2 <= eps^2 or a close
approach below the classification tolerance.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import BracketError, ConfigError, UndecidedError
from .shooting import (
    Problem,
    Trajectory,
    asymptotic_tail_test,
    default_eps_dz,
    extract_markers,
    integrate,
)

__all__ = [
    "LevelRecord",
    "ClassificationResult",
    "BoundStateBracket",
    "SweepRow",
    "SweepResult",
    "SeparationReport",
    "IntersectionReport",
    "classify",
    "find_kth_bound_state",
    "uniqueness_sweep",
    "verify_separation",
    "intersection_scan",
    "DEFAULT_G_TOL",
]

DEFAULT_G_TOL = 1e-3

_CODE = {"N": "N", "G": "G", "P": "P", "FT": "FT", "UND": "UND"}


@dataclass
class LevelRecord:
    k: int
    membership: str  # N_k | G_k_within_tol | P_k | Ftilde_k | undecided
    Z: float | None = None
    T: float | None = None
    slope_at_Z: float | None = None

    def code(self) -> str:
        m = {"N_k": "N", "G_k_within_tol": "G", "P_k": "P",
             "Ftilde_k": "FT", "undecided": "UND"}[self.membership]
        return f"{m}{self.k}"


@dataclass
class ClassificationResult:
    alpha: float
    k_max: int
    records: list
    pn_side: str  # 'N' | 'P' | 'G' | 'UND'  (side at level k_max)
    ball_min: float  # min of sqrt(u^2+u'^2)/scale on the deciding approach
    g_tol: float
    tail: object = None
    r_max_used: float = math.nan
    doubled: bool = False
    trajectory: Trajectory | None = None

    @property
    def terminal_k(self) -> int:
        return self.records[-1].k

    @property
    def membership(self) -> str:
        return self.records[-1].membership

    def membership_code(self) -> str:
        return self.records[-1].code()

    def record_at(self, k: int):
        for rec in self.records:
            if rec.k == k:
                return rec
        return None

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "k_max": self.k_max,
            "records": [{"k": r.k, "membership": r.membership, "Z": r.Z,
                         "T": r.T, "slope_at_Z": r.slope_at_Z}
                        for r in self.records],
            "terminal_k": self.terminal_k,
            "membership_code": self.membership_code(),
            "pn_side": self.pn_side,
            "ball_min": self.ball_min,
            "g_tol": self.g_tol,
            "r_max_used": self.r_max_used,
            "doubled": self.doubled,
            "tail": None if self.tail is None else {
                "converged": self.tail.converged, "ell": self.tail.ell,
                "matched_zero": self.tail.matched_zero,
                "residual_f": self.tail.residual_f, "reason": self.tail.reason,
            },
        }


def _close_approach(traj: Trajectory, r_lo: float, r_hi: float,
                    n: int = 600) -> float:
    """Minimum of sqrt(u^2 + u'^2) sampled densely on [r_lo, r_hi]."""
    if r_hi <= r_lo:
        return math.inf
    rs = np.linspace(r_lo, r_hi, n)
    best = math.inf
    for r in rs:
        u, v = traj.eval(float(r))
        best = min(best, math.hypot(u, v))
    return best


def classify(problem: Problem, alpha: float, k_max: int = 1,
             tol: float = DEFAULT_G_TOL, *, rtol: float = 1e-10,
             r_max: float | None = None, shortcut: bool = True,
             keep_trajectory: bool = False) -> ClassificationResult:
    """Classify an initial value up to level k_max.

    Values with F(alpha) < 0 are settled by the energy shortcut (I(0) < 0
    forbids any sign change).  Otherwise the IVP is integrated with
    terminal events: the double-zero ball (G), energy dropping below zero
    (P at the current level), and the k_max-th transversal sign change
    (N).  An undecided horizon is retried once at double the radius and
    then reported as undecided, never coerced."""
    if k_max < 1:
        raise ConfigError(f"k_max must be >= 1, got {k_max}")
    if not tol > 0.0:
        raise ConfigError(f"tol must be positive, got {tol}")
    nl = problem.nonlin
    if not alpha > 0.0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    if alpha >= nl.c:
        raise ConfigError(f"alpha={alpha} outside the domain (0, {nl.c})")
    scale = max(1.0, alpha)
    if shortcut and float(nl.F(alpha)) < 0.0:
        rec = LevelRecord(1, "P_k")
        return ClassificationResult(alpha, k_max, [rec], "P", math.inf, tol)

    doubled = False
    traj = integrate(problem, alpha, r_max=r_max, rtol=rtol,
                     stop_energy=True, k_cap=k_max)
    result = _decide(problem, traj, alpha, k_max, tol, scale)
    if result is None:
        doubled = True
        traj = integrate(problem, alpha, r_max=2.0 * traj.r_end, rtol=rtol,
                         stop_energy=True, k_cap=k_max)
        result = _decide(problem, traj, alpha, k_max, tol, scale)
    if result is None:
        m = extract_markers(traj, k_max)
        records = _n_records(m)
        records.append(LevelRecord(len(m.Z) + 1, "undecided"))
        result = ClassificationResult(alpha, k_max, records, "UND",
                                      math.inf, tol,
                                      tail=asymptotic_tail_test(traj))
    result.doubled = doubled
    result.r_max_used = traj.r_end
    if keep_trajectory:
        result.trajectory = traj
    return result


def _n_records(m) -> list:
    records = []
    for j, Z in enumerate(m.Z):
        T = m.T[j] if j < len(m.T) else None
        records.append(LevelRecord(j + 1, "N_k", Z, T, abs(m.slopes[j])))
    return records


def _decide(problem, traj, alpha, k_max, tol, scale):
    """Map a finished integration to a result, or None when undecided."""
    m = extract_markers(traj, k_max)
    crossings = len(m.Z)
    records = _n_records(m)
    g_skin = tol * scale

    if traj.stop_reason == "double_zero":
        level = crossings + 1
        r_dz = m.double_zero_r if m.double_zero_r is not None else traj.r_end
        records.append(LevelRecord(level, "G_k_within_tol", r_dz, None, 0.0))
        # an exact double zero sits dead center; bisection treats it as the
        # N side so the bracket keeps straddling it
        return ClassificationResult(alpha, k_max, records, "G",
                                    traj.eps_dz / scale, tol, trajectory=None)

    if traj.stop_reason == "zero_cap" or crossings >= k_max:
        rec = records[k_max - 1]
        # at a transversal crossing |u(Z_k)| = 0, so the approach metric
        # reduces to the slope there
        ball = abs(rec.slope_at_Z) / scale
        records = records[:k_max]
        if ball <= tol:
            records[-1] = LevelRecord(k_max, "G_k_within_tol", rec.Z, rec.T,
                                      rec.slope_at_Z)
            return ClassificationResult(alpha, k_max, records, "N", ball, tol)
        return ClassificationResult(alpha, k_max, records, "N", ball, tol)

    level = crossings + 1
    start = m.Z[-1] if m.Z else (m.T[-1] if m.T else traj.r_start)

    if traj.stop_reason == "negative_energy":
        ball = _close_approach(traj, start, traj.r_end) / scale
        if ball <= tol:
            records.append(LevelRecord(level, "G_k_within_tol", None, None, None))
            return ClassificationResult(alpha, k_max, records, "P", ball, tol)
        records.append(LevelRecord(level, "P_k"))
        return ClassificationResult(alpha, k_max, records, "P", ball, tol)

    # horizon reached: try the tail test
    tail = asymptotic_tail_test(traj)
    if tail.converged and tail.matched_zero is not None and tail.matched_zero != 0.0:
        ball = _close_approach(traj, start, traj.r_end) / scale
        records.append(LevelRecord(level, "Ftilde_k"))
        return ClassificationResult(alpha, k_max, records, "P", ball, tol,
                                    tail=tail)
    return None


def _side_for_bisection(res: ClassificationResult) -> str:
    if res.pn_side == "UND":
        raise UndecidedError(
            f"alpha={res.alpha} undecided at horizon {res.r_max_used:.6g} "
            "after one doubling"
        )
    return "N" if res.pn_side in ("N", "G") else "P"


@dataclass
class BoundStateBracket:
    k: int
    lo: float
    hi: float
    alpha_star: float
    width: float
    slope_at_Zk: float | None
    orientation: str  # P_below_N_above | N_below_P_above

    def to_dict(self) -> dict:
        return {"k": self.k, "lo": self.lo, "hi": self.hi,
                "alpha_star": self.alpha_star, "width": self.width,
                "slope_at_Zk": self.slope_at_Zk,
                "orientation": self.orientation}


def find_kth_bound_state(problem: Problem, k: int, alpha_lo: float,
                         alpha_hi: float, tol: float = 1e-8, *,
                         rtol: float = 1e-10, g_tol: float = DEFAULT_G_TOL,
                         max_iter: int = 200) -> BoundStateBracket:
    """Bisect between a P_k-side and an N_k-side initial value until the
    bracket width drops below tol; the bracket straddles a G_k point."""
    if not alpha_lo < alpha_hi:
        raise ConfigError(f"need alpha_lo < alpha_hi, got [{alpha_lo}, {alpha_hi}]")
    if not tol > 0.0:
        raise ConfigError(f"tol must be positive, got {tol}")
    res_lo = classify(problem, alpha_lo, k, g_tol, rtol=rtol)
    res_hi = classify(problem, alpha_hi, k, g_tol, rtol=rtol)
    side_lo = _side_for_bisection(res_lo)
    side_hi = _side_for_bisection(res_hi)
    if side_lo == side_hi:
        raise BracketError(
            f"both endpoints classify on the {side_lo} side at level {k}: "
            f"{res_lo.membership_code()} at {alpha_lo}, "
            f"{res_hi.membership_code()} at {alpha_hi}"
        )
    lo, hi = alpha_lo, alpha_hi
    n_res = res_hi if side_hi == "N" else res_lo
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        res = classify(problem, mid, k, g_tol, rtol=rtol)
        side = _side_for_bisection(res)
        if side == side_lo:
            lo = mid
        else:
            hi = mid
            if side_hi == "N":
                n_res = res
        if side == "N" and side_lo == "N":
            n_res = res
    else:
        raise BracketError(
            f"bisection did not reach width {tol} in {max_iter} iterations"
        )
    rec = n_res.record_at(k)
    slope = rec.slope_at_Z if rec is not None else None
    orientation = "P_below_N_above" if side_lo == "P" else "N_below_P_above"
    return BoundStateBracket(k, lo, hi, 0.5 * (lo + hi), hi - lo, slope,
                             orientation)


@dataclass
class SweepRow:
    alpha: float
    terminal_k: int
    membership_code: str
    Z_k: float
    slope: float
    side: str


@dataclass
class SweepResult:
    k: int
    step: float
    rows: list
    transitions: list  # (alpha_left, alpha_right, side_left, side_right)
    brackets: list

    def to_dict(self) -> dict:
        return {
            "k": self.k, "step": self.step,
            "transitions": [list(t) for t in self.transitions],
            "brackets": [b.to_dict() for b in self.brackets],
        }


def _sweep_row(problem, alpha, k, g_tol, rtol) -> SweepRow:
    res = classify(problem, alpha, k, g_tol, rtol=rtol)
    rec = res.record_at(k)
    Z = rec.Z if rec is not None and rec.Z is not None else math.nan
    slope = rec.slope_at_Z if rec is not None and rec.slope_at_Z is not None else math.nan
    return SweepRow(alpha, res.terminal_k, res.membership_code(), Z, slope,
                    res.pn_side)


def uniqueness_sweep(problem: Problem, k: int, alpha_lo: float,
                     alpha_hi: float, step: float | None = None, *,
                     refine_tol: float = 1e-8, rtol: float = 1e-10,
                     g_tol: float = DEFAULT_G_TOL,
                     threads: int = 1) -> SweepResult:
    """Classify a grid of initial values at level k and refine every
    P-to-N transition into a G_k bracket.  An empty bracket list is a
    valid outcome (for instance on (b, beta))."""
    nl = problem.nonlin
    if step is None:
        step = 0.05 * nl.beta
    if not step > 0.0:
        raise ConfigError(f"step must be positive, got {step}")
    if not alpha_lo < alpha_hi:
        raise ConfigError(f"empty sweep range [{alpha_lo}, {alpha_hi}]")
    n = int(math.floor((alpha_hi - alpha_lo) / step + 1e-9))
    grid = [alpha_lo + step * j for j in range(n + 1)]
    if grid[0] <= 0.0:
        grid[0] = min(grid[0] + 0.5 * step, 0.5 * (grid[0] + grid[1]) if len(grid) > 1 else alpha_hi)

    def job(a):
        return _sweep_row(problem, a, k, g_tol, rtol)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            rows = list(ex.map(job, grid))
    else:
        rows = [job(a) for a in grid]

    transitions = []
    brackets = []
    for i in range(len(rows) - 1):
        a, b = rows[i], rows[i + 1]
        sa = "N" if a.side in ("N", "G") else a.side
        sb = "N" if b.side in ("N", "G") else b.side
        if sa in ("P", "N") and sb in ("P", "N") and sa != sb:
            transitions.append((a.alpha, b.alpha, a.side, b.side))
            brackets.append(find_kth_bound_state(
                problem, k, a.alpha, b.alpha, refine_tol, rtol=rtol,
                g_tol=g_tol))
    return SweepResult(k, step, rows, transitions, brackets)


@dataclass
class SeparationReport:
    k: int
    delta: float
    pairs: list  # dicts with alpha_1, alpha_2, Z_1, Z_2, slope_1, slope_2, ok
    below_alpha: float
    below_code: str
    below_ok: bool
    all_ok: bool

    def to_dict(self) -> dict:
        return {"k": self.k, "delta": self.delta, "pairs": self.pairs,
                "below_alpha": self.below_alpha, "below_code": self.below_code,
                "below_ok": self.below_ok, "all_ok": self.all_ok}


def verify_separation(problem: Problem, bracket: BoundStateBracket,
                      delta: float = 1e-3, n_pairs: int = 5, *,
                      rtol: float = 1e-10,
                      g_tol: float = DEFAULT_G_TOL) -> SeparationReport:
    """Sample n_pairs+1 initial values on the N side within delta of the
    bracket and check, pair by pair with alpha_1 < alpha_2, that
    Z_k(alpha_1) > Z_k(alpha_2) and |u'(Z_k(alpha_1))| < |u'(Z_k(alpha_2))|;
    then check that a value just below the bracket classifies P_k.  The
    below-probe mirrors the first N-side offset, so a delta small enough
    to land inside the G skin honestly fails the P_k check."""
    if not delta > 0.0:
        raise ConfigError(f"delta must be positive, got {delta}")
    if n_pairs < 1:
        raise ConfigError(f"n_pairs must be >= 1, got {n_pairs}")
    k = bracket.k
    n_above = bracket.orientation == "P_below_N_above"
    offsets = [delta * (j + 1) / (n_pairs + 1) for j in range(n_pairs + 1)]
    if n_above:
        alphas = sorted(bracket.hi + o for o in offsets)
    else:
        alphas = sorted(bracket.lo - o for o in offsets)
    if any(a2 - a1 <= 0.0 for a1, a2 in zip(alphas, alphas[1:])):
        raise ConfigError("degenerate pair: sampled alphas coincide")
    results = []
    for a in alphas:
        res = classify(problem, a, k, g_tol, rtol=rtol)
        rec = res.record_at(k)
        if res.pn_side not in ("N", "G") or rec is None or rec.Z is None:
            raise BracketError(
                f"alpha={a} classifies {res.membership_code()}, not on the "
                f"N side at level {k}; delta={delta} is outside proposition scope"
            )
        results.append((a, rec.Z, abs(rec.slope_at_Z)))
    pairs = []
    all_ok = True
    for (a1, Z1, s1), (a2, Z2, s2) in zip(results, results[1:]):
        ok = Z1 > Z2 and s1 < s2
        all_ok &= ok
        pairs.append({"alpha_1": a1, "alpha_2": a2, "Z_1": Z1, "Z_2": Z2,
                      "slope_1": s1, "slope_2": s2, "ok": ok})
    off = max(10.0 * bracket.width, offsets[0])
    below = bracket.lo - off if n_above else bracket.hi + off
    res_b = classify(problem, below, k, g_tol, rtol=rtol)
    below_ok = res_b.pn_side == "P"
    all_ok &= below_ok
    return SeparationReport(k, delta, pairs, below, res_b.membership_code(),
                            below_ok, bool(all_ok))


@dataclass
class IntersectionReport:
    first: tuple | None  # (r_I, U_I)
    points: list

    def to_dict(self) -> dict:
        return {"first": list(self.first) if self.first else None,
                "points": [list(p) for p in self.points]}


def intersection_scan(traj1: Trajectory, traj2: Trajectory,
                      window: tuple, n: int = 2000) -> IntersectionReport:
    """Locate radii where the two solutions cross, by a sign-change scan
    of u_1 - u_2 over the window refined by root-finding."""
    r_lo, r_hi = float(min(window)), float(max(window))
    hi_cap = min(traj1.r_end if traj1.zero_extension_from is None else traj1.r_end,
                 traj2.r_end if traj2.zero_extension_from is None else traj2.r_end)
    r_hi = min(r_hi, hi_cap)
    if r_hi <= r_lo:
        return IntersectionReport(None, [])
    d = lambda r: traj1.eval(float(r))[0] - traj2.eval(float(r))[0]
    rs = np.linspace(r_lo, r_hi, n)
    vals = np.array([d(r) for r in rs])
    points = []
    for i in range(len(rs) - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            r_c = float(rs[i])
        elif a * b < 0.0:
            r_c = float(brentq(d, float(rs[i]), float(rs[i + 1]),
                               xtol=1e-13, rtol=1e-12))
        else:
            continue
        u_c = 0.5 * (traj1.eval(r_c)[0] + traj2.eval(r_c)[0])
        if points and abs(r_c - points[-1][0]) <= 1e-9 * max(1.0, r_c):
            continue
        points.append((r_c, u_c))
    first = points[0] if points else None
    return IntersectionReport(first, points)
