"""Linearized (variational) equation phi = du/dalpha along a trajectory.

phi solves phi'' + (q'/q) phi' + f'(u) phi = 0 with phi(0) = 1,
phi'(0) = 0, integrated jointly with u so f'(u) is exact rather than
interpolated.  The zero structure of phi tracks how nearby trajectories
intersect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NumericError
from .shooting import Problem, Trajectory, integrate

__all__ = [
    "VariationTrajectory",
    "PropositionCheck",
    "PhiPropositionReport",
    "integrate_variation",
    "first_zero_of_phi",
    "check_phi_propositions",
    "level_crossing",
]


@dataclass
class VariationTrajectory:
    alpha: float
    base: Trajectory
    zeros: list  # ordered radii where phi vanishes

    def phi(self, r: float) -> float:
        return self.base.phi_eval(r)[0]

    def phiprime(self, r: float) -> float:
        return self.base.phi_eval(r)[1]

    def nodes(self):
        rs = self.base.nodes_r
        return rs, self.base.sol.y[2], self.base.sol.y[3]


def integrate_variation(base: Trajectory, subsamples: int = 12) -> VariationTrajectory:
    """Integrate the joint (u, phi) system over the base span and locate
    every zero of phi to 1e-10.  f'(u) across u-zeros is capped on the
    window |u| < 1e-12 (f' is L^1 there, the cap changes phi below
    tolerance); the base trajectory is re-integrated jointly so both
    components share the adaptive step."""
    if base.variational:
        traj = base
    else:
        traj = integrate(
            base.problem, base.alpha, r_max=base.r_end, rtol=base.rtol,
            variational=True, energy_guard=False,
        )
    zeros: list[float] = []
    rs = traj.nodes_r
    phi_of = lambda r: traj.phi_eval(float(r))[0]
    for i in range(len(rs) - 1):
        lo, hi = float(rs[i]), float(rs[i + 1])
        if traj.zero_extension_from is not None and lo >= traj.zero_extension_from:
            break
        grid = np.linspace(lo, hi, subsamples + 1)
        vals = np.array([phi_of(r) for r in grid])
        for j in range(subsamples):
            a, b = vals[j], vals[j + 1]
            if a == 0.0:
                if not zeros or abs(grid[j] - zeros[-1]) > 1e-9 * max(1.0, grid[j]):
                    zeros.append(float(grid[j]))
            elif a * b < 0.0:
                root = float(brentq(phi_of, grid[j], grid[j + 1],
                                    xtol=1e-14, rtol=1e-12))
                if not zeros or abs(root - zeros[-1]) > 1e-9 * max(1.0, root):
                    zeros.append(root)
    return VariationTrajectory(traj.alpha, traj, zeros)


def first_zero_of_phi(vt: VariationTrajectory):
    """First radius where phi vanishes, or None on the computed span."""
    return vt.zeros[0] if vt.zeros else None


def level_crossing(traj: Trajectory, level: float):
    """First radius where u crosses the given level, or None."""
    if traj.alpha == level:
        return 0.0
    g = lambda r: traj.eval(float(r))[0] - level
    rs = traj.nodes_r
    v0 = traj.alpha - level
    for i in range(len(rs) - 1):
        a, b = g(rs[i]), g(rs[i + 1])
        if a == 0.0:
            return float(rs[i])
        if a * b < 0.0:
            return float(brentq(g, float(rs[i]), float(rs[i + 1]),
                                xtol=1e-14, rtol=1e-12))
    # the series region can contain the crossing only if the drop there
    # already exceeds alpha - level, which _pick_r_start rules out
    return None


@dataclass
class PropositionCheck:
    name: str
    status: str  # satisfied | violated | skipped | ambiguous
    margin: float = math.nan
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status,
                "margin": self.margin, "details": dict(self.details)}


@dataclass
class PhiPropositionReport:
    alpha: float
    r1: float | None
    r_b: float | None
    r_beta: float | None
    ambiguous: bool
    checks: list

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha, "r1": self.r1, "r_b": self.r_b,
            "r_beta": self.r_beta, "ambiguous": self.ambiguous,
            "checks": [c.to_dict() for c in self.checks],
        }


def check_phi_propositions(vt: VariationTrajectory, *, f6_satisfied=None,
                           n: int = 400) -> PhiPropositionReport:
    """Verify, with margins, on the first down branch:

      (a) r -> h(r) u'(r)/u(r) strictly decreasing on (r1, r(b, alpha));
      (b) phi < 0 on (r1, r(b, alpha)];
      (c) (phi + h phi')(r(b, alpha)) < 0;
      (d) phi'(r(b, alpha)) < 0, applicable only when (f6) holds.

    Preconditions (first phi-zero r1 exists, r1 < r(b, alpha), and
    r1 <= r(beta, alpha)) are verified here; unmet ones skip the checks
    with a reason.  When r1 sits within tolerance of r(beta, alpha) the
    case split is ambiguous and both margins are reported."""
    base = vt.base
    nl = base.problem.nonlin
    w = base.problem.weight
    r1 = first_zero_of_phi(vt)
    r_b = level_crossing(base, nl.b)
    r_beta = level_crossing(base, nl.beta) if base.alpha > nl.beta else None
    checks: list[PropositionCheck] = []
    ambiguous = False

    def skip_all(reason: str):
        for name in ("a_hu_over_u_decreasing", "b_phi_negative",
                     "c_phi_plus_h_phiprime", "d_phiprime_negative"):
            checks.append(PropositionCheck(name, "skipped", details={"reason": reason}))
        return PhiPropositionReport(base.alpha, r1, r_b, r_beta, False, checks)

    if r1 is None:
        return skip_all("phi has no zero on the computed span")
    if r_b is None:
        return skip_all("u does not reach b on the computed span")
    if r1 >= r_b:
        return skip_all(f"first phi-zero r1={r1:.6g} not below r(b)={r_b:.6g}")
    if r_beta is not None:
        gap = (r_beta - r1) / max(1.0, r_beta)
        if abs(gap) <= 1e-6:
            ambiguous = True
        elif gap < 0.0:
            return skip_all(
                f"first phi-zero r1={r1:.6g} beyond r(beta)={r_beta:.6g}")

    rs = np.linspace(r1, r_b, n + 1)[1:]
    uv = np.array([base.eval(float(r)) for r in rs])
    hs = np.array([float(w.h(float(r))) for r in rs])
    with np.errstate(divide="ignore", invalid="ignore"):
        g = hs * uv[:, 1] / uv[:, 0]
    dg = np.diff(g)
    scale = np.max(np.abs(g)) + 1e-300
    m_a = float(-np.max(dg) / scale)
    checks.append(PropositionCheck(
        "a_hu_over_u_decreasing",
        "satisfied" if m_a > 0.0 else "violated", m_a,
        {"window": [float(r1), float(r_b)]}))

    phis = np.array([vt.phi(float(r)) for r in rs])
    m_b = float(-np.max(phis) / (np.max(np.abs(phis)) + 1e-300))
    checks.append(PropositionCheck(
        "b_phi_negative", "satisfied" if m_b > 0.0 else "violated", m_b,
        {"max_phi": float(np.max(phis))}))

    phi_b, psi_b = base.phi_eval(r_b)
    h_b = float(w.h(r_b))
    val_c = phi_b + h_b * psi_b
    m_c = -val_c / (abs(val_c) + 1e-300)
    checks.append(PropositionCheck(
        "c_phi_plus_h_phiprime", "satisfied" if val_c < 0.0 else "violated",
        float(m_c), {"value": float(val_c)}))

    if f6_satisfied:
        m_d = -psi_b / (abs(psi_b) + 1e-300)
        checks.append(PropositionCheck(
            "d_phiprime_negative", "satisfied" if psi_b < 0.0 else "violated",
            float(m_d), {"value": float(psi_b)}))
    else:
        checks.append(PropositionCheck(
            "d_phiprime_negative", "skipped",
            details={"reason": "(f6) not certified for this model"}))

    if ambiguous:
        for c in checks:
            if c.status != "skipped":
                c.details["case_r1_le_rbeta"] = {"status": c.status,
                                                 "margin": c.margin}
                c.details["case_r1_gt_rbeta"] = {"status": "skipped",
                                                 "reason": "precondition fails in this case"}
                c.status = "ambiguous"
    return PhiPropositionReport(base.alpha, r1, r_b, r_beta, ambiguous, checks)
