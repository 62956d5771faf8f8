"""Numerical audit of the structural hypotheses (q1)-(q7) and (f1)-(f7).

Every condition is sampled on a grid and tested through first differences
or pointwise slacks with a local tolerance.  Verdicts are three-valued:
"satisfied", "violated", or "inconclusive" when the margin sits below grid
resolution.  Inconclusive never silently becomes either of the other two;
theorem certificates require "satisfied" on every listed hypothesis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as _quadpack

from .errors import TailNotIntegrableError
from .weights import (
    Weight,
    WeightConstants,
    default_audit_grid,
    weight_constants,
)
from .nonlin import Nonlinearity

__all__ = [
    "SATISFIED",
    "VIOLATED",
    "INCONCLUSIVE",
    "HypothesisResult",
    "HypothesisReport",
    "check_q_hypotheses",
    "check_f_hypotheses",
    "certify_theorems",
    "full_report",
]

SATISFIED = "satisfied"
VIOLATED = "violated"
INCONCLUSIVE = "inconclusive"

REL_TOL = 1e-10


@dataclass
class HypothesisResult:
    name: str
    status: str
    margin: float
    witness: float | None
    strict: bool
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "margin": self.margin,
            "witness_r_or_s": self.witness,
            "strict": self.strict,
            "details": self.details,
        }

    @classmethod
    def from_dict(cls, name: str, d: dict) -> "HypothesisResult":
        return cls(
            name=name,
            status=d["status"],
            margin=d["margin"],
            witness=d["witness_r_or_s"],
            strict=d["strict"],
            details=d.get("details", {}),
        )


@dataclass
class HypothesisReport:
    weight: dict
    nonlinearity: dict | None
    constants: WeightConstants | None
    hypotheses: dict
    certificates: dict
    version: int = 1

    def to_dict(self) -> dict:
        const = None
        if self.constants is not None:
            const = {
                "H_inf": self.constants.H_inf,
                "ell_inf": self.constants.ell_inf,
                "G_bar": self.constants.G_bar,
                "identity_residual": self.constants.identity_residual,
                "C_q7": self.constants.C_q7,
                "a_q7": self.constants.a_q7,
            }
        return {
            "version": self.version,
            "weight": self.weight,
            "nonlinearity": self.nonlinearity,
            "constants": const,
            "hypotheses": {k: v.to_dict() for k, v in sorted(self.hypotheses.items())},
            "certificates": self.certificates,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HypothesisReport":
        const = None
        if d.get("constants") is not None:
            c = d["constants"]
            const = WeightConstants(
                H_inf=c["H_inf"],
                ell_inf=c["ell_inf"],
                G_bar=c["G_bar"],
                identity_residual=c["identity_residual"],
                C_q7=c["C_q7"],
                a_q7=c["a_q7"],
            )
        return cls(
            weight=d["weight"],
            nonlinearity=d.get("nonlinearity"),
            constants=const,
            hypotheses={
                k: HypothesisResult.from_dict(k, v)
                for k, v in d["hypotheses"].items()
            },
            certificates=d["certificates"],
            version=d.get("version", 1),
        )


# ---------------------------------------------------------------------------
# slack machinery


def _worst(statuses) -> str:
    if any(s == VIOLATED for s in statuses):
        return VIOLATED
    if any(s == INCONCLUSIVE for s in statuses):
        return INCONCLUSIVE
    return SATISFIED


def monotone_slack(xs, vs, *, direction: int, strict: bool, rel: float = REL_TOL):
    """First-difference monotonicity test.  direction +1 claims
    nondecreasing (strictly increasing when strict), -1 the reverse.
    Returns (status, margin, witness) with margin the minimal pairwise
    slack and witness the x where it occurs."""
    xs = np.asarray(xs, dtype=float)
    vs = np.asarray(vs, dtype=float)
    if len(vs) < 2 or not np.all(np.isfinite(vs)):
        return INCONCLUSIVE, math.nan, None
    d = direction * np.diff(vs)
    tol = rel * np.maximum(np.abs(vs[:-1]), np.abs(vs[1:])) + 1e-300
    i_min = int(np.argmin(d))
    margin = float(d[i_min])
    witness = float(xs[i_min])
    if np.any(d < -tol):
        i_bad = int(np.argmin(d + tol))
        return VIOLATED, float(d[i_bad]), float(xs[i_bad])
    ties = np.abs(d) <= tol
    if strict and bool(np.any(ties)):
        i_tie = int(np.argmax(ties))
        return INCONCLUSIVE, float(d[i_tie]), float(xs[i_tie])
    return SATISFIED, margin, witness


def pointwise_slack(xs, vs, threshold: float, *, strict: bool,
                    rel: float = REL_TOL):
    """Pointwise test of vs >= threshold (or > when strict)."""
    xs = np.asarray(xs, dtype=float)
    vs = np.asarray(vs, dtype=float)
    if len(vs) == 0 or not np.all(np.isfinite(vs)):
        return INCONCLUSIVE, math.nan, None
    slack = vs - threshold
    tol = rel * np.maximum(np.abs(vs), abs(threshold)) + 1e-300
    i_min = int(np.argmin(slack))
    margin = float(slack[i_min])
    witness = float(xs[i_min])
    if np.any(slack < -tol):
        return VIOLATED, margin, witness
    if strict and bool(np.any(np.abs(slack) <= tol)):
        return INCONCLUSIVE, margin, witness
    return SATISFIED, margin, witness


def _merge(name: str, parts: dict, strict: bool) -> HypothesisResult:
    """Combine named sub-checks {label: (status, margin, witness)} into a
    single hypothesis verdict; the reported margin/witness come from the
    weakest finite sub-margin."""
    status = _worst([p[0] for p in parts.values()])
    margin, witness = math.inf, None
    for label, (st, m, w) in parts.items():
        if math.isfinite(m) and m < margin:
            margin, witness = m, w
    if not math.isfinite(margin):
        margin = math.nan
    # a violated sub-check always supplies the reported margin
    for label, (st, m, w) in parts.items():
        if st == VIOLATED:
            margin, witness = m, w
            break
    details = {
        label: {"status": st, "margin": m, "witness": w}
        for label, (st, m, w) in parts.items()
    }
    return HypothesisResult(name, status, margin, witness, strict, details)


# ---------------------------------------------------------------------------
# weight side


def check_q_hypotheses(
    weight: Weight,
    grid: np.ndarray | None = None,
    constants: WeightConstants | None = None,
):
    """Audit (q1)-(q7) on a radial grid.  Returns (results, constants,
    table) so callers can reuse the sampled quantities."""
    if grid is None:
        grid = default_audit_grid()
    table = weight.grid_table(grid)
    if constants is None:
        constants = weight_constants(weight, table=table)
    rs = table["r"]
    q, qp = table["q"], table["q_prime"]
    results: dict[str, HypothesisResult] = {}

    # q1: positivity, q(0) = 0 via the local exponent r q'/q at the left edge
    p0 = float(rs[0] * qp[0] / q[0])
    results["q1"] = _merge("q1", {
        "q_positive": pointwise_slack(rs, q, 0.0, strict=True),
        "q_prime_positive": pointwise_slack(rs, qp, 0.0, strict=True),
        "q_vanishes_at_0": pointwise_slack(
            np.array([rs[0]]), np.array([p0]), 0.0, strict=True),
    }, strict=True)

    results["q2"] = _merge("q2", {
        "logderiv_decreasing": monotone_slack(rs, qp / q, direction=-1, strict=True),
    }, strict=True)

    H = table["H"]
    H_inf = constants.H_inf
    q3_parts = {
        "H_nonincreasing": monotone_slack(rs, H, direction=-1, strict=False),
        "H0_below_half": pointwise_slack(
            np.array([rs[0]]), np.array([0.5 - H[0]]), 0.0, strict=True),
    }
    if math.isfinite(H_inf):
        q3_parts["H_inf_positive"] = pointwise_slack(
            np.array([math.inf]), np.array([H_inf]), 0.0, strict=True)
        q3_parts["q_times_H_excess_nondecreasing"] = monotone_slack(
            rs, q * (H - H_inf), direction=+1, strict=False)
    else:
        q3_parts["H_inf_positive"] = (INCONCLUSIVE, math.nan, None)
        q3_parts["q_times_H_excess_nondecreasing"] = (INCONCLUSIVE, math.nan, None)
    results["q3"] = _merge("q3", q3_parts, strict=False)

    hp = table["h_prime"]
    ell = constants.ell_inf
    try:
        weight.tail(1.0)
        tail_ok = (SATISFIED, math.inf, None)
    except TailNotIntegrableError:
        tail_ok = (VIOLATED, -math.inf, 1.0)
    q4_parts = {
        "tail_integrable": tail_ok,
        # 1/q not integrable at 0 when the local exponent is >= 1
        "head_divergent": pointwise_slack(
            np.array([rs[0]]), np.array([p0]), 1.0, strict=False),
        "h_prime_positive": pointwise_slack(rs, hp, 0.0, strict=True),
        "h_prime_nonincreasing": monotone_slack(rs, hp, direction=-1, strict=False),
        "ell_inf_positive": pointwise_slack(
            np.array([math.inf]), np.array([ell]), 0.0, strict=True)
        if math.isfinite(ell) else (INCONCLUSIVE, math.nan, None),
    }
    results["q4"] = _merge("q4", q4_parts, strict=False)

    results["q5"] = _merge("q5", {
        "qprime_q_increasing": monotone_slack(rs, qp * q, direction=+1, strict=True),
    }, strict=True)

    G, h, ih = table["G"], table["h"], table["int_h"]
    gbar_diag = constants.diagnostics.get("G_bar", {})
    if not math.isfinite(constants.G_bar):
        sup_ok = (INCONCLUSIVE, math.nan, None)
    elif gbar_diag.get("sup_at_grid_edge") and not gbar_diag.get(
            "limit_diag", {}).get("converged", False):
        sup_ok = (INCONCLUSIVE, math.nan, float(rs[-1]))
    else:
        sup_ok = (SATISFIED, math.inf, gbar_diag.get("arg_sup"))
    results["q6"] = _merge("q6", {
        "G_nonnegative": pointwise_slack(rs, G, 0.0, strict=False),
        "G_sup_finite": sup_ok,
        "Gh_over_sqrt_int_h_nondecreasing": monotone_slack(
            rs, G * h / np.sqrt(ih), direction=+1, strict=False),
    }, strict=False)

    if constants.C_q7 is not None:
        results["q7"] = HypothesisResult(
            "q7", SATISFIED, 1.0 - constants.C_q7, None, False,
            {"C": constants.C_q7, "a": constants.a_q7})
    elif math.isfinite(constants.G_bar) and constants.G_bar > 1.0:
        results["q7"] = HypothesisResult(
            "q7", VIOLATED, 1.0 - constants.G_bar, None, False,
            {"reason": f"G_bar={constants.G_bar} exceeds 1; no admissible C"})
    else:
        results["q7"] = HypothesisResult(
            "q7", INCONCLUSIVE, math.nan, None, False,
            {"reason": constants.diagnostics.get("q7", {}).get(
                "reason", "coarse search found no pair")})
    return results, constants, table


# ---------------------------------------------------------------------------
# nonlinearity side


def check_f_hypotheses(
    nonlin: Nonlinearity,
    constants: WeightConstants | None = None,
    s_max: float | None = None,
    n: int = 2000,
):
    """Audit (f1)-(f7) by sampling on log-spaced level grids.  The weight
    limit constants feed the thresholds of (f3), (f6), (f7)."""
    b, beta = nonlin.b, nonlin.beta
    if s_max is None:
        s_max = 100.0 * beta
    s_max = min(s_max, nonlin.c * (1.0 - 1e-9)) if math.isfinite(nonlin.c) else s_max
    results: dict[str, HypothesisResult] = {}

    s_low = np.linspace(0.0, b, 400)
    f_low = np.asarray(nonlin.f(s_low), dtype=float)
    s_pos = np.geomspace(b * (1.0 + 1e-6), s_max, n)
    f_pos = np.asarray(nonlin.f(s_pos), dtype=float)
    odd_res = float(np.max(np.abs(
        np.asarray(nonlin.f(-s_pos), dtype=float) + f_pos)))
    f_scale = float(np.max(np.abs(f_pos)))
    F_beta = abs(float(nonlin.F(beta)))
    F_scale = max(abs(float(nonlin.F(b))), abs(float(nonlin.F(s_max))))
    results["f1"] = _merge("f1", {
        "f_at_0": pointwise_slack(
            np.array([0.0]), np.array([1e-12 - abs(float(nonlin.f(0.0)))]),
            0.0, strict=False),
        "odd": pointwise_slack(
            np.array([beta]), np.array([1e-10 * f_scale - odd_res]), 0.0,
            strict=False),
        "nonpositive_before_b": pointwise_slack(s_low, -f_low, 0.0, strict=False),
        "not_identically_zero": pointwise_slack(
            np.array([b / 2.0]), np.array([float(np.max(np.abs(f_low)))]),
            0.0, strict=True),
        "positive_past_b": pointwise_slack(s_pos, f_pos, 0.0, strict=True),
        "ordering": pointwise_slack(
            np.array([beta]), np.array([beta - b]), 0.0, strict=True),
        "F_zero_at_beta": pointwise_slack(
            np.array([beta]), np.array([1e-9 * max(1.0, F_scale) - F_beta]),
            0.0, strict=False),
    }, strict=False)

    fp_pos = np.asarray(nonlin.f_prime(s_pos), dtype=float)
    fp_finite = bool(np.all(np.isfinite(fp_pos)))
    # f' in L1(0,1): nested integrals of |f'| must settle as the lower
    # endpoint approaches 0
    tot_prev, settled = None, False
    for lo in (1e-3, 1e-6, 1e-9, 1e-12):
        tot = _quadpack.quad(lambda t: abs(float(nonlin.f_prime(t))), lo,
                             min(1.0, s_max), limit=200)[0]
        if tot_prev is not None and abs(tot - tot_prev) <= 1e-6 * max(1.0, tot):
            settled = True
        tot_prev = tot
    results["f2"] = _merge("f2", {
        "f_prime_finite": (SATISFIED if fp_finite else VIOLATED,
                           math.inf if fp_finite else -math.inf, None),
        "f_prime_L1_near_0": (SATISFIED if settled else INCONCLUSIVE,
                              math.inf if settled else math.nan, None),
    }, strict=False)

    s_beta = np.geomspace(beta * (1.0 + 1e-6), s_max, n)
    dFf = np.array([nonlin.d_ratio_Ff(float(s)) for s in s_beta])
    tail = nonlin.d_ratio_tail_limit()
    if tail is not None:
        s_beta_ext = np.concatenate([s_beta, [math.inf]])
        dFf_ext = np.concatenate([dFf, [tail]])
    else:
        s_beta_ext, dFf_ext = s_beta, dFf

    H_inf = constants.H_inf if constants is not None else math.nan
    if math.isfinite(H_inf):
        results["f3"] = _merge("f3", {
            "ratio_derivative_bound": pointwise_slack(
                s_beta_ext, dFf_ext, 0.5 * (1.0 - 2.0 * H_inf), strict=False),
        }, strict=False)
    else:
        results["f3"] = HypothesisResult(
            "f3", INCONCLUSIVE, math.nan, None, False,
            {"reason": "H_inf unavailable"})

    sfp_over_f = s_pos * fp_pos / f_pos
    results["f4"] = _merge("f4", {
        "s_fprime_over_f_decreasing": monotone_slack(
            s_pos, sfp_over_f, direction=-1, strict=True),
    }, strict=True)

    s_b = np.concatenate([[b], s_pos])
    f5_vals = np.asarray(nonlin.f(s_b), dtype=float) - np.asarray(
        nonlin.f_prime(s_b), dtype=float) * (s_b - b)
    results["f5"] = _merge("f5", {
        "superposition_bound": pointwise_slack(s_b, f5_vals, 0.0, strict=False),
    }, strict=False)

    ell = constants.ell_inf if constants is not None else math.nan
    crit = float(beta * nonlin.f_prime(beta) / nonlin.f(beta))
    if math.isfinite(ell):
        results["f6"] = _merge("f6", {
            "beta_slope_bound": pointwise_slack(
                np.array([beta]), np.array([(1.0 + 2.0 * ell) - crit]), 0.0,
                strict=False),
        }, strict=False)
        results["f6"].details["value"] = crit
        results["f6"].details["threshold"] = 1.0 + 2.0 * ell
    else:
        results["f6"] = HypothesisResult(
            "f6", INCONCLUSIVE, math.nan, None, False,
            {"reason": "ell_inf unavailable", "value": crit})

    C = constants.C_q7 if constants is not None else None
    if C is not None:
        results["f7"] = _merge("f7", {
            "ratio_derivative_above_C": pointwise_slack(
                s_beta_ext, dFf_ext, C, strict=False),
        }, strict=False)
        results["f7"].details["C"] = C
    else:
        results["f7"] = HypothesisResult(
            "f7", INCONCLUSIVE, math.nan, None, False,
            {"reason": "no (q7) constant C available"})
    return results


# ---------------------------------------------------------------------------
# certificates


_THEOREMS = {
    "theorem_1": (["q1", "q2", "q3", "f1", "f2", "f3"], "ground state"),
    "theorem_2": (["q1", "q2", "q4", "f1", "f2", "f4"], "ground state"),
    "theorem_4": (["q1", "q2", "q4", "q6", "q7", "f1", "f2", "f7"],
                  "k-th bound state for every k"),
}
_T3_BASE = ["q1", "q2", "q3", "q4", "q5", "f1", "f2"]
_T3_ROUTES = {"i": ["f3", "f5"], "ii": ["f4", "f6"]}


def certify_theorems(hypotheses: dict, constants: WeightConstants | None = None) -> dict:
    """Issue per-theorem certificates: certified only when every listed
    hypothesis reads "satisfied"."""

    def missing(names):
        return [n for n in names
                if hypotheses.get(n) is None or hypotheses[n].status != SATISFIED]

    certificates: dict = {}
    for key, (names, scope) in _THEOREMS.items():
        miss = missing(names)
        cert = {"certified": not miss, "scope": scope, "missing": miss}
        if key == "theorem_4" and not miss and constants is not None:
            cert["C"] = constants.C_q7
            cert["a"] = constants.a_q7
        certificates[key] = cert

    base_miss = missing(_T3_BASE)
    routes = {}
    for route, extra in _T3_ROUTES.items():
        miss = base_miss + missing(extra)
        routes[route] = {"certified": not miss, "missing": miss}
    certificates["theorem_3"] = {
        "certified": any(r["certified"] for r in routes.values()),
        "scope": "ground state and second bound state",
        "routes": routes,
    }
    return {k: certificates[k] for k in sorted(certificates)}


def full_report(
    weight: Weight,
    nonlin: Nonlinearity | None,
    grid: np.ndarray | None = None,
    s_max: float | None = None,
    f_grid_n: int = 2000,
) -> HypothesisReport:
    """Run both audits and assemble the certified report."""
    q_results, constants, _table = check_q_hypotheses(weight, grid=grid)
    hypotheses = dict(q_results)
    nl_desc = None
    if nonlin is not None:
        hypotheses.update(check_f_hypotheses(
            nonlin, constants, s_max=s_max, n=f_grid_n))
        nl_desc = nonlin.describe()
    certificates = certify_theorems(hypotheses, constants)
    return HypothesisReport(
        weight=weight.describe(),
        nonlinearity=nl_desc,
        constants=constants,
        hypotheses=hypotheses,
        certificates=certificates,
    )
