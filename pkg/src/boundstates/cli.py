"""Command-line entry point.

Usage: boundstates COMMAND --config FILE [--out DIR] [--tol X] [--strict]
[--threads N] [--seed N] [--timestamps]

Commands: check, solve, classify, find, sweep, trace, separation.  All
numeric inputs come from the config file; --tol overrides the command's
primary tolerance.  Exit codes: 0 ran, 2 config error, 3 numeric failure,
4 undecided outcome under --strict (1: hypothesis violations under
--strict check).
"""

from __future__ import annotations

import argparse
import math
import os
import sys

from .classify import (
    DEFAULT_G_TOL,
    classify,
    find_kth_bound_state,
    uniqueness_sweep,
    verify_separation,
)
from .config import RunConfig, build_problem, load_config
from .errors import ConfigError, NumericError, UndecidedError
from .functionals import (
    TRACE_NAMES,
    branch_inverse,
    monotonicity_monitor,
    trace_S12,
    trace_functional,
)
from .hypotheses import full_report
from .reporting import artifact_meta, write_csv, write_json
from .shooting import integrate
from .variation import integrate_variation

__all__ = ["main"]


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="boundstates",
        description="bound-state shooting, hypothesis audits, and "
                    "classification sweeps for weighted radial equations",
    )
    ap.add_argument("command", choices=["check", "solve", "classify", "find",
                                        "sweep", "trace", "separation"])
    ap.add_argument("--config", required=True, help="path to the dotted-key config file")
    ap.add_argument("--out", default="out", help="output directory (default: out)")
    ap.add_argument("--tol", type=float, default=None,
                    help="override the command's primary tolerance")
    ap.add_argument("--strict", action="store_true",
                    help="nonzero exit on violated hypotheses or undecided outcomes")
    ap.add_argument("--threads", type=int, default=1, help="sweep parallelism")
    ap.add_argument("--seed", type=int, default=None, help="seed recorded in artifacts")
    ap.add_argument("--timestamps", action="store_true",
                    help="include a timestamp in artifact headers")
    return ap


def _meta(args, cfg: RunConfig, command: str) -> dict:
    return artifact_meta(command, cfg.sha256(), seed=args.seed,
                         timestamps=args.timestamps)


def _rtol(cfg: RunConfig) -> float:
    return cfg.get_float("run.rtol", 1e-10, positive=True)


def run_check(args, cfg: RunConfig) -> int:
    problem = build_problem(cfg)
    s_max = cfg.get_float("check.s_max")
    grid_n = cfg.get_int("check.grid_n")
    kwargs = {}
    if s_max is not None:
        kwargs["s_max"] = s_max
    if grid_n is not None:
        kwargs["grid_n"] = grid_n
    report = full_report(problem.weight, problem.nonlin, **kwargs)
    write_json(os.path.join(args.out, "check.json"), report.to_dict(),
               _meta(args, cfg, "check"))
    violated = []
    for name in sorted(report.hypotheses):
        res = report.hypotheses[name]
        margin = "" if math.isnan(res.margin) else f" (margin {res.margin:.6g})"
        print(f"{name}: {res.status}{margin}")
        if res.status == "violated":
            violated.append(name)
    for name in sorted(report.certificates):
        cert = report.certificates[name]
        status = "certified" if cert.get("certified") else "not certified"
        scope = cert.get("scope", "")
        print(f"{name}: {status}" + (f" [{scope}]" if status == "certified" else ""))
    if violated and args.strict:
        print(f"strict: violated hypotheses {violated}", file=sys.stderr)
        return 1
    return 0


def run_solve(args, cfg: RunConfig) -> int:
    problem = build_problem(cfg)
    alpha = cfg.get_float("solve.alpha", required=True, positive=True)
    r_max = cfg.get_float("solve.r_max", positive=True)
    traj = integrate(problem, alpha, r_max=r_max, rtol=_rtol(cfg))
    meta = _meta(args, cfg, "solve")
    rows = []
    for i, r in enumerate(traj.nodes_r):
        rows.append((float(r), float(traj.nodes_u[i]), float(traj.nodes_v[i]),
                     float(traj.energy_nodes[i])))
    write_csv(os.path.join(args.out, "trajectory.csv"),
              ["r", "u", "uprime", "I"], rows, meta)
    events = [{"kind": e.kind, "r": e.r, "value_slope": e.value_slope,
               "k": e.k} for e in traj.events]
    write_json(os.path.join(args.out, "events.json"),
               {"alpha": alpha, "r_end": traj.r_end,
                "stop_reason": traj.stop_reason,
                "zero_extension_from": traj.zero_extension_from,
                "events": events}, meta)
    if cfg.get_bool("solve.variation", False):
        vt = integrate_variation(traj)
        vrows = [(float(r), float(p), float(pp))
                 for r, p, pp in zip(*vt.nodes())]
        write_csv(os.path.join(args.out, "variation.csv"),
                  ["r", "phi", "phiprime"], vrows, meta)
    print(f"solve: alpha={alpha} span=[0, {traj.r_end:.6g}] "
          f"events={len(traj.events)} stop={traj.stop_reason}")
    return 0


def run_classify(args, cfg: RunConfig) -> int:
    problem = build_problem(cfg)
    alpha = cfg.get_float("classify.alpha", required=True, positive=True)
    k = cfg.get_int("classify.k", 1, minimum=1)
    tol = args.tol if args.tol is not None else cfg.get_float(
        "classify.tol", DEFAULT_G_TOL, positive=True)
    r_max = cfg.get_float("classify.r_max", positive=True)
    res = classify(problem, alpha, k, tol, rtol=_rtol(cfg), r_max=r_max,
                   shortcut=False)
    write_json(os.path.join(args.out, "classify.json"), res.to_dict(),
               _meta(args, cfg, "classify"))
    print(f"classify: alpha={alpha} -> {res.membership_code()} "
          f"(side {res.pn_side}, ball_min {res.ball_min:.3e})")
    if res.membership == "undecided" and args.strict:
        return 4
    return 0


def run_find(args, cfg: RunConfig) -> int:
    problem = build_problem(cfg)
    k = cfg.get_int("find.k", 1, minimum=1)
    lo = cfg.get_float("find.alpha_lo", required=True)
    hi = cfg.get_float("find.alpha_hi", required=True)
    tol = args.tol if args.tol is not None else cfg.get_float(
        "find.tol", 1e-8, positive=True)
    bracket = find_kth_bound_state(problem, k, lo, hi, tol, rtol=_rtol(cfg))
    write_json(os.path.join(args.out, "bracket.json"),
               {"bracket": bracket.to_dict()}, _meta(args, cfg, "find"))
    print(f"find: k={k} alpha_star={bracket.alpha_star!r} width={bracket.width:.3e}")
    return 0


def run_sweep(args, cfg: RunConfig) -> int:
    problem = build_problem(cfg)
    k = cfg.get_int("sweep.k", 1, minimum=1)
    lo = cfg.get_float("sweep.alpha_lo", required=True)
    hi = cfg.get_float("sweep.alpha_hi", required=True)
    step = cfg.get_float("sweep.step", positive=True)
    tol = args.tol if args.tol is not None else cfg.get_float(
        "sweep.tol", 1e-8, positive=True)
    result = uniqueness_sweep(problem, k, lo, hi, step, refine_tol=tol,
                              rtol=_rtol(cfg), threads=max(1, args.threads))
    meta = _meta(args, cfg, "sweep")
    rows = [(r.alpha, r.terminal_k, r.membership_code, r.Z_k, r.slope)
            for r in result.rows]
    write_csv(os.path.join(args.out, "sweep.csv"),
              ["alpha", "terminal_k", "membership_code", "Z_k", "slope"],
              rows, meta)
    write_json(os.path.join(args.out, "brackets.json"), result.to_dict(), meta)
    print(f"sweep: k={k} points={len(rows)} brackets={len(result.brackets)}")
    return 0


def run_trace(args, cfg: RunConfig) -> int:
    problem = build_problem(cfg)
    name = cfg.get_str("trace.functional", required=True)
    if name not in TRACE_NAMES:
        raise ConfigError(
            f"trace.functional: unknown name {name!r}; expected one of "
            + " ".join(TRACE_NAMES)
        )
    alpha = cfg.get_float("trace.alpha", required=True, positive=True)
    branch = cfg.get_int("trace.branch", 1, minimum=1)
    direction = cfg.get_str("trace.direction", "down")
    n = cfg.get_int("trace.n", 512, minimum=8)
    rtol = _rtol(cfg)
    traj = integrate(problem, alpha, rtol=rtol)
    inv = branch_inverse(traj, branch, direction)
    if name in ("S12", "S12bar"):
        alpha2 = cfg.get_float("trace.alpha_2", required=True, positive=True)
        traj2 = integrate(problem, alpha2, rtol=rtol)
        inv2 = branch_inverse(traj2, branch, direction)
        trace = trace_S12(traj, traj2, inv, inv2, n=n, name=name)
    else:
        trace = trace_functional(traj, inv, name, n=n)
    meta = _meta(args, cfg, "trace")
    write_csv(os.path.join(args.out, f"trace_{name}.csv"),
              ["s", "value", "derivative_analytic", "derivative_fd"],
              list(trace.rows()), meta)
    claim = cfg.get_str("trace.claim")
    if claim is not None:
        s_lo = cfg.get_float("trace.s_lo")
        s_hi = cfg.get_float("trace.s_hi")
        s_range = None if s_lo is None or s_hi is None else (s_lo, s_hi)
        monitor = monotonicity_monitor(trace, claim, s_range)
        write_json(os.path.join(args.out, "monitor.json"),
                   {"monitor": monitor.to_dict()}, meta)
        print(f"trace: {name} n={len(trace.s)} monitor "
              f"{'clean' if monitor.clean else 'VIOLATED'}")
    else:
        print(f"trace: {name} n={len(trace.s)}")
    return 0


def run_separation(args, cfg: RunConfig) -> int:
    problem = build_problem(cfg)
    k = cfg.get_int("separation.k", 1, minimum=1)
    lo = cfg.get_float("separation.alpha_lo", required=True)
    hi = cfg.get_float("separation.alpha_hi", required=True)
    delta = cfg.get_float("separation.delta", 1e-3, positive=True)
    pairs = cfg.get_int("separation.pairs", 5, minimum=1)
    tol = args.tol if args.tol is not None else cfg.get_float(
        "separation.tol", 1e-8, positive=True)
    rtol = _rtol(cfg)
    bracket = find_kth_bound_state(problem, k, lo, hi, tol, rtol=rtol)
    report = verify_separation(problem, bracket, delta, pairs, rtol=rtol)
    write_json(os.path.join(args.out, "separation.json"),
               {"bracket": bracket.to_dict(), "separation": report.to_dict()},
               _meta(args, cfg, "separation"))
    print(f"separation: k={k} pairs={len(report.pairs)} "
          f"all_ok={report.all_ok}")
    return 0


_RUNNERS = {
    "check": run_check,
    "solve": run_solve,
    "classify": run_classify,
    "find": run_find,
    "sweep": run_sweep,
    "trace": run_trace,
    "separation": run_separation,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        return _RUNNERS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except UndecidedError as exc:
        print(f"undecided: {exc}", file=sys.stderr)
        return 4 if args.strict else 0
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
