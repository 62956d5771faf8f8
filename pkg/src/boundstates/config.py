"""Run configuration: a flat text file of dotted keys.

Format: one `key = value` per line, `#` starts a comment, blank lines
ignored.  Values are parsed as bool/int/float when they look like one,
strings otherwise.  Unknown and missing keys are reported by full key
path so a failing run names its cause.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .errors import ConfigError
from .nonlin import Nonlinearity, PowerMinusLinear
from .shooting import Problem
from .weights import PiecewiseLogWeight, PowerSumWeight, PowerWeight, Weight

__all__ = ["RunConfig", "load_config", "parse_config_text", "build_problem",
           "config_sha256", "KNOWN_KEYS"]

KNOWN_KEYS = {
    "weight.family": "power | power_sum | piecewise_log",
    "weight.theta": "exponent of the power factor",
    "weight.c": "additive constant of the power_sum factor",
    "weight.r0": "matching radius of piecewise_log",
    "weight.mu": "outer exponent of piecewise_log (optional, derived from r0)",
    "nonlinearity.family": "power_minus_linear",
    "nonlinearity.p": "superlinear exponent",
    "run.rtol": "integration tolerance (default 1e-10)",
    "check.s_max": "upper end of the f-hypothesis sample range",
    "check.grid_n": "weight audit grid size",
    "solve.alpha": "initial value",
    "solve.r_max": "integration horizon (optional)",
    "solve.variation": "also integrate the variational system (bool)",
    "classify.alpha": "initial value",
    "classify.k": "level (default 1)",
    "classify.tol": "G-membership tolerance (default 1e-3)",
    "classify.r_max": "integration horizon (optional)",
    "find.k": "level (default 1)",
    "find.alpha_lo": "P-side bracket endpoint",
    "find.alpha_hi": "N-side bracket endpoint",
    "find.tol": "bracket width target (default 1e-8)",
    "sweep.k": "level (default 1)",
    "sweep.alpha_lo": "sweep range start",
    "sweep.alpha_hi": "sweep range end",
    "sweep.step": "grid step (default 0.05*beta)",
    "sweep.tol": "bracket refinement tolerance (default 1e-8)",
    "trace.functional": "one of I P Pbar S12 S12bar Wtilde Wbar What V T Tbar",
    "trace.alpha": "initial value of the traced trajectory",
    "trace.alpha_2": "second initial value (S12 only)",
    "trace.branch": "branch index (default 1)",
    "trace.direction": "down | up (default down)",
    "trace.n": "samples per branch (default 512)",
    "trace.claim": "optional monotonicity claim: nonneg | nonpos",
    "trace.s_lo": "optional claim range start",
    "trace.s_hi": "optional claim range end",
    "separation.k": "level (default 1)",
    "separation.alpha_lo": "bracket search start",
    "separation.alpha_hi": "bracket search end",
    "separation.delta": "pair offset scale (default 1e-3)",
    "separation.pairs": "number of pairs (default 5)",
    "separation.tol": "bracket width target (default 1e-8)",
}


def _parse_value(text: str):
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    return text


def parse_config_text(text: str) -> dict:
    entries: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key}")
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key}")
        entries[key] = _parse_value(val)
    return entries


@dataclass
class RunConfig:
    entries: dict = field(default_factory=dict)
    path: str | None = None

    def get(self, key: str, default=None, required: bool = False):
        if key in self.entries:
            return self.entries[key]
        if required:
            raise ConfigError(f"config missing key {key}")
        return default

    def get_float(self, key: str, default=None, required: bool = False,
                  positive: bool = False):
        v = self.get(key, default, required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {v!r}")
        v = float(v)
        if positive and not v > 0.0:
            raise ConfigError(f"{key}: must be positive, got {v}")
        return v

    def get_int(self, key: str, default=None, required: bool = False,
                minimum: int | None = None):
        v = self.get(key, default, required)
        if v is None:
            return None
        if isinstance(v, bool) or not isinstance(v, int):
            raise ConfigError(f"{key}: expected an integer, got {v!r}")
        if minimum is not None and v < minimum:
            raise ConfigError(f"{key}: must be >= {minimum}, got {v}")
        return v

    def get_str(self, key: str, default=None, required: bool = False):
        v = self.get(key, default, required)
        if v is None:
            return None
        if not isinstance(v, str):
            raise ConfigError(f"{key}: expected a string, got {v!r}")
        return v

    def get_bool(self, key: str, default=False):
        v = self.get(key, default)
        if not isinstance(v, bool):
            raise ConfigError(f"{key}: expected a boolean, got {v!r}")
        return v

    def sha256(self) -> str:
        return config_sha256(self.entries)


def config_sha256(entries: dict) -> str:
    canon = "\n".join(f"{k}={entries[k]!r}" for k in sorted(entries))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = RunConfig(parse_config_text(text), path)
    return cfg


def build_weight(cfg: RunConfig) -> Weight:
    family = cfg.get_str("weight.family", required=True)
    if family == "power":
        theta = cfg.get_float("weight.theta", required=True)
        return PowerWeight(theta)
    if family == "power_sum":
        theta = cfg.get_float("weight.theta", required=True)
        c = cfg.get_float("weight.c", required=True)
        return PowerSumWeight(theta, c)
    if family == "piecewise_log":
        theta = cfg.get_float("weight.theta", required=True)
        r0 = cfg.get_float("weight.r0", required=True)
        mu = cfg.get_float("weight.mu")
        return PiecewiseLogWeight(theta, r0, mu)
    raise ConfigError(
        f"weight.family: unknown family {family!r}; expected power, "
        "power_sum or piecewise_log"
    )


def build_nonlinearity(cfg: RunConfig) -> Nonlinearity:
    family = cfg.get_str("nonlinearity.family", required=True)
    if family == "power_minus_linear":
        p = cfg.get_float("nonlinearity.p", required=True)
        return PowerMinusLinear(p)
    raise ConfigError(
        f"nonlinearity.family: unknown family {family!r}; expected "
        "power_minus_linear"
    )


def build_problem(cfg: RunConfig) -> Problem:
    return Problem(build_weight(cfg), build_nonlinearity(cfg))
