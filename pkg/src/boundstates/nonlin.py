"""Nonlinearities f and their primitives.

The solver needs f together with F(s) = integral of f over (0, s), the
derivative f', the first positive zero b of f, and the positive zero beta
of F.  Structurally: f is odd, f <= 0 (not identically 0) on [0, b],
f > 0 past b, and 0 < b < beta < c where (-c, c) is the domain.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy import integrate as _quadpack
from scipy.optimize import brentq

from .errors import ConfigError, DomainError, SingularWindowError

__all__ = [
    "Nonlinearity",
    "PowerMinusLinear",
    "CustomNonlinearity",
    "find_b_beta",
]


class Nonlinearity:
    """Base nonlinearity.  Subclasses provide f, f_prime and (optionally)
    closed forms for F, b, beta."""

    family = "abstract"
    c: float = math.inf
    b: float
    beta: float

    def f(self, s):
        raise NotImplementedError

    def f_prime(self, s):
        raise NotImplementedError

    def F(self, s):
        return self._map_scalar(
            lambda x: _quadpack.quad(lambda t: float(self.f(t)), 0.0, x,
                                     epsabs=1e-14, epsrel=1e-12, limit=200)[0],
            s,
        )

    def f_scalar_fn(self) -> Callable[[float], float]:
        return lambda s: float(self.f(s))

    def f_prime_scalar_fn(self) -> Callable[[float], float]:
        return lambda s: float(self.f_prime(s))

    def fprime_at_zero(self) -> float:
        """f'(0), used for the linear decay rate near u = 0."""
        return float(self.f_prime(0.0))

    # -- F/f machinery --------------------------------------------------------

    def exclusion_halfwidth(self) -> float:
        # F/f is singular at s = +-b and 0/0 at s = 0; refuse a window.
        return 1e-8 * self.beta

    def _check_window(self, s: float) -> None:
        w = self.exclusion_halfwidth()
        if abs(s) <= w or abs(abs(s) - self.b) <= w:
            raise SingularWindowError(
                f"F/f evaluation refused within {w:.3e} of the singular "
                f"levels 0 and +-{self.b}, got s={s}"
            )
        if abs(s) >= self.c:
            raise DomainError(f"s={s} outside the domain (-{self.c}, {self.c})")

    def ratio_Ff(self, s: float) -> float:
        self._check_window(s)
        return float(self.F(s)) / float(self.f(s))

    def d_ratio_Ff(self, s: float) -> float:
        """(F/f)'(s) = 1 - F f' / f^2."""
        self._check_window(s)
        fs = float(self.f(s))
        return 1.0 - float(self.F(s)) * float(self.f_prime(s)) / (fs * fs)

    def d_ratio_tail_limit(self) -> float | None:
        """lim of (F/f)'(s) as s -> inf, when known in closed form."""
        return None

    def describe(self) -> dict:
        return {"family": self.family, "b": self.b, "beta": self.beta,
                "c": self.c if math.isfinite(self.c) else "inf"}

    @staticmethod
    def _map_scalar(fn, s):
        arr = np.asarray(s, dtype=float)
        if arr.ndim == 0:
            return fn(float(arr))
        return np.array([fn(float(x)) for x in arr])


class PowerMinusLinear(Nonlinearity):
    """f(s) = |s|^(p-1) s - s with p > 1; the odd-safe power nonlinearity.

    Closed forms: b = 1, beta = ((p+1)/2)^(1/(p-1)),
    F(s) = |s|^(p+1)/(p+1) - s^2/2.
    """

    family = "power_minus_linear"

    def __init__(self, p: float):
        if not p > 1.0:
            raise ConfigError(
                f"nonlinearity.p: power_minus_linear needs p > 1, got {p}"
            )
        self.p = float(p)
        self.b = 1.0
        self.beta = ((p + 1.0) / 2.0) ** (1.0 / (p - 1.0))
        self.c = math.inf

    def f(self, s):
        ss = np.asarray(s, dtype=float)
        return np.sign(ss) * np.abs(ss) ** self.p - ss

    def f_prime(self, s):
        ss = np.asarray(s, dtype=float)
        return self.p * np.abs(ss) ** (self.p - 1.0) - 1.0

    def F(self, s):
        ss = np.asarray(s, dtype=float)
        return np.abs(ss) ** (self.p + 1.0) / (self.p + 1.0) - ss * ss / 2.0

    def f_scalar_fn(self):
        p = self.p
        return lambda s: math.copysign(abs(s) ** p, s) - s

    def f_prime_scalar_fn(self):
        p = self.p
        return lambda s: p * abs(s) ** (p - 1.0) - 1.0

    def fprime_at_zero(self) -> float:
        return -1.0

    def d_ratio_tail_limit(self) -> float:
        # F/f ~ s/(p+1) for large s, so (F/f)' -> 1/(p+1).
        return 1.0 / (self.p + 1.0)

    def describe(self) -> dict:
        d = super().describe()
        d["p"] = self.p
        return d


class CustomNonlinearity(Nonlinearity):
    """Nonlinearity from closures (f, f', optionally F); b and beta are
    located by scan plus bisection unless supplied."""

    family = "custom"

    def __init__(self, f_fn, f_prime_fn, F_fn=None, *, c: float = math.inf,
                 b: float | None = None, beta: float | None = None,
                 scan_hi: float = 50.0, label: str = "custom"):
        self._f = f_fn
        self._fp = f_prime_fn
        self._F = F_fn
        self.c = float(c)
        self.label = label
        if b is None or beta is None:
            found_b, found_beta = find_b_beta(self, scan_hi=scan_hi)
            self.b = found_b if b is None else float(b)
            self.beta = found_beta if beta is None else float(beta)
        else:
            self.b = float(b)
            self.beta = float(beta)
        if not 0.0 < self.b < self.beta < self.c:
            raise ConfigError(
                f"nonlinearity: need 0 < b < beta < c, got b={self.b}, "
                f"beta={self.beta}, c={self.c}"
            )

    def f(self, s):
        return self._map_scalar(lambda x: float(self._f(x)), s)

    def f_prime(self, s):
        return self._map_scalar(lambda x: float(self._fp(x)), s)

    def F(self, s):
        if self._F is not None:
            return self._map_scalar(lambda x: float(self._F(x)), s)
        return super().F(s)

    def describe(self) -> dict:
        d = super().describe()
        d["label"] = self.label
        return d


def find_b_beta(nonlin, *, scan_hi: float = 50.0, scan_n: int = 4096):
    """Locate b (largest zero of f below its positive region) and beta
    (the zero of F past b) by scan plus bisection to 1e-12.

    Works for any object with f and F methods; this is the generic route
    that cross-checks any closed forms a family may carry.
    """
    if not scan_hi > 0.0:
        raise ConfigError(f"scan range must be positive, got {scan_hi}")
    hi = min(scan_hi, getattr(nonlin, "c", math.inf) * (1.0 - 1e-12))
    s = np.linspace(0.0, hi, scan_n)[1:]
    fv = np.asarray(nonlin.f(s), dtype=float)
    pos = fv > 0.0
    if not pos[-1]:
        raise DomainError(
            f"f: no terminal positive region; no sign change found in the "
            f"scan range (0, {hi}]"
        )
    # b sits at the last switch into the positive region.
    switches = np.nonzero(~pos[:-1] & pos[1:])[0]
    if len(switches) == 0:
        raise DomainError(
            f"f: no sign change found in the scan range (0, {hi}]; "
            "(f1) violated or range too small"
        )
    i = int(switches[-1])
    b = brentq(lambda x: float(nonlin.f(x)), s[i], s[i + 1],
               xtol=1e-15, rtol=8.9e-16)
    # beta: first zero of F past b; F(b) < 0 since f <= 0 before b.
    sF = np.linspace(b, hi, scan_n)[1:]
    Fv = np.asarray(nonlin.F(sF), dtype=float)
    above = np.nonzero(Fv > 0.0)[0]
    if len(above) == 0:
        raise DomainError(
            f"F: beta not bracketed in the scan range ({b:.6g}, {hi}]"
        )
    j = int(above[0])
    lo_s = sF[j - 1] if j > 0 else b
    beta = brentq(lambda x: float(nonlin.F(x)), lo_s, sF[j],
                  xtol=1e-15, rtol=8.9e-16)
    return float(b), float(beta)
