"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: config problems exit 2,
numeric failures exit 3, undecided results under --strict exit 4.
"""

from __future__ import annotations


class BoundStatesError(Exception):
    """Base class for all package errors."""


class ConfigError(BoundStatesError):
    """Malformed or inconsistent configuration.  Message names the key."""


class NumericError(BoundStatesError):
    """A numerical routine could not produce a trustworthy result."""


class DomainError(NumericError):
    """Evaluation requested outside the representable domain."""


class SingularWindowError(DomainError):
    """Evaluation refused inside an exclusion window around a singularity."""


class TailNotIntegrableError(NumericError):
    """The tail integral of 1/q does not converge, so h is undefined."""


class IntegrationToleranceError(NumericError):
    """The integrator violated its own error contract (energy increased)."""


class BracketError(NumericError):
    """A root bracket is invalid (endpoints on the same side)."""


class UndecidedError(NumericError):
    """Classification stayed undecided after the horizon extension."""
