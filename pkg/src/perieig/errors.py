"""Exception hierarchy shared by the solver modules and the CLI."""

from __future__ import annotations


class PerieigError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ExprError(PerieigError):
    exit_code = 2


class ExprSyntaxError(ExprError):
    """Raised by the parser; ``offset`` is a byte offset into the UTF-8 source."""

    def __init__(self, message: str, offset: int, expected: str):
        self.offset = offset
        self.expected = expected
        super().__init__(f"{message} at byte {offset} (expected {expected})")


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int, declared: tuple[str, ...]):
        self.name = name
        self.offset = offset
        self.declared = declared
        listing = ", ".join(declared) if declared else "none"
        super().__init__(
            f"unknown identifier {name!r} at byte {offset}; declared parameters: {listing}"
        )


class ExprDomainError(ExprError):
    """Evaluation left the real domain (log of non-positive, division by zero, ...)."""


class ConfigError(PerieigError):
    exit_code = 2

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class HypothesisError(PerieigError):
    """A theorem's hypotheses are violated; no limit value is produced.

    ``code`` is a short machine tag such as ``mixed_interval`` or
    ``degenerate_orbit``; ``report`` holds the individual checks.
    """

    exit_code = 3

    def __init__(self, code: str, message: str, report=None):
        self.code = code
        self.report = list(report or [])
        super().__init__(f"{code}: {message}")


class DegenerateOrbitError(HypothesisError):
    def __init__(self, message: str, orbits=None, report=None):
        self.orbits = list(orbits or [])
        super().__init__("degenerate_orbit", message, report)


class NonUniqueOrbitError(HypothesisError):
    def __init__(self, message: str, report=None):
        super().__init__("nonunique", message, report)


class NumericalError(PerieigError):
    exit_code = 4


class NonConvergenceError(NumericalError):
    def __init__(self, message: str, iterations: int, last_ratio: float, oscillation: float):
        self.iterations = iterations
        self.last_ratio = last_ratio
        self.oscillation = oscillation
        super().__init__(
            f"{message} (iterations={iterations}, ratio={last_ratio:.6g}, "
            f"oscillation={oscillation:.3g})"
        )


class FactorizationError(NumericalError):
    def __init__(self, step: int, message: str = "non-positive pivot"):
        self.step = step
        super().__init__(f"{message} in time step {step}; refine n_t")
