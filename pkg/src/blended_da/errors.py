"""Exception hierarchy for blended-da.

Every error derives from :class:`BlendedDaError` and from the closest builtin
exception, so callers may catch either. The command line maps
:class:`ConfigError` to exit status 2 and :class:`NumericalError` to exit
status 3.
"""

from __future__ import annotations


class BlendedDaError(Exception):
    """Base class of all errors raised by this package."""


class ConfigError(BlendedDaError, ValueError):
    """Invalid configuration value.

    Attributes:
        key: Dotted path of the offending configuration key.
    """

    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"{key}: {message}")
        self.key = key


class NumericalError(BlendedDaError, ArithmeticError):
    """A numerical procedure failed."""


class ThermodynamicsError(NumericalError):
    """Equation-of-state argument outside its domain."""


class CflViolationError(NumericalError):
    """Advective Courant number above one.

    Attributes:
        cfl: The offending Courant number.
    """

    def __init__(self, cfl: float, where: str) -> None:
        super().__init__(f"CFL number {cfl:.6g} exceeds 1 in {where}")
        self.cfl = cfl


class SolverError(NumericalError):
    """Krylov solve did not reach its tolerance.

    Attributes:
        residual: Final relative residual.
        iterations: Iterations performed.
    """

    def __init__(self, residual: float, iterations: int, reason: str) -> None:
        super().__init__(
            f"elliptic solve failed after {iterations} iterations "
            f"(relative residual {residual:.3e}): {reason}"
        )
        self.residual = residual
        self.iterations = iterations


class ConversionError(NumericalError):
    """Regime conversion with a non-positive radicand."""


class RegimeError(BlendedDaError, ValueError):
    """Stage, regime or state used out of sequence."""


class ObservationError(BlendedDaError, IndexError):
    """Observation location outside the grid."""


class EnsembleError(BlendedDaError, ValueError):
    """Ensemble unusable for the requested operation."""
