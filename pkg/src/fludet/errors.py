"""Exception hierarchy shared across the package.

Numeric/domain failures derive from FludetError so the CLI can map them to a
structured error record and a dedicated exit code; plain contract violations
(bad argument shapes, invalid enum values) raise ValueError as usual.
"""
from __future__ import annotations


class FludetError(Exception):
    """Base class for numeric and domain failures."""


class ExpressionError(FludetError):
    """Parse or evaluation failure of an arithmetic expression.

    ``offset`` is the byte offset into the source text for parse errors,
    None for evaluation errors.
    """

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class IntegrationError(FludetError):
    """Non-finite coefficient value or state overflow during integration.

    Carries the time ``t`` reached and, for overflow, the ``step`` index.
    """

    def __init__(self, message: str, t: float | None = None, step: int | None = None):
        super().__init__(message)
        self.t = t
        self.step = step


class ZeroModeError(FludetError):
    """|det J| fell below the zero-mode threshold; ratios are undefined."""

    def __init__(self, message: str, value: float, threshold: float):
        super().__init__(message)
        self.value = value
        self.threshold = threshold


class CausticError(ZeroModeError):
    """Boundary value vanished: conjugate point, prefactor diverges."""


class MissingSolutionError(FludetError):
    """Operation needs the stored integration samples but none were kept."""


class SpectrumError(FludetError):
    """Eigenvalue search failed; ``found`` holds the partial result."""

    def __init__(self, message: str, found=None):
        super().__init__(message)
        self.found = found


class DiscretizationError(FludetError):
    """Coefficient evaluation failed at a grid point."""


class ZetaError(FludetError):
    """Zeta evaluation outside its domain (indefinite spectrum, bad tau,
    sampling beyond the convergence radius, unsupported tail model, ...)."""


class FitError(FludetError):
    """Rank-deficient or otherwise unusable least-squares fit."""


class ShootingError(FludetError):
    """Boundary-value shooting did not converge; carries best mismatch."""

    def __init__(self, message: str, best_mismatch: float | None = None):
        super().__init__(message)
        self.best_mismatch = best_mismatch


class ConjugatePointError(FludetError):
    """Endpoint map is singular: a family of trajectories refocuses."""


class ConfigError(FludetError):
    """Invalid job configuration; ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None, value=None):
        super().__init__(message)
        self.field = field
        self.value = value
