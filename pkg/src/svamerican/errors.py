"""Exception hierarchy.

Every error carries an ``exit_code`` so the command-line driver can map
failures onto its exit-code contract without inspecting messages.
"""

from __future__ import annotations


class SVAmericanError(Exception):
    """Base class for all package errors."""

    exit_code = 1
    module = "svamerican"

    @property
    def code(self) -> str:
        return f"{self.module}.{type(self).__name__}"


class ParameterDomainError(SVAmericanError, ValueError):
    module = "model"


class FicheraUncertainError(SVAmericanError):
    """The limit of b(y)b'(y) as y -> 0 did not settle on the sample ladder."""

    module = "model"

    def __init__(self, message: str, samples: list[tuple[float, float]]):
        super().__init__(message)
        self.samples = samples


class DegenerateBoundaryUnsupported(SVAmericanError):
    """Model has a nonnegative Fichera function at y = 0 (no boundary datum)."""

    exit_code = 2
    module = "solver"


class ConfigurationError(SVAmericanError, ValueError):
    module = "config"


class StepFailure(SVAmericanError):
    """Newton iteration did not converge within one time step."""

    exit_code = 3
    module = "solver"

    def __init__(self, message: str, residual: float, step: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.step = step


class OracleFailure(SVAmericanError):
    """Projected SOR hit its iteration cap."""

    exit_code = 3
    module = "solver"


class TruncationError(SVAmericanError):
    """Exercise region reaches the upper log-price truncation boundary."""

    exit_code = 3
    module = "free_boundary"


class HorizonTooShortError(SVAmericanError):
    exit_code = 3
    module = "free_boundary"


class RegressionDegenerateError(SVAmericanError):
    exit_code = 3
    module = "mc_oracle"


class AcceptanceViolation(SVAmericanError):
    exit_code = 4
    module = "cli"
