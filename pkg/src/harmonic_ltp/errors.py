"""Exception types shared across the package.

The CLI maps these onto process exit codes, so solver code should raise
the most specific class that applies rather than a bare ValueError.
"""

from __future__ import annotations


class HarmonicError(Exception):
    """Base class for all package errors."""


class SchemaError(HarmonicError):
    """Malformed input file or config (JSON schema violation, bad CLI value)."""


class PreconditionError(HarmonicError):
    """Input violates a documented mathematical precondition."""


class NearSingularError(PreconditionError):
    """A pointwise matrix inversion hit a near-singular sample.

    Carries the worst offending time so the caller can report it.
    """

    def __init__(self, message: str, t: float, det: complex):
        super().__init__(message)
        self.t = t
        self.det = det


class ResonanceError(PreconditionError):
    """A Lyapunov/Sylvester solve is singular: two eigenvalues sum to ~zero."""

    def __init__(self, message: str, pair: tuple[complex, complex]):
        super().__init__(message)
        self.pair = pair


class StabilityError(PreconditionError):
    """A required Floquet/Hurwitz stability certificate failed."""


class ConvergenceError(HarmonicError):
    """An iterative procedure ran out of budget before reaching tolerance."""

    def __init__(self, message: str, last_residual: float | None = None):
        super().__init__(message)
        self.last_residual = last_residual


class IntegrationError(ConvergenceError):
    """The ODE integrator failed; carries the time where it gave up."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t
