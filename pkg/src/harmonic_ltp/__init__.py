"""Phasor-domain analysis and LQ control of linear time-periodic systems.

The package lifts a T-periodic linear system x' = A(t) x + B(t) u into the
space of Fourier phasor coefficients, where multiplication operators become
block Toeplitz matrices and the dynamics a constant operator shifted by the
harmonic ladder.  On top of that representation it provides:

* ``fourier`` / ``toeplitz``: phasor arithmetic, finite Toeplitz sections,
  and the corner-localized product corrections.
* ``floquet``: transition-matrix integration, Floquet factorization, and
  the exact lifted spectrum.
* ``spectra``: classification of finite-section eigenvalues into converged
  lattice points and the two boundary families.
* ``lyapunov`` / ``riccati``: symbol-domain Lyapunov solves with certified
  residuals and a policy-iteration Riccati solver with a quadratic defect
  certificate.
* ``lq``: harmonic equilibria, implementable gain reconstruction, and
  closed-loop tracking simulation.
* ``cli``: reproducible command-line experiments over bundled systems.
"""

from .errors import (
    ConvergenceError,
    HarmonicError,
    IntegrationError,
    NearSingularError,
    PreconditionError,
    ResonanceError,
    SchemaError,
    StabilityError,
)
from .fourier import FourierMatrix, PhasorVector, TimeGrid, analyze, multiply
from .systems import System, load_scenario, load_system, bundled_path

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "FourierMatrix",
    "HarmonicError",
    "IntegrationError",
    "NearSingularError",
    "PhasorVector",
    "PreconditionError",
    "ResonanceError",
    "SchemaError",
    "StabilityError",
    "System",
    "TimeGrid",
    "analyze",
    "bundled_path",
    "load_scenario",
    "load_system",
    "multiply",
    "__version__",
]
