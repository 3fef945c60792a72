"""Shared fixtures and random-system generators for the test suite.

Random systems are drawn once per seed through ``numpy.random.default_rng``
so every run sees the same instances.  The heavyweight objects of the
bundled square-wave plant (Riccati solution, reconstructed gains) are
computed once per session; they back both the module tests and the
acceptance run.
"""

from __future__ import annotations

import numpy as np
import pytest

from harmonic_ltp.floquet import integrate_transition
from harmonic_ltp.fourier import FourierMatrix
from harmonic_ltp.riccati import KleinmanConfig, kleinman_solve
from harmonic_ltp.systems import bundled_path, load_scenario, load_system


def random_banded(rng: np.random.Generator, period: float, rows: int,
                  cols: int, band: int, scale: float = 0.5,
                  decay: float = 1.0) -> FourierMatrix:
    """Random real periodic matrix with coefficients shrinking like 1/k**decay."""
    ph = np.zeros((rows, cols, 2 * band + 1), dtype=complex)
    ph[:, :, band] = rng.normal(size=(rows, cols))
    for d in range(1, band + 1):
        c = scale / d ** decay * (rng.normal(size=(rows, cols))
                                  + 1j * rng.normal(size=(rows, cols)))
        ph[:, :, band + d] = c
        ph[:, :, band - d] = c.conj()
    return FourierMatrix(period, ph, real=True)


def random_spd_constant(rng: np.random.Generator, period: float,
                        n: int, shift: float = 0.5) -> FourierMatrix:
    root = rng.normal(size=(n, n))
    return FourierMatrix.from_constant(period, root @ root.T + shift * np.eye(n))


def random_hurwitz(rng: np.random.Generator, period: float, n: int,
                   band: int, margin: float = 0.5) -> FourierMatrix:
    """Random periodic matrix shifted so all Floquet exponents sit left of -margin.

    Subtracting c*I moves every exponent by exactly -c, so one transition
    integration pins the shift; a second integration in the caller can
    confirm independently.
    """
    a = random_banded(rng, period, n, n, band)
    mono = integrate_transition(a)
    worst = float(np.log(np.abs(mono.multipliers)).max() / period)
    shift = worst + margin
    return a - FourierMatrix.from_constant(period, shift * np.eye(n))


@pytest.fixture(scope="session")
def scalar_system():
    return load_system(bundled_path("scalar_decay.json"))


@pytest.fixture(scope="session")
def twoband_system():
    return load_system(bundled_path("twoband_complex.json"))


@pytest.fixture(scope="session")
def squarewave_system():
    return load_system(bundled_path("squarewave_plant.json"))


@pytest.fixture(scope="session")
def tracking_scenario(squarewave_system):
    return load_scenario(bundled_path("tracking.scenario.json"),
                         squarewave_system.period)


@pytest.fixture(scope="session")
def squarewave_riccati(squarewave_system):
    sys = squarewave_system
    return kleinman_solve(sys.a, sys.b, sys.q, sys.r, KleinmanConfig(eps=1e-5))
