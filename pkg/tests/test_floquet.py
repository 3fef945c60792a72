"""Transition-matrix integration, periodic eigenstructure, harmonic spectrum."""

import numpy as np
import pytest
import scipy.linalg

from harmonic_ltp.floquet import (floquet_factorize, harmonic_spectrum,
                                  integrate_transition)
from harmonic_ltp.fourier import FourierMatrix, multiply

from conftest import random_banded, random_hurwitz

# Base eigenvalues of the bundled two-band system, frozen from two
# independent integrations at rtol 1e-10 and 1e-12 (agree to 9 digits).
TWOBAND_EXPONENTS = sorted([-2.7123198873, -0.2876801127])


def _scalar_cosine(period=2 * np.pi, mean=-1.0, amp=1.0):
    ph = np.zeros((1, 1, 3), dtype=complex)
    ph[0, 0, 1] = mean
    ph[0, 0, 0] = amp / 2
    ph[0, 0, 2] = amp / 2
    return FourierMatrix(period, ph, real=True)


def test_scalar_monodromy_is_exponential_of_mean():
    # d/dt x = (mean + amp cos) x integrates to exp(mean T) over a period:
    # the oscillatory part has zero mean so it cancels exactly.
    a = _scalar_cosine(mean=-0.7, amp=1.3)
    mono = integrate_transition(a)
    assert mono.multipliers[0] == pytest.approx(np.exp(-0.7 * 2 * np.pi),
                                                rel=1e-9)


def test_constant_system_factorization_is_eigendecomposition():
    a0 = np.array([[0.0, 1.0], [-2.0, -3.0]])
    a = FourierMatrix.from_constant(3.0, a0)
    fac = floquet_factorize(a)
    assert sorted(fac.base_eigenvalues.real) == pytest.approx([-2.0, -1.0],
                                                              abs=1e-8)
    assert np.abs(fac.base_eigenvalues.imag).max() < 1e-8
    # W(t) is constant for an LTI system: no harmonic content
    w_tail = fac.w.tail_energy(0)
    assert w_tail < 1e-7


def test_twoband_base_exponents_frozen():
    from harmonic_ltp.systems import bundled_path, load_system
    sys = load_system(bundled_path("twoband_complex.json"))
    fac = floquet_factorize(sys.a)
    got = sorted(fac.base_eigenvalues.real)
    assert got == pytest.approx(TWOBAND_EXPONENTS, abs=1e-8)
    # exponent imaginary parts are only defined modulo the base frequency;
    # this system pins them in the first strip
    assert fac.base_eigenvalues.imag == pytest.approx([0.5, 0.5], abs=1e-8)


def test_factorization_identity_and_periodicity():
    rng = np.random.default_rng(61)
    for _ in range(3):
        n = int(rng.integers(1, 4))
        band = int(rng.integers(0, 4))
        a = random_banded(rng, 2.0, n, n, band)
        fac = floquet_factorize(a)
        phi = fac.monodromy.phi_T
        w0 = fac.w.evaluate(0.0)
        lhs = scipy.linalg.expm(fac.lam * 2.0)
        rhs = np.linalg.solve(w0, phi @ w0)
        scale = np.linalg.norm(phi)
        assert np.linalg.norm(lhs - rhs) <= 1e-8 * max(scale, 1.0)
        assert max(fac.periodicity_residuals) <= 1e-8


def test_w_inverse_consistency():
    rng = np.random.default_rng(67)
    a = random_hurwitz(rng, 1.5, 2, 2)
    fac = floquet_factorize(a)
    prod = multiply(fac.w, fac.w_inv)
    for t in (0.0, 0.4, 1.1):
        assert np.abs(prod.evaluate(t) - np.eye(2)).max() < 1e-6


def test_defective_monodromy_is_flagged():
    a0 = np.array([[0.0, 1.0], [0.0, 0.0]])  # Jordan block: multiplier 1 twice
    a = FourierMatrix.from_constant(1.0, a0)
    fac = floquet_factorize(a)
    assert fac.defective


def test_harmonic_spectrum_lattice_and_hurwitz():
    rng = np.random.default_rng(71)
    a = random_hurwitz(rng, 2.0, 2, 1, margin=0.4)
    fac = floquet_factorize(a)
    spec = harmonic_spectrum(fac)
    eigs = spec.eigenvalues(k_window=3)
    base = fac.base_eigenvalues
    omega = 2 * np.pi / 2.0
    expected = sorted(
        (b + 1j * omega * k for b in base for k in range(-3, 4)),
        key=lambda z: (round(z.real, 9), z.imag),
    )
    got = sorted(eigs, key=lambda z: (round(z.real, 9), z.imag))
    assert np.allclose(got, expected)
    assert spec.is_hurwitz()
    # resolvent lattice bound: finite and positive for a Hurwitz operator
    assert 0.0 < spec.sigma_plus() < np.inf


def test_spectrum_invertibility_distance():
    # base eigenvalue at the origin: harmonic operator is singular
    a = FourierMatrix.from_constant(1.0, np.array([[0.0]]))
    fac = floquet_factorize(a)
    spec = harmonic_spectrum(fac)
    assert spec.min_distance_to_zero() == pytest.approx(0.0, abs=1e-10)
    assert not spec.is_invertible(tol=1e-8)
