"""Finite-section spectra: lattice matching, boundary families, translation."""

import numpy as np
import pytest

from harmonic_ltp.floquet import floquet_factorize, harmonic_spectrum
from harmonic_ltp.fourier import FourierMatrix
from harmonic_ltp.spectra import (classification_sweep, classify,
                                  truncated_spectrum, uniform_inverse_bound)


@pytest.fixture(scope="module")
def twoband(twoband_system):
    fac = floquet_factorize(twoband_system.a)
    return twoband_system, fac, harmonic_spectrum(fac)


def test_constant_system_section_is_exact_lattice():
    a0 = np.array([[-1.0, 0.5], [0.0, -2.0]])
    a = FourierMatrix.from_constant(2.0, a0)
    m = 6
    eigs = truncated_spectrum(a, m)
    omega = np.pi
    expected = sorted(
        (lam + 1j * omega * k for lam in (-1.0, -2.0) for k in range(-m, m + 1)),
        key=lambda z: (z.real, round(z.imag, 9)),
    )
    got = sorted(eigs, key=lambda z: (z.real, round(z.imag, 9)))
    assert np.allclose(got, expected, atol=1e-10)


def test_classification_partition_is_complete(twoband):
    system, fac, spec = twoband
    cls = classify(truncated_spectrum(system.a, 20), spec, system.a, 20)
    n, width = 2, 41
    assert cls.eigs.size == n * width
    assert cls.lambda1.size + cls.lambda2_plus.size + cls.lambda2_minus.size \
        == cls.eigs.size
    assert (cls.lambda2_plus.imag >= 0).all()
    assert (cls.lambda2_minus.imag < 0).all()


def test_classification_counts_and_families(twoband):
    # frozen regression of the shared-tolerance partition at m=20 and m=40
    system, fac, spec = twoband
    sweep = classification_sweep(system.a, spec, [20, 40])
    c20, c40 = sweep[20], sweep[40]
    assert c20.lambda1.size == 22
    assert c20.lambda2_plus.size == 30
    assert c20.lambda2_minus.size == 30
    assert c20.boundary_layer_width() == 19
    assert c40.lambda1.size == 102
    assert c40.lambda2_plus.size == 30
    assert c40.lambda2_minus.size == 30
    # boundary families contain non-Hurwitz members even though the exact
    # operator is Hurwitz: truncation-created spurious spectrum
    assert spec.is_hurwitz()
    for cls in (c20, c40):
        assert (cls.lambda2_plus.real > 0).any()
        assert (cls.lambda2_minus.real > 0).any()


def test_matched_lattice_points_are_accurate(twoband):
    system, fac, spec = twoband
    cls = classify(truncated_spectrum(system.a, 24), spec, system.a, 24)
    matched = cls.match_distance[np.isfinite(cls.match_distance)]
    assert matched.size > 0
    # deep-window matches sit at rounding level; all are within tol
    assert np.percentile(matched, 25) < 1e-9
    assert matched.max() <= cls.tol


def test_boundary_families_translate_by_base_frequency(twoband):
    system, fac, spec = twoband
    sweep = classification_sweep(system.a, spec, [20, 21])
    omega = 2 * np.pi / system.period
    up20 = np.sort_complex(sweep[20].lambda2_plus + 1j * omega)
    up21 = np.sort_complex(sweep[21].lambda2_plus)
    assert up20.size == up21.size
    assert np.abs(up20 - up21).max() < 1e-3


def test_sweep_shares_one_tolerance(twoband):
    system, fac, spec = twoband
    sweep = classification_sweep(system.a, spec, [20, 24, 28])
    tols = {cls.tol for cls in sweep.values()}
    assert len(tols) == 1
    sizes = {m: cls.lambda2_plus.size for m, cls in sweep.items()}
    assert len(set(sizes.values())) == 1


def test_uniform_inverse_bound_stays_bounded(twoband):
    system, fac, spec = twoband
    bounds = uniform_inverse_bound(system.a, [8, 12, 16, 20])
    vals = np.array(list(bounds.values()))
    assert np.all(np.isfinite(vals))
    # stabilizes rather than growing: last two within a factor two
    assert vals[-1] < 2.0 * vals[-2] + 1e-9
