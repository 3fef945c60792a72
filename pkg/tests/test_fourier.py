"""Coefficient-series container, transform, and pointwise algebra."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmonic_ltp.errors import PreconditionError
from harmonic_ltp.fourier import (FourierMatrix, TimeGrid, analyze, evaluate,
                                  invert_pointwise, multiply,
                                  reconstruct_trajectory)

from conftest import random_banded


def test_analyze_recovers_cosine_coefficients():
    period = 2.0
    grid = TimeGrid.for_band(period, 4)
    t = grid.times
    samples = 3.0 + 2.0 * np.cos(2 * np.pi * t / period) \
        - 4.0 * np.sin(4 * np.pi * t / period)
    f = analyze(samples, period, band=4)
    assert f.real
    assert np.isclose(f.phasor(0, 0, 0), 3.0)
    # cos(w t) = (e^{jwt} + e^{-jwt}) / 2
    assert np.isclose(f.phasor(0, 0, 1), 1.0)
    assert np.isclose(f.phasor(0, 0, -1), 1.0)
    # -4 sin(2wt) = 2j e^{2jwt} - 2j e^{-2jwt}
    assert np.isclose(f.phasor(0, 0, 2), 2.0j)
    assert np.isclose(f.phasor(0, 0, -2), -2.0j)
    assert np.isclose(f.phasor(0, 0, 3), 0.0)


def test_analyze_evaluate_round_trip_banded():
    rng = np.random.default_rng(11)
    f = random_banded(rng, 3.0, 2, 3, 5)
    grid = TimeGrid.for_band(3.0, 5)
    back = analyze(f.evaluate(grid.times), 3.0, band=5)
    assert np.abs(back.phasors - f.phasors).max() < 1e-13


def test_analyze_input_validation():
    with pytest.raises(PreconditionError):
        analyze(np.zeros((4, 4)), 1.0)
    with pytest.raises(PreconditionError):
        analyze(np.zeros(6), 1.0)  # not a power of two
    with pytest.raises(PreconditionError):
        analyze(np.zeros(8), 1.0, band=7)


def test_evaluate_scalar_and_vector_times():
    rng = np.random.default_rng(5)
    f = random_banded(rng, 1.5, 2, 2, 3)
    ts = np.array([0.0, 0.3, 1.1])
    vals = f.evaluate(ts)
    assert vals.shape == (2, 2, 3)
    for i, t in enumerate(ts):
        assert np.allclose(vals[:, :, i], f.evaluate(float(t)))
    # periodicity
    assert np.allclose(f.evaluate(0.4), f.evaluate(0.4 + 3 * 1.5))


def test_real_flag_enforces_conjugate_symmetry():
    ph = np.zeros((1, 1, 3), dtype=complex)
    ph[0, 0, 2] = 1.0  # k=+1 only: not a real signal
    with pytest.raises(PreconditionError):
        FourierMatrix(1.0, ph, real=True)
    f = FourierMatrix(1.0, ph, real=False)
    assert not f.real


def test_derivative_matches_finite_difference():
    rng = np.random.default_rng(7)
    f = random_banded(rng, 2.0, 2, 2, 4)
    df = f.derivative()
    h = 1e-6
    t = 0.37
    fd = (f.evaluate(t + h) - f.evaluate(t - h)) / (2 * h)
    assert np.abs(df.evaluate(t) - fd).max() < 1e-6


def test_adjoint_transpose_conjugate():
    rng = np.random.default_rng(9)
    ph = rng.normal(size=(2, 3, 5)) + 1j * rng.normal(size=(2, 3, 5))
    f = FourierMatrix(2.0, ph, real=False)
    t = 0.81
    assert np.allclose(f.adjoint().evaluate(t), f.evaluate(t).conj().T)
    assert np.allclose(f.transpose().evaluate(t), f.evaluate(t).T)
    assert np.allclose(f.conjugate().evaluate(t), f.evaluate(t).conj())


def test_pad_truncate_and_tail_energy():
    rng = np.random.default_rng(13)
    f = random_banded(rng, 1.0, 1, 1, 4)
    g = f.pad(7)
    assert g.band == 7
    assert np.allclose(g.evaluate(0.3), f.evaluate(0.3))
    h = g.truncate(4)
    assert np.abs(h.phasors - f.phasors).max() < 1e-15
    tail = f.tail_energy(2)
    kept = f.truncate(2)
    assert np.isclose(np.sqrt(kept.norm() ** 2 + tail ** 2), f.norm())
    with pytest.raises(PreconditionError):
        f.pad(2)


def test_multiply_matches_pointwise_product():
    rng = np.random.default_rng(17)
    f = random_banded(rng, 2.5, 2, 3, 3)
    g = random_banded(rng, 2.5, 3, 2, 4)
    p = multiply(f, g)
    assert p.band == 7
    for t in (0.0, 0.4, 1.9):
        assert np.abs(p.evaluate(t) - f.evaluate(t) @ g.evaluate(t)).max() < 1e-12


def test_multiply_rejects_mismatch():
    f = FourierMatrix.identity(1.0, 2)
    g = FourierMatrix.identity(2.0, 2)
    with pytest.raises(PreconditionError):
        multiply(f, g)
    h = FourierMatrix.zeros(1.0, 3, 1)
    with pytest.raises(PreconditionError):
        multiply(f, h)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    bf=st.integers(0, 5),
    bg=st.integers(0, 5),
    inner=st.integers(1, 3),
)
def test_multiply_is_exact_for_banded_factors(seed, bf, bg, inner):
    rng = np.random.default_rng(seed)
    f = random_banded(rng, 2.0, 2, inner, bf)
    g = random_banded(rng, 2.0, inner, 2, bg)
    p = multiply(f, g)
    grid = TimeGrid.for_band(2.0, p.band)
    direct = np.einsum("ikt,kjt->ijt", f.evaluate(grid.times),
                       g.evaluate(grid.times))
    back = analyze(direct, 2.0, band=p.band)
    assert np.abs(p.phasors - back.phasors).max() < 1e-11 * max(
        1.0, np.abs(back.phasors).max())


def test_invert_pointwise_identity():
    rng = np.random.default_rng(19)
    r = random_banded(rng, 1.0, 2, 2, 2, scale=0.2)
    r = r + FourierMatrix.from_constant(1.0, 4.0 * np.eye(2))
    rinv, defect = invert_pointwise(r, band=24)
    prod = multiply(r, rinv)
    for t in (0.0, 0.33, 0.71):
        assert np.abs(prod.evaluate(t) - np.eye(2)).max() < 1e-9
    assert defect < 1e-9
    # the default band is a deliberate truncation: wider band, smaller defect
    _, coarse = invert_pointwise(r)
    assert defect < coarse


def test_invert_pointwise_rejects_singular_signal():
    from harmonic_ltp.errors import NearSingularError
    ph = np.zeros((1, 1, 3), dtype=complex)
    ph[0, 0, 1] = 0.0
    ph[0, 0, 2] = 0.5
    ph[0, 0, 0] = 0.5  # cos(w t): vanishes twice per period
    r = FourierMatrix(1.0, ph, real=True)
    with pytest.raises(NearSingularError):
        invert_pointwise(r)


def test_evaluate_free_function_and_norms():
    rng = np.random.default_rng(23)
    f = random_banded(rng, 2.0, 2, 2, 3)
    assert np.allclose(evaluate(f, 0.2), f.evaluate(0.2))
    # Parseval: stacked-coefficient norm equals rms over a period
    grid = TimeGrid.for_band(2.0, 3)
    vals = f.evaluate(grid.times)
    rms = np.sqrt((np.abs(vals) ** 2).sum() / vals.shape[2])
    assert np.isclose(f.norm(), rms)
    assert f.linf_norm() >= np.linalg.norm(f.evaluate(0.5), 2) - 1e-9


def test_reconstruct_trajectory_from_constant_phasors():
    period = 1.0
    times = np.linspace(0.0, 2.0, 9)
    # constant phasors [0.5, 1, 0.5] at k = -1, 0, 1: x(t) = 1 + cos(2 pi t)
    samples = np.zeros((1, 3, times.size), dtype=complex)
    samples[0, 0, :] = 0.5
    samples[0, 1, :] = 1.0
    samples[0, 2, :] = 0.5
    traj = reconstruct_trajectory(times, samples, period,
                                  dX0=np.zeros((1, times.size)))
    expected = 1.0 + np.cos(2 * np.pi * times)
    assert np.allclose(traj[0, :], expected, atol=1e-12)
