"""Block Toeplitz / Hankel operators and the finite-section product identity."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmonic_ltp.errors import PreconditionError
from harmonic_ltp.fourier import FourierMatrix, PhasorVector, multiply
from harmonic_ltp.toeplitz import (MAX_DENSE_DIM, flip_matrix, hankel,
                                   harmonic_dense, harmonic_operator,
                                   operator_norms, product_with_correction,
                                   toeplitz, truncation_residual)

from conftest import random_banded


def test_toeplitz_blocks_hold_coefficient_differences():
    rng = np.random.default_rng(31)
    f = random_banded(rng, 2.0, 2, 2, 2)
    m = 4
    op = toeplitz(f, m)
    width = 2 * m + 1
    assert op.data.shape == (2 * width, 2 * width)
    for i in range(2):
        for j in range(2):
            blk = op.block(i, j)
            for r in range(width):
                for c in range(width):
                    expected = f.phasor(i, j, (r - m) - (c - m))
                    assert blk[r, c] == pytest.approx(expected)


def test_toeplitz_apply_matches_dense():
    rng = np.random.default_rng(37)
    f = random_banded(rng, 1.0, 2, 3, 2)
    x = PhasorVector(1.0, rng.normal(size=(3, 9))
                     + 1j * rng.normal(size=(3, 9)))
    out = toeplitz(f, 4).apply(x)
    dense = toeplitz(f, 4).data @ x.flatten()
    assert np.allclose(out.flatten(), dense)


def test_harmonic_dense_is_toeplitz_minus_frequency_ladder():
    rng = np.random.default_rng(41)
    f = random_banded(rng, 2.0, 2, 2, 1)
    m = 3
    h = harmonic_dense(f, m)
    t = toeplitz(f, m).data
    width = 2 * m + 1
    omega = f.omega
    ladder = np.kron(np.eye(2), np.diag(1j * omega * np.arange(-m, m + 1)))
    assert np.allclose(h, t - ladder)
    op = harmonic_operator(f, m)
    assert np.allclose(op.dense(), h)


def test_flip_matrix_is_an_involution():
    j = flip_matrix(2, 5)
    assert np.allclose(j @ j, np.eye(10))


def test_product_identity_single_case():
    rng = np.random.default_rng(43)
    a = random_banded(rng, 1.5, 2, 2, 2)
    b = random_banded(rng, 1.5, 2, 2, 3)
    pc = product_with_correction(a, b, m=8)
    scale = np.linalg.norm(toeplitz(a, 8).data, "fro") \
        * np.linalg.norm(toeplitz(b, 8).data, "fro")
    assert pc.residual() <= 1e-13 * scale
    # corrections genuinely matter: dropping them breaks the identity
    naive = np.linalg.norm(pc.product - pc.toeplitz_of_product, "fro")
    assert naive > 1e3 * pc.residual()


def test_product_identity_eta_window_guard():
    rng = np.random.default_rng(47)
    a = random_banded(rng, 1.0, 1, 1, 3)
    b = random_banded(rng, 1.0, 1, 1, 1)
    with pytest.raises(PreconditionError):
        product_with_correction(a, b, m=6, eta=2)


@settings(max_examples=25, deadline=None)
@given(
    seed=st.integers(0, 10_000),
    n=st.integers(1, 3),
    ba=st.integers(0, 3),
    bb=st.integers(0, 3),
    m=st.sampled_from([4, 8, 16]),
)
def test_product_identity_property(seed, n, ba, bb, m):
    rng = np.random.default_rng(seed)
    a = random_banded(rng, 2.0, n, n, ba)
    b = random_banded(rng, 2.0, n, n, bb)
    pc = product_with_correction(a, b, m)
    scale = np.linalg.norm(pc.product, "fro") + 1.0
    assert pc.residual() <= 1e-12 * scale


def test_hankel_windows_vanish_for_constant_symbol():
    f = FourierMatrix.identity(1.0, 2)
    h = hankel(f, +1, 4, 4)
    assert np.abs(h.data).max() == 0.0


def test_truncation_residual_bookkeeping_is_exact():
    rng = np.random.default_rng(53)
    a = random_banded(rng, 1.0, 2, 2, 3)
    x = PhasorVector(1.0, rng.normal(size=(2, 31))
                     + 1j * rng.normal(size=(2, 31)))
    tr = truncation_residual(a, x, m=6)
    assert tr.residual() < 1e-12 * (np.linalg.norm(tr.lhs) + 1.0)
    # and the corrections are nonzero in general
    assert np.linalg.norm(tr.correction_plus) > 0.0


def test_truncation_residual_requires_working_band():
    a = FourierMatrix.identity(1.0, 1)
    x = PhasorVector(1.0, np.ones((1, 5)))
    with pytest.raises(PreconditionError):
        truncation_residual(a, x, m=2)


def test_operator_norms_orderings():
    rng = np.random.default_rng(59)
    f = random_banded(rng, 2.0, 2, 2, 2)
    norms = operator_norms(f, m=8)
    # truncation is a compression: finite-section norm below the sup norm
    assert norms.sigma_plus <= norms.linf + 1e-9
    assert max(norms.hankel_plus, norms.hankel_minus) <= norms.linf + 1e-9
    assert norms.frobenius == pytest.approx(f.norm())


def test_dense_dimension_cap():
    f = FourierMatrix.identity(1.0, 4)
    m_too_big = MAX_DENSE_DIM // 4 + 8
    with pytest.raises(PreconditionError):
        harmonic_dense(f, m_too_big)
