"""Block Toeplitz / Hankel realizations of periodic matrix symbols.

A matrix signal A(t) = sum_k A_k exp(1j*omega*k*t) acts on phasor vectors
by discrete convolution; its matrix realization is block Toeplitz, one
Toeplitz block per scalar entry, with block (i, j) holding a_{ij, r-c} at
position (r, c), r and c being harmonic indices.  Finite sections keep the
central square r, c in [-m, m].

Products of finite sections are not sections of the product; the defect is
a pair of finite-rank Hankel corrections supported in opposite corners:

    T_m(A) T_m(B) = T_m(AB) - H+(A) H-(B) - J H-(A) H+(B) J

with J the per-block index flip.  The helpers here build all pieces of that
identity, one-sided truncations on a larger working band, and the harmonic
operator A_m - N_m whose diagonal correction N carries 1j*omega*k.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import PreconditionError
from .fourier import FourierMatrix, PhasorVector, multiply

__all__ = [
    "BlockToeplitzOperator",
    "BlockHankelOperator",
    "HarmonicOperator",
    "toeplitz",
    "truncations",
    "hankel",
    "flip_matrix",
    "product_with_correction",
    "truncation_residual",
    "operator_norms",
    "harmonic_operator",
    "harmonic_dense",
]

# Dense realizations beyond this edge size are refused; callers wanting
# larger truncations need a sparse backend this package does not provide.
MAX_DENSE_DIM = 4096


def _coef_matrix(coefs: np.ndarray, band: int, kindex: np.ndarray) -> np.ndarray:
    """Look up coefficients a_k for a (possibly 2-d) array of indices k."""
    clipped = np.clip(kindex + band, 0, 2 * band)
    vals = coefs[clipped]
    vals = np.where(np.abs(kindex) <= band, vals, 0.0)
    return vals


def _toeplitz_block(coefs: np.ndarray, band: int, row_idx: np.ndarray,
                    col_idx: np.ndarray) -> np.ndarray:
    return _coef_matrix(coefs, band, row_idx[:, None] - col_idx[None, :])


@dataclasses.dataclass(eq=False)
class BlockToeplitzOperator:
    """Finite section of a block Toeplitz operator.

    ``data`` is the dense realization; blocks are laid out component-major,
    i.e. rows [i*(len of row index range)] belong to block row i.  The
    harmonic index ranges are stored explicitly so one-sided truncations
    (which are not centered) carry their own bookkeeping.
    """

    period: float
    block_rows: int
    block_cols: int
    row_range: tuple[int, int]
    col_range: tuple[int, int]
    data: np.ndarray

    @property
    def trunc(self) -> int | None:
        """Central truncation order m, or None for one-sided sections."""
        if self.row_range == self.col_range and self.row_range[0] == -self.row_range[1]:
            return self.row_range[1]
        return None

    @property
    def rows_per_block(self) -> int:
        return self.row_range[1] - self.row_range[0] + 1

    @property
    def cols_per_block(self) -> int:
        return self.col_range[1] - self.col_range[0] + 1

    def block(self, i: int, j: int) -> np.ndarray:
        rp, cp = self.rows_per_block, self.cols_per_block
        return self.data[i * rp:(i + 1) * rp, j * cp:(j + 1) * cp]

    def apply(self, x: PhasorVector) -> PhasorVector:
        m = self.trunc
        if m is None:
            raise PreconditionError("apply needs a central truncation")
        if x.n != self.block_cols:
            raise PreconditionError("component count mismatch")
        y = self.data @ x.truncate(m).flatten()
        return PhasorVector.from_flat(self.period, y, self.block_rows)


def _realize(f: FourierMatrix, row_range: tuple[int, int],
             col_range: tuple[int, int]) -> BlockToeplitzOperator:
    rp = row_range[1] - row_range[0] + 1
    cp = col_range[1] - col_range[0] + 1
    if rp < 1 or cp < 1:
        raise PreconditionError("empty harmonic index range")
    if f.rows * rp > MAX_DENSE_DIM or f.cols * cp > MAX_DENSE_DIM:
        raise PreconditionError(
            f"dense realization {f.rows * rp}x{f.cols * cp} exceeds cap {MAX_DENSE_DIM}"
        )
    row_idx = np.arange(row_range[0], row_range[1] + 1)
    col_idx = np.arange(col_range[0], col_range[1] + 1)
    data = np.empty((f.rows * rp, f.cols * cp), dtype=complex)
    for i in range(f.rows):
        for j in range(f.cols):
            data[i * rp:(i + 1) * rp, j * cp:(j + 1) * cp] = _toeplitz_block(
                f.phasors[i, j], f.band, row_idx, col_idx
            )
    return BlockToeplitzOperator(f.period, f.rows, f.cols, row_range, col_range, data)


def toeplitz(f: FourierMatrix, m: int) -> BlockToeplitzOperator:
    """Central finite section T_m(f), blocks of size (2m+1)."""
    if m < 0:
        raise PreconditionError("truncation order must be >= 0")
    return _realize(f, (-m, m), (-m, m))


def truncations(f: FourierMatrix, kind: str, m: int,
                working_band: int | None = None) -> BlockToeplitzOperator:
    """One- or two-sided truncations realized on a finite working band.

    kind = "central" keeps indices [-m, m]; "left" removes indices below -m
    (the upper-left part of the doubly infinite array), keeping [-m, M];
    "right" removes indices above +m, keeping [-M, m].  M defaults to 4*m
    and stands in for the semi-infinite remainder.  Applying "left" and then
    "right" at the same m reproduces the central section.
    """
    big = working_band if working_band is not None else 4 * max(m, 1)
    if big < m:
        raise PreconditionError("working band must be >= m")
    if kind == "central":
        return _realize(f, (-m, m), (-m, m))
    if kind == "left":
        return _realize(f, (-m, big), (-m, big))
    if kind == "right":
        return _realize(f, (-big, m), (-big, m))
    raise PreconditionError(f"unknown truncation kind {kind!r}")


def flip_matrix(n_blocks: int, size: int) -> np.ndarray:
    """Id_n (x) J, J the anti-diagonal flip of the given size."""
    return np.kron(np.eye(n_blocks), np.eye(size)[::-1])


def _hankel_block(coefs: np.ndarray, band: int, sign: int,
                  nrows: int, ncols: int) -> np.ndarray:
    i = np.arange(nrows)[:, None]
    j = np.arange(ncols)[None, :]
    return _coef_matrix(coefs, band, sign * (i + j + 1))


@dataclasses.dataclass(eq=False)
class BlockHankelOperator:
    """Window of the Hankel operator of the causal (+) or anticausal (-) part.

    For sign +1 the (i, j) entry of each block is a_{i+j-1} (1-based), for
    sign -1 it is a_{-i-j+1}.  These have finite rank (at most band) and
    finite support for banded symbols, and are exactly the corner defects
    in the finite-section product identity.
    """

    period: float
    block_rows: int
    block_cols: int
    sign: int
    data: np.ndarray

    def norm(self) -> float:
        return float(np.linalg.norm(self.data, 2))


def hankel(f: FourierMatrix, sign: int, p: int | None = None,
           q: int | None = None,
           raw_shape: tuple[int, int] | None = None) -> BlockHankelOperator:
    """Hankel window of the (anti)causal part of f.

    By default blocks have shape (2p+1) x (2q+1) (q defaults to p), the
    window convention used by the product identity.  ``raw_shape``
    overrides with explicit per-block (rows, cols) counts, which the
    semi-infinite truncation identity needs.
    """
    if sign not in (+1, -1):
        raise PreconditionError("sign must be +1 or -1")
    if raw_shape is not None:
        nrows, ncols = raw_shape
    else:
        if p is None:
            raise PreconditionError("hankel needs p or raw_shape")
        q = p if q is None else q
        nrows, ncols = 2 * p + 1, 2 * q + 1
    if f.rows * nrows > MAX_DENSE_DIM or f.cols * ncols > MAX_DENSE_DIM:
        raise PreconditionError("Hankel window exceeds dense cap")
    data = np.empty((f.rows * nrows, f.cols * ncols), dtype=complex)
    for i in range(f.rows):
        for j in range(f.cols):
            data[i * nrows:(i + 1) * nrows, j * ncols:(j + 1) * ncols] = \
                _hankel_block(f.phasors[i, j], f.band, sign, nrows, ncols)
    return BlockHankelOperator(f.period, f.rows, f.cols, sign, data)


@dataclasses.dataclass(eq=False)
class ProductCorrection:
    """All terms of T_m(A) T_m(B) = T_m(AB) - E_plus - E_minus."""

    product: np.ndarray
    toeplitz_of_product: np.ndarray
    e_plus: np.ndarray
    e_minus: np.ndarray

    def residual(self) -> float:
        lhs = self.product
        rhs = self.toeplitz_of_product - self.e_plus - self.e_minus
        return float(np.linalg.norm(lhs - rhs, "fro"))


def product_with_correction(a: FourierMatrix, b: FourierMatrix, m: int,
                            eta: int | None = None) -> ProductCorrection:
    """Finite-section product and its exact Hankel corner corrections.

    The inner window order eta must cover the larger of the two bands so
    the Hankel products capture the full spillover; it defaults to exactly
    that.  The identity then holds to rounding for banded symbols.
    """
    if a.cols != b.rows:
        raise PreconditionError("inner dimensions differ")
    min_eta = max(a.band, b.band)
    if eta is None:
        eta = min_eta
    if eta < min_eta:
        raise PreconditionError(
            f"eta = {eta} too small; needs >= max factor band {min_eta}"
        )
    ta = toeplitz(a, m)
    tb = toeplitz(b, m)
    ab = multiply(a, b)
    e_plus = hankel(a, +1, m, eta).data @ hankel(b, -1, eta, m).data
    jn_left = flip_matrix(a.rows, 2 * m + 1)
    jn_right = flip_matrix(b.cols, 2 * m + 1)
    e_minus = jn_left @ (hankel(a, -1, m, eta).data
                         @ hankel(b, +1, eta, m).data) @ jn_right
    return ProductCorrection(
        product=ta.data @ tb.data,
        toeplitz_of_product=toeplitz(ab, m).data,
        e_plus=e_plus,
        e_minus=e_minus,
    )


@dataclasses.dataclass(eq=False)
class TruncationResidual:
    """Pieces of T_m(a) x|_m = (T(a) x)|_m - H+(a) J x^- - J H-(a) x^+."""

    lhs: np.ndarray
    full_product: np.ndarray
    correction_plus: np.ndarray
    correction_minus: np.ndarray

    @property
    def rhs(self) -> np.ndarray:
        return self.full_product - self.correction_plus - self.correction_minus

    def residual(self) -> float:
        return float(np.linalg.norm(self.lhs - self.rhs))


def truncation_residual(a: FourierMatrix, x: PhasorVector,
                        m: int) -> TruncationResidual:
    """Exact bookkeeping of what a central truncation loses on a vector.

    ``x`` lives on a working band M > m standing in for the full vector;
    the two correction terms involve only its tail components beyond m,
    hit by Hankel windows of the causal/anticausal parts of the symbol.
    """
    big = x.band
    if big <= m:
        raise PreconditionError("x must carry a working band larger than m")
    if x.n != a.cols:
        raise PreconditionError("component count mismatch")
    width = 2 * m + 1
    tail = big - m

    lhs = toeplitz(a, m).apply(x.truncate(m)).flatten()

    # exact doubly infinite product, then central slice
    full = np.zeros((a.rows, width), dtype=complex)
    for i in range(a.rows):
        acc = np.zeros(2 * (big + a.band) + 1, dtype=complex)
        for j in range(a.cols):
            acc += np.convolve(a.phasors[i, j], x.coeffs[j])
        center = big + a.band
        full[i] = acc[center - m:center + m + 1]

    # tails ordered outward from the kept window
    x_plus = x.coeffs[:, -tail:]               # x_{m+1} .. x_{M}
    x_minus_rev = x.coeffs[:, :tail][:, ::-1]  # x_{-m-1} .. x_{-M}

    corr_plus = np.zeros((a.rows, width), dtype=complex)
    corr_minus = np.zeros((a.rows, width), dtype=complex)
    for i in range(a.rows):
        for j in range(a.cols):
            h_plus = _hankel_block(a.phasors[i, j], a.band, +1, width, tail)
            h_minus = _hankel_block(a.phasors[i, j], a.band, -1, width, tail)
            corr_plus[i] += h_plus @ x_minus_rev[j]
            corr_minus[i] += (h_minus @ x_plus[j])[::-1]
    return TruncationResidual(
        lhs=lhs,
        full_product=full.reshape(-1),
        correction_plus=corr_plus.reshape(-1),
        correction_minus=corr_minus.reshape(-1),
    )


@dataclasses.dataclass(frozen=True)
class OperatorNorms:
    sigma_plus: float
    linf: float
    hankel_plus: float
    hankel_minus: float
    frobenius: float


def operator_norms(f: FourierMatrix, m: int) -> OperatorNorms:
    """Spectral norms of the finite section and its Hankel parts.

    The finite section norm never exceeds the essential sup of the spectral
    norm of f(t) (estimated on a fine grid) and increases towards it with
    m; the same bound caps both Hankel operators.  ``frobenius`` is the
    stacked-coefficient norm (the L2 mean over one period), the cheap size
    certificate used by the solvers; it is not an operator-norm bound.
    """
    sec = toeplitz(f, m)
    sigma_plus = float(np.linalg.norm(sec.data, 2))
    linf = f.linf_norm()
    w = max(f.band, 1)
    h_plus = hankel(f, +1, raw_shape=(w, w)).norm()
    h_minus = hankel(f, -1, raw_shape=(w, w)).norm()
    fro = f.norm()
    assert sigma_plus <= linf + 1e-9, \
        f"finite section norm {sigma_plus} exceeds L-inf bound {linf}"
    assert max(h_plus, h_minus) <= linf + 1e-9, \
        "Hankel norm exceeds L-inf bound"
    return OperatorNorms(sigma_plus, linf, h_plus, h_minus, fro)


@dataclasses.dataclass(eq=False)
class HarmonicOperator:
    """Finite section A_m - N_m of the harmonic state operator.

    N is block diagonal, Id_n (x) diag(1j*omega*k), so subtracting it adds
    the frequency ladder the lifted dynamics X' = (A - N) X carries.
    """

    toeplitz: BlockToeplitzOperator
    omega: float

    @property
    def trunc(self) -> int:
        m = self.toeplitz.trunc
        if m is None:
            raise PreconditionError("harmonic operator needs a central section")
        return m

    @property
    def dim(self) -> int:
        return self.toeplitz.data.shape[0]

    def n_diagonal(self) -> np.ndarray:
        m = self.trunc
        k = np.arange(-m, m + 1)
        return np.tile(1j * self.omega * k, self.toeplitz.block_rows)

    def dense(self) -> np.ndarray:
        out = self.toeplitz.data.copy()
        out[np.diag_indices_from(out)] -= self.n_diagonal()
        return out

    def apply(self, x: PhasorVector) -> PhasorVector:
        y = self.toeplitz.apply(x)
        ladder = self.n_diagonal().reshape(x.n, -1)
        return PhasorVector(x.period, y.coeffs - ladder * x.truncate(self.trunc).coeffs)


def harmonic_operator(f: FourierMatrix, m: int) -> HarmonicOperator:
    if f.rows != f.cols:
        raise PreconditionError("harmonic operator needs a square symbol")
    return HarmonicOperator(toeplitz(f, m), f.omega)


def harmonic_dense(f: FourierMatrix, m: int) -> np.ndarray:
    """Dense A_m - N_m in one call."""
    return harmonic_operator(f, m).dense()
