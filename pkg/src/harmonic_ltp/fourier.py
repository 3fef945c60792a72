"""Phasor-domain representation of matrix-valued periodic signals.

A T-periodic matrix signal A(t) is stored through its Fourier coefficients

    A(t) = sum_k  A_k exp(1j * omega * k * t),     omega = 2*pi/T,

with the convention that index k > 0 multiplies exp(+1j*omega*k*t).  This
convention is the single source of truth for every module in the package;
all sign choices downstream (Toeplitz layouts, harmonic operators, solvers)
derive from it.

Coefficients are held in a dense (rows, cols, 2*band+1) array; slot
``band + k`` holds the coefficient of exp(1j*omega*k*t).
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import NearSingularError, PreconditionError

__all__ = [
    "TimeGrid",
    "FourierMatrix",
    "PhasorVector",
    "analyze",
    "evaluate",
    "multiply",
    "invert_pointwise",
    "reconstruct_trajectory",
    "sliding_analyze",
]

# Checking conjugate symmetry of "real" signals tolerates this much relative
# asymmetry before refusing; below it the coefficients are exactly folded.
_REAL_SYMMETRY_RTOL = 1e-8


def _next_pow2(n: int) -> int:
    p = 1
    while p < n:
        p *= 2
    return p


@dataclasses.dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling of one period, t_i = i*T/N for i = 0..N-1."""

    period: float
    samples: int

    def __post_init__(self):
        if self.period <= 0:
            raise PreconditionError("period must be positive")
        if self.samples < 2 or (self.samples & (self.samples - 1)):
            raise PreconditionError("samples must be a power of two >= 2")

    @classmethod
    def for_band(cls, period: float, band: int) -> "TimeGrid":
        """Grid large enough to analyze signals of the given band exactly.

        The size is the next power of two >= 4*band + 4, which leaves an
        anti-aliasing margin of a full band on top of the Nyquist minimum.
        """
        return cls(period, _next_pow2(max(4 * band + 4, 8)))

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples) * (self.period / self.samples)

    @property
    def max_band(self) -> int:
        # FFT analysis on N samples is exact for bands up to N/2 - 1
        return self.samples // 2 - 1


@dataclasses.dataclass(eq=False)
class FourierMatrix:
    """Banded Fourier coefficients of a matrix-valued periodic signal.

    Parameters
    ----------
    period : float
        Period T of the signal.
    phasors : ndarray, shape (rows, cols, 2*band+1)
        Complex coefficients; slot band+k belongs to exp(1j*omega*k*t).
    real : bool
        Declares the time-domain signal real-valued.  Construction checks
        the conjugate symmetry A_{-k} = conj(A_k) and folds the coefficients
        exactly onto it; a violation beyond rounding raises.
    """

    period: float
    phasors: np.ndarray
    real: bool = False

    def __post_init__(self):
        self.phasors = np.asarray(self.phasors, dtype=complex)
        if self.phasors.ndim != 3 or self.phasors.shape[2] % 2 != 1:
            raise PreconditionError(
                "phasors must have shape (rows, cols, 2*band+1)"
            )
        if self.period <= 0:
            raise PreconditionError("period must be positive")
        if self.real:
            flipped = self.phasors[:, :, ::-1].conj()
            scale = np.abs(self.phasors).max() or 1.0
            err = np.abs(self.phasors - flipped).max()
            if err > _REAL_SYMMETRY_RTOL * max(scale, 1.0):
                raise PreconditionError(
                    f"real=True but phasors break conjugate symmetry by {err:.3e}"
                )
            self.phasors = 0.5 * (self.phasors + flipped)

    # -- basic queries -------------------------------------------------

    @property
    def rows(self) -> int:
        return self.phasors.shape[0]

    @property
    def cols(self) -> int:
        return self.phasors.shape[1]

    @property
    def band(self) -> int:
        return (self.phasors.shape[2] - 1) // 2

    @property
    def omega(self) -> float:
        return 2.0 * np.pi / self.period

    def phasor(self, i: int, j: int, k: int) -> complex:
        """Coefficient of exp(1j*omega*k*t) in entry (i, j); 0 outside band."""
        if abs(k) > self.band:
            return 0.0 + 0.0j
        return complex(self.phasors[i, j, self.band + k])

    def entry(self, i: int, j: int) -> np.ndarray:
        """Coefficient vector of entry (i, j), length 2*band+1."""
        return self.phasors[i, j].copy()

    # -- constructors --------------------------------------------------

    @classmethod
    def from_constant(cls, period: float, value: np.ndarray,
                      real: bool | None = None) -> "FourierMatrix":
        value = np.atleast_2d(np.asarray(value, dtype=complex))
        if real is None:
            real = bool(np.abs(value.imag).max() == 0.0) if value.size else True
        return cls(period, value[:, :, None], real=real)

    @classmethod
    def zeros(cls, period: float, rows: int, cols: int, band: int = 0,
              real: bool = True) -> "FourierMatrix":
        return cls(period, np.zeros((rows, cols, 2 * band + 1), dtype=complex),
                   real=real)

    @classmethod
    def identity(cls, period: float, n: int) -> "FourierMatrix":
        return cls.from_constant(period, np.eye(n), real=True)

    # -- band manipulation ----------------------------------------------

    def pad(self, band: int) -> "FourierMatrix":
        """Zero-extend the coefficient array to a larger band."""
        if band < self.band:
            raise PreconditionError("pad target band smaller than current band")
        extra = band - self.band
        ph = np.zeros(self.phasors.shape[:2] + (2 * band + 1,), dtype=complex)
        ph[:, :, extra:extra + self.phasors.shape[2]] = self.phasors
        return FourierMatrix(self.period, ph, real=self.real)

    def truncate(self, band: int) -> "FourierMatrix":
        """Drop coefficients beyond the given band (zero-pads if larger)."""
        if band >= self.band:
            return self.pad(band)
        cut = self.band - band
        return FourierMatrix(self.period, self.phasors[:, :, cut:-cut].copy(),
                             real=self.real)

    def tail_energy(self, band: int) -> float:
        """l2 mass of the coefficients outside the given band."""
        if band >= self.band:
            return 0.0
        cut = self.band - band
        tail = np.concatenate(
            [self.phasors[:, :, :cut], self.phasors[:, :, -cut:]], axis=2
        )
        return float(np.linalg.norm(tail.ravel()))

    # -- pointwise / algebraic operations --------------------------------

    def evaluate(self, t) -> np.ndarray:
        """Evaluate the coefficient series at time(s) t.

        Returns an array of shape (rows, cols) for scalar t, or
        (rows, cols, len(t)) for a 1-d array of times.  Real-flagged
        signals come back as float arrays.
        """
        t_arr = np.asarray(t, dtype=float)
        k = np.arange(-self.band, self.band + 1)
        ph = np.exp(1j * self.omega * np.multiply.outer(k, t_arr))
        out = np.tensordot(self.phasors, ph, axes=([2], [0]))
        if self.real:
            out = out.real
        return out

    def sample(self, grid: TimeGrid) -> np.ndarray:
        return self.evaluate(grid.times)

    def derivative(self) -> "FourierMatrix":
        """Time derivative: multiplies coefficient k by 1j*omega*k."""
        k = np.arange(-self.band, self.band + 1)
        return FourierMatrix(self.period, self.phasors * (1j * self.omega * k),
                             real=self.real)

    def transpose(self) -> "FourierMatrix":
        return FourierMatrix(self.period, self.phasors.transpose(1, 0, 2),
                             real=self.real)

    def adjoint(self) -> "FourierMatrix":
        """Pointwise conjugate transpose A(t)^*; for real signals, A(t)'."""
        ph = self.phasors.transpose(1, 0, 2)[:, :, ::-1].conj()
        return FourierMatrix(self.period, ph, real=self.real)

    def conjugate(self) -> "FourierMatrix":
        ph = self.phasors[:, :, ::-1].conj()
        return FourierMatrix(self.period, ph, real=self.real)

    def block_column(self, j: int) -> "FourierMatrix":
        return FourierMatrix(self.period, self.phasors[:, j:j + 1, :],
                             real=False)

    def norm(self) -> float:
        """Stacked-coefficient Frobenius norm (= L2 norm over one period)."""
        return float(np.linalg.norm(self.phasors.ravel()))

    def linf_norm(self, samples: int | None = None) -> float:
        """Max spectral norm over a fine sampling of one period."""
        n = samples or max(2048, _next_pow2(64 * max(self.band, 1)))
        vals = self.evaluate(TimeGrid(self.period, _next_pow2(n)).times)
        return float(np.linalg.norm(vals.transpose(2, 0, 1), ord=2, axis=(1, 2)).max())

    # -- arithmetic -------------------------------------------------------

    def _binary(self, other: "FourierMatrix", sign: float) -> "FourierMatrix":
        if not np.isclose(self.period, other.period):
            raise PreconditionError("period mismatch")
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise PreconditionError("shape mismatch")
        band = max(self.band, other.band)
        a, b = self.pad(band), other.pad(band)
        return FourierMatrix(self.period, a.phasors + sign * b.phasors,
                             real=self.real and other.real)

    def __add__(self, other):
        return self._binary(other, 1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __neg__(self):
        return FourierMatrix(self.period, -self.phasors, real=self.real)

    def __mul__(self, scalar):
        scalar = complex(scalar)
        real = self.real and scalar.imag == 0.0
        return FourierMatrix(self.period, self.phasors * scalar, real=real)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return multiply(self, other)


@dataclasses.dataclass(eq=False)
class PhasorVector:
    """Phasor coefficients of an n-component harmonic state, band m.

    ``coeffs[i, m + k]`` is the phasor of component i at harmonic k.  The
    flattened layout is component-major: component 0's 2m+1 phasors first,
    then component 1's, matching the Id_n (x) diag block structure of the
    harmonic operators.
    """

    period: float
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.ndim != 2 or self.coeffs.shape[1] % 2 != 1:
            raise PreconditionError("coeffs must have shape (n, 2*m+1)")

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def band(self) -> int:
        return (self.coeffs.shape[1] - 1) // 2

    @property
    def omega(self) -> float:
        return 2.0 * np.pi / self.period

    def flatten(self) -> np.ndarray:
        return self.coeffs.reshape(-1).copy()

    @classmethod
    def from_flat(cls, period: float, vec: np.ndarray, n: int) -> "PhasorVector":
        vec = np.asarray(vec, dtype=complex)
        if vec.size % n:
            raise PreconditionError("flat vector length not divisible by n")
        return cls(period, vec.reshape(n, -1))

    def pad(self, band: int) -> "PhasorVector":
        if band < self.band:
            raise PreconditionError("pad target band smaller than current band")
        extra = band - self.band
        return PhasorVector(self.period, np.pad(self.coeffs, ((0, 0), (extra, extra))))

    def truncate(self, band: int) -> "PhasorVector":
        if band >= self.band:
            return self.pad(band)
        cut = self.band - band
        return PhasorVector(self.period, self.coeffs[:, cut:-cut].copy())

    def shift(self, k: int) -> "PhasorVector":
        """Shift all harmonics by k: new coefficient at p is old at p-k.

        Coefficients pushed past the band are dropped; the band is kept.
        """
        out = np.zeros_like(self.coeffs)
        size = self.coeffs.shape[1]
        if k >= 0:
            out[:, k:] = self.coeffs[:, :size - k]
        else:
            out[:, :size + k] = self.coeffs[:, -k:]
        return PhasorVector(self.period, out)

    def evaluate(self, t) -> np.ndarray:
        """Steady-state time signal sum_k X_k exp(1j*omega*k*t)."""
        t_arr = np.asarray(t, dtype=float)
        k = np.arange(-self.band, self.band + 1)
        ph = np.exp(1j * self.omega * np.multiply.outer(k, t_arr))
        return np.tensordot(self.coeffs, ph, axes=([1], [0]))

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs.ravel()))


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------


def analyze(samples: np.ndarray, period: float, band: int | None = None,
            real: bool | None = None) -> FourierMatrix:
    """Fourier coefficients of a signal sampled on a TimeGrid.

    Parameters
    ----------
    samples : ndarray, shape (N,) or (rows, cols, N)
        Values on the uniform grid t_i = i*T/N with N a power of two.
        Scalar signals may be passed 1-d and come back as 1x1 matrices.
    period : float
        Signal period T.
    band : int, optional
        Bands requested; defaults to the largest exact band N/2 - 1.
        Exact for band-limited signals within that range.
    real : bool, optional
        Real flag of the result; autodetected from the samples if omitted.

    Returns
    -------
    FourierMatrix
        Coefficients a_k = (1/T) * integral of a(t) exp(-1j*omega*k*t).
    """
    samples = np.asarray(samples)
    if samples.ndim == 1:
        samples = samples[None, None, :]
    if samples.ndim != 3:
        raise PreconditionError("samples must be (N,) or (rows, cols, N)")
    n_samp = samples.shape[2]
    if n_samp < 2 or (n_samp & (n_samp - 1)):
        raise PreconditionError("sample count must be a power of two")
    if band is None:
        band = n_samp // 2 - 1
    if band > n_samp // 2 - 1:
        raise PreconditionError(
            f"band {band} not resolvable with {n_samp} samples"
        )
    if real is None:
        real = bool(np.abs(np.asarray(samples).imag).max() == 0.0) \
            if np.iscomplexobj(samples) else True
    spec = np.fft.fft(samples, axis=2) / n_samp
    ph = np.empty(samples.shape[:2] + (2 * band + 1,), dtype=complex)
    for k in range(-band, band + 1):
        ph[:, :, band + k] = spec[:, :, k % n_samp]
    return FourierMatrix(period, ph, real=real)


def evaluate(f: FourierMatrix, t) -> np.ndarray:
    return f.evaluate(t)


def multiply(f: FourierMatrix, g: FourierMatrix,
             band: int | None = None) -> FourierMatrix:
    """Coefficients of the pointwise product f(t) g(t).

    The product coefficients are the matrix-valued convolution of the two
    coefficient sequences, computed by FFT along the harmonic axis at full
    band band_f + band_g, which is exact for banded factors.  If ``band``
    is given the result is truncated back to it; callers needing the
    dropped mass can query ``tail_energy`` before truncating.
    """
    if not np.isclose(f.period, g.period):
        raise PreconditionError("period mismatch")
    if f.cols != g.rows:
        raise PreconditionError(
            f"inner dimensions differ: {f.cols} vs {g.rows}"
        )
    full_band = f.band + g.band
    width = 2 * full_band + 1
    length = _next_pow2(width)
    ff = np.fft.fft(f.phasors, n=length, axis=2)
    gf = np.fft.fft(g.phasors, n=length, axis=2)
    conv = np.fft.ifft(np.einsum("ilk,ljk->ijk", ff, gf), axis=2)
    out = FourierMatrix(f.period, conv[:, :, :width],
                        real=f.real and g.real)
    if band is not None and band < full_band:
        out = out.truncate(band)
    return out


def invert_pointwise(r: FourierMatrix, band: int | None = None,
                     eta: float = 1e-9) -> tuple[FourierMatrix, float]:
    """Coefficients of t -> r(t)^-1 for a square signal bounded away from 0.

    Parameters
    ----------
    r : FourierMatrix
        Square matrix signal with |det r(t)| >= eta on the period.
    band : int, optional
        Output band; the inverse of a banded signal is generally full-band,
        so this is a genuine truncation.  Defaults to max(8, 4*band_r).
    eta : float
        Near-singularity threshold on |det r(t)| over the sampling grid.

    Returns
    -------
    (inv, residual)
        ``inv`` holds the truncated coefficients and ``residual`` is the
        max over a verification grid of ``norm(r(t) inv(t) - I)``.

    Raises
    ------
    NearSingularError
        If some sample has |det r(t)| < eta; the error carries the worst t.
    """
    if r.rows != r.cols:
        raise PreconditionError("pointwise inverse needs a square signal")
    if band is None:
        band = max(8, 4 * r.band)
    grid = TimeGrid.for_band(r.period, band + r.band)
    vals = r.evaluate(grid.times).transpose(2, 0, 1)
    dets = np.linalg.det(vals)
    worst = int(np.abs(dets).argmin())
    if np.abs(dets[worst]) < eta:
        t_bad = grid.times[worst]
        raise NearSingularError(
            f"|det r(t)| = {np.abs(dets[worst]):.3e} < eta at t = {t_bad:.6g}",
            t=float(t_bad), det=complex(dets[worst]),
        )
    inv_vals = np.linalg.inv(vals).transpose(1, 2, 0)
    inv = analyze(inv_vals, r.period, band=band, real=r.real)
    check = multiply(r, inv)
    eye = FourierMatrix.identity(r.period, r.rows).pad(check.band)
    residual = (check - eye).linf_norm(samples=max(512, 8 * check.band))
    return inv, residual


def reconstruct_trajectory(times: np.ndarray, phasor_samples: np.ndarray,
                           period: float,
                           dX0: np.ndarray | None = None) -> np.ndarray:
    """Rebuild x(t) from time-varying sliding-window phasors.

    Implements the exact inversion of the sliding Fourier decomposition:

        x(t) = sum_p X_p(t) exp(1j*omega*p*t) + (T/2) * d/dt X_0(t).

    Parameters
    ----------
    times : ndarray, shape (Nt,)
        Times of the phasor snapshots.
    phasor_samples : ndarray, shape (n, 2m+1, Nt)
        X_p(t_i) for each component and harmonic.
    period : float
        Window length T.
    dX0 : ndarray, shape (n, Nt), optional
        Time derivative of the zeroth phasor.  When omitted it is estimated
        by central differences of X_0, which assumes a reasonably fine
        ``times`` spacing; steady-state phasors may simply pass zeros.
    """
    phasor_samples = np.asarray(phasor_samples, dtype=complex)
    n, width, n_t = phasor_samples.shape
    if width % 2 != 1:
        raise PreconditionError("phasor axis must have odd length 2m+1")
    band = (width - 1) // 2
    omega = 2.0 * np.pi / period
    k = np.arange(-band, band + 1)
    ph = np.exp(1j * omega * np.multiply.outer(k, np.asarray(times)))
    x = np.einsum("ikt,kt->it", phasor_samples, ph)
    if dX0 is None:
        dX0 = np.gradient(phasor_samples[:, band, :], times, axis=1)
    return x + 0.5 * period * np.asarray(dX0)


def sliding_analyze(x, period: float, band: int, t_eval: np.ndarray,
                    quad_points: int = 2048):
    """Sliding-window Fourier decomposition of a (possibly aperiodic) signal.

    For each requested t, computes X_k(t) = (1/T) * integral over
    [t-T, t] of x(tau) exp(-1j*omega*k*tau) d tau by trapezoid quadrature,
    plus the exact derivative dX_0/dt = (x(t) - x(t-T))/T.

    Parameters
    ----------
    x : callable
        Vector signal; x(tau) returns shape (n,) (or scalar).
    period, band : window length and number of harmonics kept.
    t_eval : times at which snapshots are taken.
    quad_points : trapezoid points per window.

    Returns
    -------
    (X, dX0) with X of shape (n, 2*band+1, len(t_eval)).
    """
    t_eval = np.asarray(t_eval, dtype=float)
    omega = 2.0 * np.pi / period
    k = np.arange(-band, band + 1)
    probe = np.atleast_1d(np.asarray(x(t_eval[0]), dtype=complex))
    n = probe.shape[0]
    X = np.empty((n, 2 * band + 1, t_eval.size), dtype=complex)
    dX0 = np.empty((n, t_eval.size), dtype=complex)
    for it, t in enumerate(t_eval):
        tau = np.linspace(t - period, t, quad_points + 1)
        vals = np.stack(
            [np.atleast_1d(np.asarray(x(s), dtype=complex)) for s in tau],
            axis=1,
        )
        kernel = np.exp(-1j * omega * np.multiply.outer(k, tau))
        integrand = vals[:, None, :] * kernel[None, :, :]
        X[:, :, it] = np.trapz(integrand, tau, axis=2) / period
        dX0[:, it] = (vals[:, -1] - vals[:, 0]) / period
    return X, dX0
