"""Floquet factorization of periodic systems in closed form.

For x' = A(t) x with A T-periodic, the state transition matrix factors as
Phi(t, 0) = W(t) exp(Lambda t) W(0)^-1 with W T-periodic and Lambda
constant.  Rather than taking a matrix logarithm of the monodromy matrix,
W is built column by column: an eigenpair (mu, phi) of Phi(T, 0) yields
lambda = log(mu)/T and a T-periodic eigenvector by integrating

    v' = (A(t) - lambda I) v,        v(0) = phi,

over one period; a defective multiplier extends to a Jordan chain where
column i carries the extra forcing -(1/(T mu)) v_{i-1}(t).  The periodic
columns are Fourier-analyzed, giving the factorization directly in the
phasor domain where W also diagonalizes the harmonic operator A - N.
"""

from __future__ import annotations

import dataclasses

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .errors import ConvergenceError, IntegrationError, PreconditionError
from .fourier import FourierMatrix, PhasorVector, TimeGrid, analyze, invert_pointwise, multiply

__all__ = [
    "Monodromy",
    "FloquetFactorization",
    "HarmonicSpectrum",
    "integrate_transition",
    "periodic_eigenvector",
    "floquet_factorize",
    "harmonic_spectrum",
]


@dataclasses.dataclass(eq=False)
class Monodromy:
    """State transition data over one period."""

    period: float
    phi_T: np.ndarray
    times: np.ndarray
    transition: np.ndarray          # Phi(t_i, 0) stacked along axis 0
    multipliers: np.ndarray
    liouville_error: float
    nfev: int
    solution: object = None         # dense interpolant Phi(t, 0)

    @property
    def n(self) -> int:
        return self.phi_T.shape[0]


def _solve(a: FourierMatrix, rhs, y0, t_span, rtol, atol, t_eval=None):
    sol = solve_ivp(rhs, t_span, y0, method="DOP853", rtol=rtol, atol=atol,
                    t_eval=t_eval, dense_output=True)
    if not sol.success:
        raise IntegrationError(
            f"transition integration failed: {sol.message}",
            t=float(sol.t[-1]) if sol.t.size else None,
        )
    return sol


def integrate_transition(a: FourierMatrix, rtol: float = 1e-10,
                         atol: float | None = None,
                         grid: TimeGrid | None = None) -> Monodromy:
    """Integrate Phi' = A(t) Phi over one period with an adaptive RK scheme.

    The returned object carries the monodromy matrix Phi(T, 0), samples of
    Phi(t, 0) on the grid, the Floquet multipliers and a Liouville
    consistency check: det Phi(T, 0) must equal exp(T * trace A_0), which
    only the mean coefficient contributes to.  The pass threshold scales
    with cond(Phi): the determinant of an ill-conditioned transition is
    formed by cancellation and cannot be more accurate than rtol times
    that amplification.

    The mean decay rate c = Re(trace A_0) / n is factored out before
    integrating (Y' = (A - cI) Y, Phi = exp(ct) Y).  Without this a
    strongly contracting transition falls below the absolute tolerance
    and loses all relative accuracy; the balanced system keeps det Y
    near one regardless of how contractive the plant is.
    """
    if a.rows != a.cols:
        raise PreconditionError("transition needs a square system")
    n = a.rows
    T = a.period
    if grid is None:
        grid = TimeGrid.for_band(T, max(16, 4 * a.band))
    atol = atol if atol is not None else rtol * 1e-2
    dtype = float if a.real else complex
    y0 = np.eye(n, dtype=dtype).ravel()
    trace0 = np.trace(a.phasors[:, :, a.band])
    c = float(np.real(trace0)) / n
    eye_c = c * np.eye(n)

    def rhs(t, y):
        return ((a.evaluate(t) - eye_c) @ y.reshape(n, n)).ravel()

    sol = _solve(a, rhs, y0, (0.0, T), rtol, atol)
    y_T = sol.y[:, -1].reshape(n, n)
    phi_T = y_T * np.exp(c * T)
    samples = (sol.sol(grid.times).T.reshape(-1, n, n)
               * np.exp(c * grid.times)[:, None, None])
    dets = np.linalg.det(y_T)
    expected = np.exp(T * (trace0 - n * c))
    liouville = abs(dets - expected) / abs(expected)
    threshold = max(1e-6, 100.0 * rtol * np.linalg.cond(y_T))
    if liouville > threshold:
        raise IntegrationError(
            f"Liouville check failed: det Phi relative error {liouville:.3e} "
            f"(threshold {threshold:.1e})",
            t=T,
        )

    def interpolant(t, _sol=sol.sol, _c=c):
        t_arr = np.asarray(t, dtype=float)
        vals = _sol(t)
        if t_arr.ndim == 0:
            return vals * np.exp(_c * float(t_arr))
        return vals * np.exp(_c * t_arr)[None, :]

    return Monodromy(
        period=T,
        phi_T=phi_T,
        times=grid.times,
        transition=samples,
        multipliers=np.linalg.eigvals(phi_T),
        liouville_error=float(liouville),
        nfev=int(sol.nfev),
        solution=interpolant,
    )


def periodic_eigenvector(a: FourierMatrix, lam: complex, phi: np.ndarray,
                         forcing=None, band: int | None = None,
                         rtol: float = 1e-10, direction: str = "forward"):
    """Integrate one periodic Floquet column and Fourier-analyze it.

    Parameters
    ----------
    a : FourierMatrix
        System matrix signal.
    lam : complex
        Floquet exponent of the column.
    phi : ndarray, shape (n,)
        Boundary value; an eigenvector (or chain vector) of the monodromy
        matrix for exp(lam*T).  Imposed at t=0 when integrating forward,
        at t=T when integrating backward.
    forcing : callable, optional
        Extra additive term f(t) for Jordan chains.
    band : int, optional
        Analysis band for the resulting phasors.
    direction : {"forward", "backward"}
        Integration direction.  Errors seeded into other Floquet
        directions grow like exp(Re(lam_q - lam_p) * t) going forward, so
        columns whose exponent lies left of the pack must be integrated
        backward to keep the contamination decaying.

    Returns
    -------
    (coeffs, residual, interpolant)
        coeffs has shape (n, 2*band+1); residual is norm(v(T) - v(0)); the
        dense interpolant lets chain successors reuse v(t).
    """
    n = a.rows
    T = a.period
    if band is None:
        band = max(24, 4 * a.band)
    grid = TimeGrid.for_band(T, band)

    if forcing is None:
        def rhs(t, v):
            return a.evaluate(t) @ v - lam * v
    else:
        def rhs(t, v):
            return a.evaluate(t) @ v - lam * v + forcing(t)

    span = (0.0, T) if direction == "forward" else (T, 0.0)
    sol = _solve(a, rhs, np.asarray(phi, dtype=complex), span,
                 rtol, rtol * 1e-2)
    v_end = sol.y[:, -1]
    residual = float(np.linalg.norm(v_end - np.asarray(phi, dtype=complex)))
    samples = sol.sol(grid.times)                      # (n, N)
    coeffs = analyze(samples[:, None, :], T, band=band, real=False)
    return coeffs.phasors[:, 0, :], residual, sol.sol


@dataclasses.dataclass(eq=False)
class FloquetFactorization:
    """Periodic eigenstructure W(t), Lambda with Phi(t,0) = W e^{Lambda t} W(0)^-1."""

    w: FourierMatrix
    lam: np.ndarray
    monodromy: Monodromy
    periodicity_residuals: np.ndarray
    ode_residual: float
    identity_residual: float
    w_inv: FourierMatrix
    w_inv_residual: float
    w_inv_ode_residual: float
    defective: bool
    chain_scales: list

    @property
    def base_eigenvalues(self) -> np.ndarray:
        return np.diag(self.lam).copy()

    @property
    def multipliers(self) -> np.ndarray:
        return self.monodromy.multipliers

    @property
    def period(self) -> float:
        return self.w.period


def _cluster_multipliers(mu: np.ndarray, rtol: float) -> list[list[int]]:
    """Group indices of multipliers closer than rtol (relative)."""
    order = np.argsort(-np.abs(mu))
    groups: list[list[int]] = []
    for idx in order:
        for g in groups:
            ref = mu[g[0]]
            if abs(mu[idx] - ref) <= rtol * max(1.0, abs(ref)):
                g.append(int(idx))
                break
        else:
            groups.append([int(idx)])
    return groups


def floquet_factorize(a: FourierMatrix, band: int | None = None,
                      tol: float = 1e-8, rtol: float | None = None,
                      defect_rtol: float = 1e-7,
                      defect_cond: float = 1e8) -> FloquetFactorization:
    """Full Floquet factorization via periodic eigenvector integration.

    Defectiveness of the monodromy matrix is declared only when a
    multiplier cluster is tighter than ``defect_rtol`` (relative) and the
    eigenvector matrix condition exceeds ``defect_cond``; such clusters get
    a single Jordan chain, rescaled to unit initial norm (the scale factor
    is recorded).  Raises if any periodic column misses closure ``tol``.
    """
    if a.rows != a.cols:
        raise PreconditionError("factorization needs a square system")
    n = a.rows
    T = a.period
    auto_band = band is None
    if auto_band:
        band = max(24, 4 * a.band)
    if rtol is None:
        rtol = min(1e-12, tol * 1e-2)
    mono = integrate_transition(a, rtol=rtol)
    mu_all, vecs = scipy.linalg.eig(mono.phi_T)
    cond = np.linalg.cond(vecs)
    groups = _cluster_multipliers(mu_all, defect_rtol)
    defective = any(len(g) > 1 for g in groups) and cond > defect_cond

    def columns_at(band):
        columns = np.empty((n, n, 2 * band + 1), dtype=complex)
        lam_mat = np.zeros((n, n), dtype=complex)
        residuals = np.empty(n)
        chain_scales: list[float] = []
        col = 0
        if not defective:
            exponents = np.log(mu_all.astype(complex)) / T
            re = exponents.real
            for p in range(n):
                lam = exponents[p]
                # forward amplifies directions to the right of lam, backward
                # those to the left; take whichever contaminates less
                amp_fwd = float(np.max(re - re[p]))
                amp_bwd = float(np.max(re[p] - re))
                direction = "forward" if amp_fwd <= amp_bwd else "backward"
                phi = vecs[:, p]
                coeffs, res, interp = periodic_eigenvector(
                    a, lam, phi, band=band, rtol=rtol, direction=direction
                )
                # the one-period map contracts toward the wanted direction,
                # so a couple of re-integrations refine boundary vector and
                # exponent past the accuracy of the monodromy eig
                for _ in range(3):
                    if res <= 0.1 * tol:
                        break
                    v_end = interp(T if direction == "forward" else 0.0)
                    rho = np.vdot(phi, v_end) / np.vdot(phi, phi)
                    if not np.isfinite(rho) or rho == 0:
                        break
                    drift = np.log(rho) / T
                    lam_try = (lam + drift if direction == "forward"
                               else lam - drift)
                    phi_try = v_end / np.linalg.norm(v_end)
                    coeffs2, res2, interp2 = periodic_eigenvector(
                        a, lam_try, phi_try, band=band, rtol=rtol,
                        direction=direction
                    )
                    if res2 >= res:
                        break
                    lam, phi = lam_try, phi_try
                    coeffs, res, interp = coeffs2, res2, interp2
                columns[:, col, :] = coeffs
                lam_mat[col, col] = lam
                residuals[col] = res
                col += 1
        else:
            col = 0
            for g in groups:
                mu = complex(np.mean(mu_all[g]))
                lam = np.log(mu) / T
                size = len(g)
                shifted = mono.phi_T - mu * np.eye(n)
                # chain start: most singular right direction of the shift
                _, _, vh = np.linalg.svd(shifted)
                phi = vh[-1].conj()
                scale = 1.0 / np.linalg.norm(phi)
                chain_vectors = [phi * scale]
                for _ in range(size - 1):
                    nxt, *_ = np.linalg.lstsq(shifted, chain_vectors[-1],
                                              rcond=None)
                    chain_vectors.append(nxt)
                if size > 1:
                    chain_scales.append(float(scale))
                prev_interp = None
                for i, phi_i in enumerate(chain_vectors):
                    if i == 0:
                        forcing = None
                    else:
                        interp = prev_interp
                        factor = -1.0 / (T * mu)

                        def forcing(t, _interp=interp, _f=factor):
                            return _f * _interp(t)

                    coeffs, res, prev_interp = periodic_eigenvector(
                        a, lam, phi_i, forcing=forcing, band=band, rtol=rtol
                    )
                    columns[:, col, :] = coeffs
                    lam_mat[col, col] = lam
                    if i > 0:
                        lam_mat[col - 1, col] = 1.0 / (T * mu)
                    residuals[col] = res
                    col += 1
        return columns, lam_mat, residuals, chain_scales

    columns, lam_mat, residuals, chain_scales = columns_at(band)
    if auto_band:
        # grow until the phasor tail of W is resolved (cap keeps runaway
        # growth from chasing the integrator noise floor)
        while band < 128:
            tail = np.abs(columns[:, :, [0, 1, -2, -1]]).max()
            if tail <= 1e-9 * max(1.0, np.abs(columns).max()):
                break
            band = min(128, 2 * band)
            columns, lam_mat, residuals, chain_scales = columns_at(band)

    worst = float(residuals.max())
    if worst > tol:
        raise ConvergenceError(
            f"periodic eigenvector closure {worst:.3e} exceeds tol {tol:.1e}",
            last_residual=worst,
        )

    w = FourierMatrix(T, columns, real=False)
    lam_const = FourierMatrix.from_constant(T, lam_mat, real=False)
    resid_fm = w.derivative() - multiply(a, w) + multiply(w, lam_const)
    ode_residual = resid_fm.norm()

    w_T = w.evaluate(T)
    target = np.linalg.solve(w_T, mono.phi_T @ w_T)
    identity_residual = float(
        np.linalg.norm(scipy.linalg.expm(lam_mat * T) - target, 2)
    )
    w_inv, w_inv_residual = invert_pointwise(w, band=band)
    # differential cross-check for the inverse: (W^-1)' + W^-1 A - Lam W^-1
    winv_ode = (w_inv.derivative() + multiply(w_inv, a)
                - multiply(lam_const, w_inv))
    return FloquetFactorization(
        w=w,
        lam=lam_mat,
        monodromy=mono,
        periodicity_residuals=residuals,
        ode_residual=float(ode_residual),
        identity_residual=identity_residual,
        w_inv=w_inv,
        w_inv_residual=float(w_inv_residual),
        w_inv_ode_residual=float(winv_ode.norm()),
        defective=defective,
        chain_scales=chain_scales,
    )


@dataclasses.dataclass(eq=False)
class HarmonicSpectrum:
    """Exact spectrum of the harmonic operator A - N from Floquet data.

    The spectrum is the lattice {lambda_p + 1j*omega*k, k integer} over the
    base Floquet exponents lambda_p; it is unbounded and discrete, and the
    operator is invertible exactly when no lattice point hits zero, with
    inverse norm controlled by the closest approach.
    """

    period: float
    base: np.ndarray
    factorization: FloquetFactorization | None = None

    @property
    def omega(self) -> float:
        return 2.0 * np.pi / self.period

    def eigenvalues(self, k_window: int) -> np.ndarray:
        k = np.arange(-k_window, k_window + 1)
        return (self.base[:, None] + 1j * self.omega * k[None, :]).reshape(-1)

    def is_hurwitz(self, margin: float = 0.0) -> bool:
        return bool(np.max(self.base.real) < -margin)

    def min_distance_to_zero(self) -> float:
        best = np.inf
        for lam in self.base:
            k_star = int(np.round(-lam.imag / self.omega))
            for k in (k_star - 1, k_star, k_star + 1):
                best = min(best, abs(lam + 1j * self.omega * k))
        return float(best)

    def is_invertible(self, tol: float = 0.0) -> bool:
        return self.min_distance_to_zero() > tol

    def sigma_plus(self) -> float:
        """sup over the lattice of 1/|lambda_p + 1j*omega*k|."""
        d = self.min_distance_to_zero()
        if d == 0.0:
            return np.inf
        return 1.0 / d

    def shifted_eigenvector(self, p: int, k: int, m: int) -> PhasorVector:
        """Phasor eigenvector of A - N for lambda_p + 1j*omega*k, band m.

        The band-m window of the exact eigenvector: the phasors of the
        periodic column v_p shifted down by k slots (a lattice shift by
        +1j*omega*k moves the support toward index -k).
        """
        if self.factorization is None:
            raise PreconditionError("spectrum carries no eigenvector data")
        w = self.factorization.w
        vec = PhasorVector(self.period, w.phasors[:, p, :])
        return vec.pad(max(m, vec.band)).shift(-k).truncate(m)


def harmonic_spectrum(fac: FloquetFactorization) -> HarmonicSpectrum:
    return HarmonicSpectrum(
        period=fac.period,
        base=fac.base_eigenvalues,
        factorization=fac,
    )
