"""Periodic algebraic Riccati equations solved by policy iteration.

The quadratic harmonic Riccati equation is reduced to a sequence of linear
symbol Lyapunov equations (Kleinman/Newton scheme): at each outer step the
current value matrix yields a state-feedback gain, the loop is closed, and
the next value matrix solves the Lyapunov equation of the closed loop with
the control effort folded into the forcing term.  Provided the initial gain
stabilizes the plant, the iterates decrease monotonically to the stabilizing
solution and the outer loop converges quadratically, so nearly all the work
is the per-step banded Lyapunov solve.

The final iterate carries a computable certificate.  If every Lyapunov step
is solved to accuracy ``eps``, the returned matrix satisfies the Riccati
equation up to ``eta * eps**2`` in the stacked-coefficient norm, where
``eta`` is the peak spectral norm of B(t) R(t)^-1 B(t)' over one period.
``kleinman_solve`` therefore finishes with polish steps that tighten the
per-step tolerance until the measured full-equation residual clears that
bound; certificates below the double-precision floor (about 1e-13 times the
solution scale) are refused honestly with a ConvergenceError.

``full_truncated_riccati`` is the dense diagnostic counterpart: it hands the
truncated harmonic matrices to a standard CARE solver.  Its solution suffers
the same corner defects as the truncated Lyapunov route (the truncation is
not a section of the true solution's block-Toeplitz form), which the defect
maps make visible.  ``time_domain_riccati_oracle`` is a series-free check
that integrates the periodic differential Riccati equation backward to its
periodic fixed point and analyzes the result.
"""

from __future__ import annotations

import dataclasses
import time

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp

from .errors import (ConvergenceError, IntegrationError, PreconditionError,
                     StabilityError)
from .fourier import FourierMatrix, TimeGrid, analyze, invert_pointwise, multiply
from .floquet import integrate_transition
from .lyapunov import solve_adaptive, solve_symbol_lyapunov
from .toeplitz import MAX_DENSE_DIM, harmonic_dense, toeplitz

__all__ = [
    "GainCertificate",
    "KleinmanConfig",
    "RiccatiOracle",
    "RiccatiSolution",
    "TruncatedRiccati",
    "closed_loop_multipliers",
    "full_truncated_riccati",
    "initial_gain",
    "kleinman_solve",
    "riccati_residual",
    "time_domain_riccati_oracle",
]


# -- shared checks ---------------------------------------------------------

def _grid_min_eig(f: FourierMatrix, samples: int = 0) -> tuple[float, float]:
    """Smallest eigenvalue of the Hermitian part of f(t) over a grid.

    Returns (min eigenvalue, t at which it is attained).
    """
    n = samples or max(128, 8 * max(f.band, 1))
    grid = TimeGrid.for_band(f.period, max(f.band, (n - 1) // 4))
    vals = f.evaluate(grid.times).transpose(2, 0, 1)
    herm = 0.5 * (vals + vals.conj().transpose(0, 2, 1))
    eigs = np.linalg.eigvalsh(herm)
    idx = int(eigs[:, 0].argmin())
    return float(eigs[idx, 0]), float(grid.times[idx])


def _check_quadruple(a: FourierMatrix, b: FourierMatrix, q: FourierMatrix,
                     r: FourierMatrix) -> None:
    if a.rows != a.cols:
        raise PreconditionError("A must be square")
    if b.rows != a.rows:
        raise PreconditionError("B must have as many rows as A")
    if q.rows != q.cols or q.rows != a.rows:
        raise PreconditionError("Q must be n x n")
    if r.rows != r.cols or r.rows != b.cols:
        raise PreconditionError("R must be square with the input dimension")
    for name, f in (("B", b), ("Q", q), ("R", r)):
        if not np.isclose(a.period, f.period):
            raise PreconditionError(f"A and {name} periods differ")
    min_q, t_q = _grid_min_eig(q)
    if min_q <= 0.0:
        raise PreconditionError(
            f"Q(t) must be positive definite on the period; smallest "
            f"eigenvalue {min_q:.3e} at t = {t_q:.6g}"
        )
    min_r, t_r = _grid_min_eig(r)
    if min_r <= 0.0:
        raise PreconditionError(
            f"R(t) must be positive definite on the period; smallest "
            f"eigenvalue {min_r:.3e} at t = {t_r:.6g}"
        )


def closed_loop_multipliers(a: FourierMatrix, b: FourierMatrix,
                            k: FourierMatrix,
                            rtol: float = 1e-10) -> np.ndarray:
    """Monodromy multipliers of the loop closed by u = -K(t) x."""
    return integrate_transition(a - multiply(b, k), rtol=rtol).multipliers


# -- initial stabilizing gain ----------------------------------------------

@dataclasses.dataclass
class GainCertificate:
    """How an initial gain was produced and why it is accepted.

    ``margin`` is 1 - max |multiplier| of the closed loop; the gain is
    certified only when the margin exceeds the requested threshold.
    """

    source: str
    margin: float
    multipliers: np.ndarray


def _certify(a: FourierMatrix, b: FourierMatrix, k: FourierMatrix,
             source: str, margin: float, rtol: float) -> GainCertificate | None:
    mu = closed_loop_multipliers(a, b, k, rtol=rtol)
    got = 1.0 - float(np.abs(mu).max())
    if got > margin:
        return GainCertificate(source=source, margin=got, multipliers=mu)
    return None


def initial_gain(a: FourierMatrix, b: FourierMatrix, q: FourierMatrix,
                 r: FourierMatrix, margin: float = 1e-6,
                 rtol: float = 1e-10) -> tuple[FourierMatrix, GainCertificate]:
    """Stabilizing feedback to seed the policy iteration.

    Tries, in order: the zero gain (plant already stable), the constant
    LQR gain of the period-averaged plant, and the central block-row of a
    dense truncated Riccati gain.  Each candidate is certified by
    integrating the closed-loop transition matrix over one period and
    checking that all multipliers are strictly inside the unit circle with
    the requested margin.  Raises ConvergenceError when no candidate
    certifies; supply a hand-made gain through KleinmanConfig.k0 then.
    """
    n, p = a.rows, b.cols
    zero = FourierMatrix.zeros(a.period, p, n,
                               real=a.real and b.real)
    cert = _certify(a, b, zero, "zero", margin, rtol)
    if cert is not None:
        return zero, cert

    a0 = a.phasors[:, :, a.band]
    b0 = b.phasors[:, :, b.band]
    q0 = q.phasors[:, :, q.band]
    r0 = r.phasors[:, :, r.band]
    if a.real and b.real and q.real and r.real:
        a0, b0, q0, r0 = a0.real, b0.real, q0.real, r0.real
    try:
        x0 = scipy.linalg.solve_continuous_are(a0, b0, q0, r0)
        k0 = np.linalg.solve(r0, b0.conj().T @ x0)
        const = FourierMatrix.from_constant(a.period, k0)
        cert = _certify(a, b, const, "averaged-lqr", margin, rtol)
        if cert is not None:
            return const, cert
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError):
        pass

    m_try = max(8, 2 * (a.band + b.band))
    try:
        dense = full_truncated_riccati(a, b, q, r, m_try)
        guess = dense.central_gain()
        cert = _certify(a, b, guess, "truncated-central-row", margin, rtol)
        if cert is not None:
            return guess, cert
    except (ConvergenceError, np.linalg.LinAlgError, ValueError):
        pass

    raise ConvergenceError(
        "no stabilizing initial gain found (tried zero, averaged LQR, and "
        "the central row of a dense truncated solve); supply one via "
        "KleinmanConfig.k0"
    )


# -- policy iteration -------------------------------------------------------

@dataclasses.dataclass
class KleinmanConfig:
    """Tunables for kleinman_solve.

    ``eps`` is the per-step Lyapunov residual target; the final certificate
    bound is ``eta * eps**2``.  ``m0`` floors the truncation order and must
    be at least band(A) + band(B) (defaulted when omitted); the inner order
    never decreases across outer steps.  ``fixed_m`` freezes the inner
    truncation for reproducing fixed-order behavior; the per-step residual
    is then recorded but not enforced, and the certificate may honestly
    fail.  ``k0`` overrides the initial-gain ladder.
    """

    eps: float = 1e-6
    m0: int | None = None
    m_max: int | None = None
    outer_tol: float = 1e-9
    max_outer: int = 40
    k0: FourierMatrix | None = None
    fixed_m: int | None = None
    stability_margin: float = 1e-6
    rtol: float = 1e-10
    inverse_band: int | None = None
    max_polish: int = 4


@dataclasses.dataclass(eq=False)
class RiccatiSolution:
    """Stabilizing solution with its gain and convergence evidence.

    ``monotone_log`` records, per accepted step from the second onward,
    (iteration, min eigenvalue of S_prev - S_new over a grid, that value
    divided by the peak norm of S_prev); the relative entry should stay
    above about -1e-7 for a sound run.  ``bound_eta_eps2`` is the
    theoretical certificate threshold; the solver accepts once the
    measured ``residual_riccati`` clears the larger of that bound and
    ``measurement_floor`` (the rounding noise of evaluating the defect).
    ``tail_energy`` is the largest coefficient mass dropped by the band
    caps on the gain and effort terms, folded into the reported accuracy.
    """

    s: FourierMatrix
    k: FourierMatrix
    iterations: int
    m_final: int
    residual_riccati: float
    bound_eta_eps2: float
    measurement_floor: float
    eta: float
    eps: float
    monotone_log: list
    closed_loop_margins: list
    positive_definite: bool
    tail_energy: float
    inverse_defect: float
    history: list
    elapsed: float


def _residual_signal(a: FourierMatrix, q: FourierMatrix, g: FourierMatrix,
                     s: FourierMatrix) -> FourierMatrix:
    """Full Riccati defect A'S + SA + S' - SGS + Q by exact convolution."""
    quad = multiply(multiply(s, g), s)
    return (multiply(a.adjoint(), s) + multiply(s, a) + s.derivative()
            + q - quad)


def _defect_and_floor(a: FourierMatrix, q: FourierMatrix, g: FourierMatrix,
                      s: FourierMatrix) -> tuple[float, float]:
    """Defect norm plus the rounding floor of its own evaluation.

    The defect is a sum of five terms that largely cancel; its computed
    norm is only meaningful above unit roundoff times the summand
    magnitudes, so certificates are clamped there.
    """
    terms = [multiply(a.adjoint(), s), multiply(s, a), s.derivative(), q,
             multiply(multiply(s, g), s)]
    band = max(t.band for t in terms)
    acc = terms[0].pad(band).phasors.copy()
    for t in terms[1:-1]:
        acc += t.pad(band).phasors
    acc -= terms[-1].pad(band).phasors
    scale = sum(t.norm() for t in terms)
    floor = 16.0 * np.finfo(float).eps * scale
    return float(np.linalg.norm(acc.ravel())), floor


def riccati_residual(a: FourierMatrix, b: FourierMatrix, q: FourierMatrix,
                     r: FourierMatrix, s: FourierMatrix,
                     inverse_band: int | None = None) -> float:
    """Stacked-coefficient norm of the Riccati defect at s."""
    rinv, _ = invert_pointwise(r, band=inverse_band)
    g = multiply(multiply(b, rinv), b.adjoint())
    g = (g + g.adjoint()) * 0.5
    return float(_residual_signal(a, q, g, s).norm())


def kleinman_solve(a: FourierMatrix, b: FourierMatrix, q: FourierMatrix,
                   r: FourierMatrix,
                   config: KleinmanConfig | None = None) -> RiccatiSolution:
    """Solve the harmonic Riccati equation by monotone policy iteration.

    Each outer step forms the gain K = R^-1 B' S from the previous value
    matrix, verifies that the closed loop keeps all Floquet multipliers
    strictly inside the unit circle, and solves the closed-loop symbol
    Lyapunov equation for the next value matrix at an adaptively grown
    truncation order.  Iterates must stay positive definite and decrease
    (up to a -1e-7 relative wobble, which is logged); violations beyond
    1e-3 relative abort the run as divergence.  After the outer increments
    fall below ``outer_tol`` the solver measures the full-equation defect
    and keeps polishing with a tighter per-step tolerance until it clears
    ``eta * eps**2``.
    """
    cfg = config or KleinmanConfig()
    _check_quadruple(a, b, q, r)
    t0 = time.perf_counter()
    n = a.rows

    rinv, rinv_residual = invert_pointwise(r, band=cfg.inverse_band)
    g = multiply(multiply(b, rinv), b.adjoint())
    g = (g + g.adjoint()) * 0.5
    eta = g.linf_norm()
    bound = eta * cfg.eps ** 2

    min_m0 = a.band + b.band
    if cfg.fixed_m is not None:
        if cfg.fixed_m < min_m0:
            raise PreconditionError(
                f"fixed_m={cfg.fixed_m} is below band(A)+band(B)={min_m0}"
            )
        m_k = cfg.fixed_m
    elif cfg.m0 is not None:
        if cfg.m0 < min_m0:
            raise PreconditionError(
                f"m0={cfg.m0} is below band(A)+band(B)={min_m0}"
            )
        m_k = cfg.m0
    else:
        m_k = max(8, min_m0)
    m_max = cfg.m_max
    if m_max is None:
        m_max = (MAX_DENSE_DIM // max(n, 1) - 1) // 2

    if cfg.k0 is not None:
        kain = cfg.k0
        mu = closed_loop_multipliers(a, b, kain, rtol=cfg.rtol)
        got = 1.0 - float(np.abs(mu).max())
        if got <= 0.0:
            raise StabilityError(
                f"supplied k0 does not stabilize: max |multiplier| = "
                f"{np.abs(mu).max():.6f}"
            )
        certificate = GainCertificate("supplied", got, mu)
    else:
        kain, certificate = initial_gain(a, b, q, r,
                                         margin=cfg.stability_margin,
                                         rtol=cfg.rtol)

    target = cfg.eps
    s_prev: FourierMatrix | None = None
    history: list = []
    monotone_log: list = []
    margins: list = [certificate.margin]
    polish = 0
    converged = False
    res_ric = np.inf
    floor = 0.0
    sol = None

    for it in range(1, cfg.max_outer + 1):
        if s_prev is not None:
            kain = multiply(rinv, multiply(b.adjoint(), s_prev))
        # never clip the current gain's own content: the effort term must
        # represent K' R K faithfully or the step solves a different
        # equation and monotonicity is lost
        cap = 2 * max(m_k, kain.band)
        tail = kain.tail_energy(cap)
        kain = kain.truncate(cap)
        a_cl = a - multiply(b, kain)
        if it > 1:
            mu = closed_loop_multipliers(a, b, kain, rtol=cfg.rtol)
            top = float(np.abs(mu).max())
            margins.append(1.0 - top)
            if top >= 1.0:
                raise StabilityError(
                    f"closed loop lost Floquet stability at iteration {it}: "
                    f"max |multiplier| = {top:.6f}"
                )
        effort = multiply(kain.adjoint(), multiply(r, kain))
        tail += effort.tail_energy(cap)
        effort = effort.truncate(cap)
        rhs = q + effort

        if cfg.fixed_m is not None:
            sol = solve_symbol_lyapunov(a_cl, rhs, m_k)
        else:
            sol = solve_adaptive(a_cl, rhs, eps=target, m0=m_k, m_max=m_max)
            m_k = max(m_k, sol.m_used)
        s_new = sol.p

        min_eig, t_bad = _grid_min_eig(s_new)
        if min_eig <= 0.0:
            raise ConvergenceError(
                f"iterate {it} lost positive definiteness: smallest "
                f"eigenvalue {min_eig:.3e} at t = {t_bad:.6g}",
                last_residual=sol.residual_symbol,
            )

        change = np.inf
        if s_prev is not None:
            change = float((s_new - s_prev).norm())
            scale = max(s_prev.linf_norm(), 1e-30)
            drop, _ = _grid_min_eig(s_prev - s_new)
            monotone_log.append((it, drop, drop / scale))
            if drop / scale < -1e-3:
                raise ConvergenceError(
                    f"iteration {it} increased the value matrix by "
                    f"{-drop:.3e} (relative {-drop / scale:.2e}); the outer "
                    "loop is diverging",
                    last_residual=change,
                )

        history.append({
            "iteration": it,
            "m": sol.m_used,
            "lyapunov_residual": sol.residual_symbol,
            "change": change,
            "min_eig": min_eig,
            "tail_energy": tail,
        })
        s_prev = s_new

        if change < cfg.outer_tol:
            res_ric, floor = _defect_and_floor(a, q, g, s_new)
            if res_ric <= max(bound, floor):
                converged = True
                break
            polish += 1
            if polish > cfg.max_polish:
                raise ConvergenceError(
                    f"outer increments settled at {change:.3e} but the "
                    f"Riccati defect {res_ric:.3e} stays above the "
                    f"certificate {bound:.3e} (measurement floor "
                    f"{floor:.3e}); raise eps or m_max",
                    last_residual=res_ric,
                )
            target = min(target, max(0.25 * bound, 1e-14))

    if not converged:
        last = history[-1]["change"] if history else np.inf
        raise ConvergenceError(
            f"policy iteration did not converge in {cfg.max_outer} outer "
            f"steps (last change {last:.3e})",
            last_residual=history[-1]["lyapunov_residual"] if history else None,
        )

    k_final = multiply(rinv, multiply(b.adjoint(), s_prev))
    cap = min(2 * m_k, k_final.band)
    # only the final accepted step's dropped mass pollutes the certificate;
    # earlier caps are healed by the outer contraction
    worst_tail = history[-1]["tail_energy"] + k_final.tail_energy(cap)
    k_final = k_final.truncate(cap)
    eps_eff = max(cfg.eps, worst_tail)

    return RiccatiSolution(
        s=s_prev,
        k=k_final,
        iterations=len(history),
        m_final=m_k,
        residual_riccati=res_ric,
        bound_eta_eps2=eta * eps_eff ** 2,
        measurement_floor=floor,
        eta=eta,
        eps=eps_eff,
        monotone_log=monotone_log,
        closed_loop_margins=margins,
        positive_definite=True,
        tail_energy=worst_tail,
        inverse_defect=rinv_residual,
        history=history,
        elapsed=time.perf_counter() - t0,
    )


# -- dense truncated diagnostic ---------------------------------------------

@dataclasses.dataclass(eq=False)
class TruncatedRiccati:
    """Dense CARE solve on the order-m truncated harmonic matrices.

    The blocks of a section of the true solution would be constant along
    diagonals; ``defect_map_s``/``defect_map_k`` show how far each block is
    from that (absolute entrywise drift between adjacent diagonal
    positions), which localizes the truncation damage in the corners.
    ``delta_s``/``delta_k`` are filled when references are supplied and
    hold the entrywise distance to the references' block-Toeplitz sections.
    """

    s_m: np.ndarray
    k_m: np.ndarray
    m: int
    n: int
    inputs: int
    period: float
    residual: float
    elapsed: float
    delta_s: np.ndarray | None = None
    delta_k: np.ndarray | None = None

    def _block(self, mat: np.ndarray, i: int, j: int) -> np.ndarray:
        w = 2 * self.m + 1
        return mat[i * w:(i + 1) * w, j * w:(j + 1) * w]

    def s_block(self, i: int, j: int) -> np.ndarray:
        return self._block(self.s_m, i, j)

    def k_block(self, i: int, j: int) -> np.ndarray:
        return self._block(self.k_m, i, j)

    @staticmethod
    def _defect(block: np.ndarray) -> np.ndarray:
        return np.abs(block[:-1, :-1] - block[1:, 1:])

    def defect_map_s(self, i: int, j: int) -> np.ndarray:
        return self._defect(self.s_block(i, j))

    def defect_map_k(self, i: int, j: int) -> np.ndarray:
        return self._defect(self.k_block(i, j))

    def central_gain(self, band: int | None = None) -> FourierMatrix:
        """Feedback coefficients read off the central row of each block.

        The central row of block (i, j) carries the diagonal values
        K_{ij,k} for k = m ... -m left to right; reading it backwards
        gives the ascending coefficient layout.
        """
        band = self.m if band is None else min(band, self.m)
        w = 2 * self.m + 1
        ph = np.empty((self.inputs, self.n, 2 * band + 1), dtype=complex)
        for i in range(self.inputs):
            for j in range(self.n):
                row = self.k_m[i * w + self.m, j * w:(j + 1) * w]
                ph[i, j, :] = row[::-1][self.m - band:self.m + band + 1]
        herm = 0.5 * (ph + ph[:, :, ::-1].conj())
        if np.abs(ph - herm).max() <= 1e-8 * max(np.abs(ph).max(), 1e-30):
            ph = herm
            real = True
        else:
            real = False
        return FourierMatrix(self.period, ph, real=real)


def full_truncated_riccati(a: FourierMatrix, b: FourierMatrix,
                           q: FourierMatrix, r: FourierMatrix, m: int,
                           reference_s: FourierMatrix | None = None,
                           reference_k: FourierMatrix | None = None
                           ) -> TruncatedRiccati:
    """Feed the order-m truncations to a dense CARE solver.

    Diagnostic route with n(2m+1)-dimensional state; cost grows like the
    cube of that, against the symbol route's n^2(2m+1) unknowns.  The
    returned object exposes per-block defect maps and, when references
    from kleinman_solve are given, entrywise deltas against their
    block-Toeplitz sections.
    """
    _check_quadruple(a, b, q, r)
    t0 = time.perf_counter()
    n, p = a.rows, b.cols
    if n * (2 * m + 1) > MAX_DENSE_DIM:
        raise PreconditionError(
            f"dense truncation at m={m} needs dimension {n * (2 * m + 1)} "
            f"> {MAX_DENSE_DIM}"
        )
    h = harmonic_dense(a, m)
    bm = toeplitz(b, m).data
    qm = toeplitz(q, m).data
    rm = toeplitz(r, m).data
    qm = 0.5 * (qm + qm.conj().T)
    rm = 0.5 * (rm + rm.conj().T)
    try:
        s_m = scipy.linalg.solve_continuous_are(h, bm, qm, rm)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, ValueError) as exc:
        raise ConvergenceError(
            f"dense truncated Riccati solve failed at m={m}: {exc}"
        ) from exc
    s_m = 0.5 * (s_m + s_m.conj().T)
    k_m = np.linalg.solve(rm, bm.conj().T @ s_m)
    res = np.linalg.norm(
        h.conj().T @ s_m + s_m @ h - s_m @ bm @ k_m + qm, "fro"
    )
    out = TruncatedRiccati(
        s_m=s_m, k_m=k_m, m=m, n=n, inputs=p, period=a.period,
        residual=float(res), elapsed=time.perf_counter() - t0,
    )
    if reference_s is not None:
        out.delta_s = np.abs(s_m - toeplitz(reference_s, m).data)
    if reference_k is not None:
        out.delta_k = np.abs(k_m - toeplitz(reference_k, m).data)
    return out


# -- time-domain oracle ------------------------------------------------------

@dataclasses.dataclass(eq=False)
class RiccatiOracle:
    """Series-free periodic Riccati solution from backward integration."""

    s: FourierMatrix
    k: FourierMatrix
    periods: int
    fixed_point_gap: float


def time_domain_riccati_oracle(a: FourierMatrix, b: FourierMatrix,
                               q: FourierMatrix, r: FourierMatrix,
                               band: int | None = None,
                               rtol: float = 1e-10,
                               fixed_point_tol: float = 1e-9,
                               max_periods: int = 400) -> RiccatiOracle:
    """Integrate the differential Riccati equation backward to its cycle.

    Starting from S = Q(0) at the right end, each pass integrates
    dS/dt = -(A'S + S A - S G S + Q) over one period and feeds S(0) back
    in as the new end value; the map contracts toward the unique periodic
    positive definite solution.  Once the period endpoints agree to
    ``fixed_point_tol`` the last pass is sampled and analyzed into
    coefficients.  Everything is evaluated pointwise in time, so this
    route shares no code with the symbol solver.
    """
    _check_quadruple(a, b, q, r)
    n = a.rows
    period = a.period

    def g_of(t: float) -> np.ndarray:
        bv = b.evaluate(t)
        rv = r.evaluate(t)
        return bv @ np.linalg.solve(rv, bv.conj().T)

    def rhs(t, y):
        s = y.reshape(n, n)
        av = a.evaluate(t)
        qv = q.evaluate(t)
        ds = av.conj().T @ s + s @ av - s @ g_of(t) @ s + qv
        return (-ds).ravel()

    seed = q.evaluate(0.0).astype(complex)
    seed = 0.5 * (seed + seed.conj().T)
    gap = np.inf
    periods = 0
    for periods in range(1, max_periods + 1):
        res = solve_ivp(rhs, (period, 0.0), seed.ravel(), method="DOP853",
                        rtol=rtol, atol=1e-12)
        if not res.success:
            raise IntegrationError(
                f"backward Riccati integration failed: {res.message}",
                t=float(res.t[-1]) if res.t.size else None,
            )
        s0 = res.y[:, -1].reshape(n, n)
        s0 = 0.5 * (s0 + s0.conj().T)
        gap = float(np.linalg.norm(s0 - seed))
        seed = s0
        if gap < fixed_point_tol:
            break
    else:
        raise ConvergenceError(
            f"period map did not reach a fixed point in {max_periods} "
            f"passes (last gap {gap:.3e})",
            last_residual=gap,
        )

    if band is None:
        band = max(16, 4 * (a.band + b.band + q.band + r.band))
    grid = TimeGrid.for_band(period, band)
    t_desc = grid.times[::-1]
    res = solve_ivp(rhs, (period, 0.0), seed.ravel(), method="DOP853",
                    rtol=rtol, atol=1e-12, t_eval=t_desc, dense_output=False)
    if not res.success:
        raise IntegrationError(
            f"backward Riccati sampling pass failed: {res.message}"
        )
    samples = res.y.reshape(n, n, t_desc.size)[:, :, ::-1]
    samples = 0.5 * (samples + samples.conj().transpose(1, 0, 2))
    real = a.real and b.real and q.real and r.real
    s = analyze(samples, period, band=band, real=real)

    kv = np.empty((b.cols, n, grid.times.size), dtype=complex)
    for idx, t in enumerate(grid.times):
        bv = b.evaluate(t)
        rv = r.evaluate(t)
        kv[:, :, idx] = np.linalg.solve(rv, bv.conj().T @ samples[:, :, idx])
    k = analyze(kv, period, band=band, real=real)
    return RiccatiOracle(s=s, k=k, periods=periods, fixed_point_gap=gap)
