"""Spectra of truncated harmonic operators and their classification.

The infinite harmonic operator A - N has the exact spectrum
{lambda_p + 1j*omega*k} over the Floquet exponents lambda_p.  A finite
section A_m - N_m keeps n(2m+1) eigenvalues, which split into a part that
has converged onto the exact lattice and two boundary families created by
the truncation itself.  The boundary families are tied to the corners of
the section: when m grows by one they translate by +-1j*omega instead of
converging, and they can sit far from the exact spectrum (in particular, a
Hurwitz operator can have truncations that are never Hurwitz).

Classification is by greedy nearest-neighbor matching of computed
eigenvalues against the lattice window, with the match tolerance derived
from the finite-section residuals of the exact eigenvectors.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .floquet import HarmonicSpectrum
from .fourier import FourierMatrix
from .toeplitz import harmonic_dense

__all__ = [
    "SpectrumClassification",
    "truncated_spectrum",
    "classify",
    "classification_sweep",
    "uniform_inverse_bound",
]

LATTICE = "lattice"
UPPER = "upper"
LOWER = "lower"

# Matching tolerance floor; the adaptive rule below never goes tighter.
_TOL_FLOOR = 1e-6


def truncated_spectrum(a: FourierMatrix, m: int,
                       vectors: bool = False):
    """Eigenvalues (and optionally eigenvectors) of the dense section A_m - N_m."""
    h = harmonic_dense(a, m)
    if vectors:
        return np.linalg.eig(h)
    return np.linalg.eigvals(h)


@dataclasses.dataclass(eq=False)
class SpectrumClassification:
    """Partition of a finite-section spectrum against the exact lattice."""

    m: int
    eigs: np.ndarray
    labels: np.ndarray             # one of "lattice", "upper", "lower" per eig
    match_distance: np.ndarray     # |eig - matched lattice point| (nan unmatched)
    matched_residual: np.ndarray   # finite-section residual of the match (nan)
    lattice: np.ndarray            # exact lattice points, |k| <= m
    lattice_residuals: np.ndarray  # finite-section residual per lattice point
    tol: float
    borderline: np.ndarray | None = None  # lattice members lost at tol/10

    @property
    def lambda1(self) -> np.ndarray:
        return self.eigs[self.labels == LATTICE]

    @property
    def lambda2_plus(self) -> np.ndarray:
        return self.eigs[self.labels == UPPER]

    @property
    def lambda2_minus(self) -> np.ndarray:
        return self.eigs[self.labels == LOWER]

    def boundary_layer_width(self) -> int:
        """Empirical j0: largest |k| whose lattice residual exceeds tol.

        The lattice points inside the window fit the finite section well;
        residuals blow up within a band of width j0 at the window ends,
        and that width is what shields the converged eigenvalues from the
        boundary families.  Returns 0 when every residual is below tol.
        """
        n_lat = self.lattice.size // (2 * self.m + 1)
        res = self.lattice_residuals.reshape(n_lat, 2 * self.m + 1)
        bad = np.nonzero(res > self.tol)[1]
        if bad.size == 0:
            return 0
        k = bad - self.m
        return int(self.m - np.abs(k).min() + 1)


def _lattice_and_residuals(a: FourierMatrix, exact: HarmonicSpectrum,
                           m: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact eigenvalues |k| <= m and their finite-section residuals.

    The residual of lattice point lambda_p + 1j*omega*k is
    ||(A_m - N_m - lambda I) V|_m|| / ||V|_m|| with V the exact shifted
    eigenvector; it is at rounding level deep inside the window and grows
    toward the boundaries, which is what makes the boundary families
    detectable.
    """
    h = harmonic_dense(a, m)
    n = a.rows
    base = exact.base
    lattice = np.empty(n * (2 * m + 1), dtype=complex)
    residuals = np.empty(n * (2 * m + 1))
    idx = 0
    for p in range(n):
        for k in range(-m, m + 1):
            lam = base[p] + 1j * exact.omega * k
            vec = exact.shifted_eigenvector(p, k, m).flatten()
            scale = np.linalg.norm(vec)
            if scale == 0.0:
                residuals[idx] = np.inf
            else:
                residuals[idx] = np.linalg.norm(h @ vec - lam * vec) / scale
            lattice[idx] = lam
            idx += 1
    return lattice, residuals


def _greedy_match(dist: np.ndarray, tol: float) -> np.ndarray:
    """One-to-one nearest-neighbor assignment below tol; -1 where unmatched."""
    n_e, n_l = dist.shape
    order = np.argsort(dist, axis=None)
    used_e = np.zeros(n_e, dtype=bool)
    used_l = np.zeros(n_l, dtype=bool)
    match = np.full(n_e, -1)
    for flat in order:
        i, j = divmod(int(flat), n_l)
        if dist[i, j] > tol:
            break
        if used_e[i] or used_l[j]:
            continue
        used_e[i] = used_l[j] = True
        match[i] = j
    return match


def classify(eigs: np.ndarray, exact: HarmonicSpectrum, a: FourierMatrix,
             m: int, tol: float | None = None) -> SpectrumClassification:
    """Split computed section eigenvalues into lattice and boundary parts.

    Matching is greedy one-to-one nearest neighbor between the computed
    eigenvalues and the lattice window {lambda_p + 1j*omega*k, |k| <= m};
    pairs farther apart than ``tol`` stay unmatched and fall into the
    boundary families by sign of the imaginary part.  The default tol is
    10x the median lattice residual with a floor of 1e-6, so it scales
    with how well the exact eigenvectors fit the window at this m.  A
    second pass at tol/10 flags borderline members of the matched set.
    """
    eigs = np.asarray(eigs, dtype=complex)
    lattice, lat_res = _lattice_and_residuals(a, exact, m)
    if tol is None:
        med = float(np.median(lat_res[np.isfinite(lat_res)]))
        tol = max(_TOL_FLOOR, 10.0 * med)

    dist = np.abs(eigs[:, None] - lattice[None, :])
    match = _greedy_match(dist, tol)
    strict = _greedy_match(dist, tol / 10.0)

    labels = np.empty(eigs.size, dtype=object)
    match_distance = np.full(eigs.size, np.nan)
    matched_residual = np.full(eigs.size, np.nan)
    for i in range(eigs.size):
        if match[i] >= 0:
            labels[i] = LATTICE
            match_distance[i] = dist[i, match[i]]
            matched_residual[i] = lat_res[match[i]]
        else:
            labels[i] = UPPER if eigs[i].imag >= 0 else LOWER
    borderline = eigs[(match >= 0) & (strict < 0)]
    return SpectrumClassification(
        m=m,
        eigs=eigs,
        labels=labels,
        match_distance=match_distance,
        matched_residual=matched_residual,
        lattice=lattice,
        lattice_residuals=lat_res,
        tol=float(tol),
        borderline=borderline,
    )


def classification_sweep(a: FourierMatrix, exact: HarmonicSpectrum, ms,
                         tol: float | None = None) -> dict[int, SpectrumClassification]:
    """Classify several truncation orders with one shared tolerance.

    A per-m adaptive tolerance makes the boundary-family cardinality drift
    with m, which breaks the per-element translation comparison between
    consecutive orders.  Sharing the tolerance of the largest requested
    order keeps the partition consistent: the boundary families then have
    constant size and translate by 1j*omega per unit of m.
    """
    ms = sorted(int(m) for m in ms)
    if tol is None:
        m_ref = ms[-1]
        _, lat_res = _lattice_and_residuals(a, exact, m_ref)
        med = float(np.median(lat_res[np.isfinite(lat_res)]))
        tol = max(_TOL_FLOOR, 10.0 * med)
    return {m: classify(truncated_spectrum(a, m), exact, a, m, tol=tol)
            for m in ms}


def uniform_inverse_bound(a: FourierMatrix, ms) -> dict[int, float]:
    """||(A_m - N_m)^-1|| = 1/sigma_min for each requested truncation.

    For an invertible harmonic operator these stay bounded in m (the
    truncation cannot blow the inverse up), approaching the true inverse
    norm.  A numerically singular truncation (possible at small m even
    when the exact operator is invertible) is recorded as infinity rather
    than raised, so a sweep over m survives isolated resonances.
    """
    out: dict[int, float] = {}
    for m in ms:
        h = harmonic_dense(a, int(m))
        smin = float(np.linalg.svd(h, compute_uv=False)[-1])
        if smin <= 1e-14 * max(1.0, float(np.abs(h).max())):
            out[int(m)] = np.inf
        else:
            out[int(m)] = 1.0 / smin
    return out
