"""Closed-form power results and theory self-checks.

These are the analytically derived quantities the simulations are compared
against: the asymptotic power-ratio lower bound between shaped and rigid
scaling, the expected rigid-scaling power, a computable lower bound for
box-constrained quadratics, the spectrum invariance of the phase-rotated
regularized Gram complement, and the numeric optimality check for the
spacing floor.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.optimize import minimize_scalar

from .numerics import hermitian_eig


@dataclass(frozen=True)
class SandwichReport:
    """Shaped-vs-rigid power sandwich on one instance.

    The shaped average power must land between power_ratio_bound times the
    rigid power and the rigid power itself (the shaped solver is warm-started
    from the rigid point, so the upper side is structural).
    """

    k: int
    l: int
    spread: float            # lam_max / lam_min of the inverse Gram matrix
    power_ratio_bound: float
    zf_power: float
    achieved_power: float

    @property
    def sandwich_ok(self):
        lower = self.power_ratio_bound * self.zf_power <= self.achieved_power + 1e-9
        upper = self.achieved_power <= self.zf_power + 1e-9
        return bool(lower and upper)


def sandwich_report(L, K, lam_max, lam_min, zf_power, achieved_power):
    """Build a SandwichReport, computing the ratio bound from the closed form."""
    return SandwichReport(
        k=int(K), l=int(L), spread=float(lam_max / lam_min),
        power_ratio_bound=power_ratio_lower_bound(L, K, lam_max, lam_min),
        zf_power=float(zf_power), achieved_power=float(achieved_power))


def power_ratio_lower_bound(L, K, lam_max, lam_min):
    """Asymptotic lower bound on (shaped power) / (rigid power).

    For a square constellation with L levels per side, K users, and inverse
    Gram eigenvalue spread lam_max/lam_min, the average power of any margin-
    feasible shaped frame is at least this fraction of the rigid-scaling
    power as the frame grows. Equals 0 at L = 2 and increases to 1 with L.
    """
    if L < 2:
        raise ValueError("the bound needs L >= 2 (at least two levels per side)")
    if lam_min <= 0.0 or lam_max < lam_min:
        raise ValueError("eigenvalue spread must satisfy lam_max >= lam_min > 0")
    if K < 1:
        raise ValueError("K must be >= 1")
    L = float(L)
    shrink = (1.0 - 1.0 / L) ** (2 * K)
    edge = (2.0 * L - 3.0) / (2.0 * L + 1.0)
    core = (2.0 * L - 1.0) * (2.0 * L - 3.0) - 3.0
    spread = core / (core + 3.0 * lam_max / lam_min)
    return float(shrink * edge * spread)


def zf_ttp_closed_form(sep, cons, R):
    """Expected per-symbol total power of rigid scaling: alpha^2 rho tr(R).

    Valid for a common SEP target across users (the rigid scheme uses one
    scale); raises otherwise.
    """
    if not np.allclose(sep.alpha, sep.alpha[0], rtol=0.0, atol=0.0):
        raise ValueError("closed form assumes a common SEP target")
    alpha = float(sep.alpha[0])
    return float(alpha ** 2 * cons.rho * np.real(np.trace(R)))


def box_qp_lower_bound(A, b, half_widths, beta):
    """Lower bound on min_{|u_i| <= c_i} (b+u)^H A (b+u) for PSD Hermitian A.

    Augmenting with beta ||u||^2 and minimizing the augmented quadratic
    unconstrained gives b^H (A - A (A + beta I)^{-1} A) b; subtracting the
    worst-case augmentation beta ||c||^2 over the box yields a valid bound
    for every beta > 0.
    """
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    A = np.asarray(A)
    b = np.asarray(b)
    c = np.atleast_1d(np.asarray(half_widths, dtype=float))
    if c.shape[0] == 1:
        c = np.full(b.shape[0], c[0])
    y = A @ b
    z = la.solve(A + beta * np.eye(A.shape[0]), y, assume_a="pos")
    quad = float(np.real(np.vdot(b, y)) - np.real(np.vdot(y, z)))
    return quad - beta * float(np.sum(c ** 2))


def phase_rotation_spectrum_deviation(R, phi, beta):
    """Spectrum invariance of S(M) = M - M (M + beta I)^{-1} M under phases.

    Rotating R by a diagonal unitary phase matrix is a congruence that
    commutes with S, so the eigenvalues of S(R_phi) must equal
    lam * beta / (lam + beta) for the eigenvalues lam of R. Returns the
    maximum relative deviation between the two spectra.
    """
    if beta <= 0.0:
        raise ValueError("beta must be positive")
    R = np.asarray(R)
    phi = np.asarray(phi)
    Rphi = np.conj(phi)[:, None] * R * phi[None, :]
    I = np.eye(R.shape[0])
    Srot = Rphi - Rphi @ la.solve(Rphi + beta * I, Rphi, assume_a="pos")
    Srot = 0.5 * (Srot + Srot.conj().T)
    got = np.sort(hermitian_eig(Srot)[0])
    lam = np.sort(hermitian_eig(0.5 * (R + R.conj().T))[0])
    want = lam * beta / (lam + beta)
    return float(np.max(np.abs(got - want) / (1.0 + np.abs(want))))


def _strand_power(d, symbols, lo, hi, lo_bounded, hi_bounded, weights):
    """Weighted power of one strand at scale d with offsets re-optimized.

    Each offset independently moves d*s_t as close to zero as its box
    [-d + lo_t, d - hi_t] (bounded sides only) allows.
    """
    target = -d * symbols
    lo_u = np.where(lo_bounded, -d + lo, -np.inf)
    hi_u = np.where(hi_bounded, d - hi, np.inf)
    u = np.clip(target, lo_u, hi_u)
    w = d * symbols + u
    return float(np.sum(weights * w * w))


def spacing_optimality_check(floor, symbols, lo, hi, lo_bounded, hi_bounded,
                             weights=None, span=4.0):
    """Numeric minimizer of the per-strand power over the spacing scale.

    Scans d on [floor, span*floor] with offsets re-optimized in closed form
    at every candidate, walking right only on strict improvement, then
    refines with a bounded scalar minimization and keeps the refinement only
    if it strictly beats the scan. Returns (d_star, value).
    """
    symbols = np.asarray(symbols, dtype=float)
    if weights is None:
        weights = np.ones_like(symbols)
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0.0):
        raise ValueError("weights must be nonnegative")

    def g(d):
        return _strand_power(d, symbols, lo, hi, lo_bounded, hi_bounded, weights)

    grid = np.linspace(floor, span * floor, 4097)
    best_d = grid[0]
    best_v = g(best_d)
    for d in grid[1:]:
        v = g(d)
        if v < best_v - 1e-15 * (1.0 + abs(best_v)):
            best_d, best_v = d, v
    h = grid[1] - grid[0]
    left = max(floor, best_d - h)
    right = min(span * floor, best_d + h)
    res = minimize_scalar(g, bounds=(left, right), method="bounded",
                          options={"xatol": 1e-12})
    if res.fun < best_v - 1e-15 * (1.0 + abs(best_v)):
        best_d, best_v = float(res.x), float(res.fun)
    return float(best_d), float(best_v)
