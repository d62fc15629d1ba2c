"""Numerical primitives: Gaussian tail, channel factorizations, quadratic forms.

Everything downstream leans on these routines, so they favour numerically
safe formulations (log-space Newton for the tail inverse, QR instead of
explicit Gram inversion, triangular solves instead of generic inverses).
"""

import numpy as np
import scipy.linalg as la
from scipy.special import erfc, erfcx

_RANK_RTOL = 1e-10
_HERM_RTOL = 1e-10


class RankDeficient(ValueError):
    """Channel matrix does not have full row rank at working precision."""


class NotHermitian(ValueError):
    """Matrix handed to a Hermitian eigensolver is measurably non-Hermitian."""


class NotPD(ValueError):
    """Matrix handed to a Cholesky-based routine is not positive definite."""


def qfunc(x):
    """Gaussian tail probability Q(x) = P(N(0,1) > x).

    Uses the complementary error function, so it stays accurate far into
    the tail (Q(40) is still a normal double).
    """
    x = np.asarray(x, dtype=float)
    out = 0.5 * erfc(x / np.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def _log_qfunc(x):
    # log Q(x) for scalar x >= 0, via the scaled complement:
    # Q(x) = 0.5 * erfcx(x/sqrt(2)) * exp(-x^2/2)
    return np.log(0.5 * erfcx(x / np.sqrt(2.0))) - 0.5 * x * x


def qfunc_inv(p):
    """Inverse Gaussian tail: the x with Q(x) = p, for p in (0, 1).

    Works in log space with a bracketing + safeguarded Newton iteration;
    the damped step never leaves the bracket, so convergence is guaranteed
    and the result has ~1e-13 relative accuracy in p.
    """
    p = float(p)
    if not (0.0 < p < 1.0):
        raise ValueError(f"tail probability must lie strictly in (0,1), got {p}")
    if p == 0.5:
        return 0.0
    if p > 0.5:
        return -qfunc_inv(1.0 - p)

    target = np.log(p)
    # Asymptotic seed: Q(x) ~ exp(-x^2/2) / (x sqrt(2 pi)) => x0 a mild underestimate.
    x0 = np.sqrt(max(0.0, -2.0 * np.log(2.0 * p)))
    lo = 0.0
    hi = max(1.0, x0)
    while _log_qfunc(hi) > target:
        lo = hi
        hi *= 2.0
    x = min(max(x0, lo), hi)
    for _ in range(100):
        g = _log_qfunc(x) - target
        if abs(g) < 1e-13:
            break
        if g > 0.0:  # Q(x) still too large -> x too small
            lo = x
        else:
            hi = x
        # d/dx log Q(x) = -pdf(x)/Q(x) = -sqrt(2/pi) / erfcx(x/sqrt(2))
        slope = -np.sqrt(2.0 / np.pi) / erfcx(x / np.sqrt(2.0))
        step = g / slope
        x_new = x - step if slope != 0.0 else 0.5 * (lo + hi)
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        if hi - lo < 1e-15 * (1.0 + hi):
            x = x_new
            break
        x = x_new
    return float(x)


def _check_full_row_rank(H):
    sv = la.svdvals(H)
    if sv.size == 0 or sv[0] == 0.0 or sv[-1] < _RANK_RTOL * sv[0]:
        raise RankDeficient(
            f"matrix of shape {H.shape} is row-rank deficient at rtol {_RANK_RTOL:g}"
        )


def _economic_qr_of_adjoint(H):
    # H^H = Q Rhat with Q (N,K) orthonormal columns, Rhat (K,K) upper triangular.
    Q, Rhat = la.qr(H.conj().T, mode="economic")
    return Q, Rhat


def pseudo_inverse(H):
    """Right pseudo-inverse H^H (H H^H)^{-1} of a fat full-row-rank matrix.

    Computed from the economic QR of H^H (so the Gram matrix is never formed):
    with H^H = Q Rhat, the pseudo-inverse is Q Rhat^{-H}.

    Raises RankDeficient if the smallest singular value is below 1e-10 of
    the largest.
    """
    H = np.asarray(H, dtype=complex)
    K, N = H.shape
    if K > N:
        raise ValueError(f"expected a fat matrix (K <= N), got shape {H.shape}")
    _check_full_row_rank(H)
    Q, Rhat = _economic_qr_of_adjoint(H)
    # Rhat^{-H}: solve Rhat^H X = I (triangular).
    X = la.solve_triangular(Rhat, np.eye(K, dtype=complex), trans="C", lower=False)
    return Q @ X


def nullspace_basis(H):
    """Orthonormal basis of the null space of H, shape (N, N-K).

    Taken from the trailing columns of the full QR of H^H. For square H the
    basis has zero width, which is the signal that nothing can be added in
    the null space.
    """
    H = np.asarray(H, dtype=complex)
    K, N = H.shape
    if K > N:
        raise ValueError(f"expected a fat matrix (K <= N), got shape {H.shape}")
    _check_full_row_rank(H)
    Qfull, _ = la.qr(H.conj().T, mode="full")
    return Qfull[:, K:].copy()


def gram_inverse(H):
    """(H H^H)^{-1} for a fat full-row-rank H, via triangular solves.

    Returned matrix is exactly Hermitian (symmetrized once to remove
    round-off drift).
    """
    H = np.asarray(H, dtype=complex)
    K, N = H.shape
    if K > N:
        raise ValueError(f"expected a fat matrix (K <= N), got shape {H.shape}")
    _check_full_row_rank(H)
    _, Rhat = _economic_qr_of_adjoint(H)
    X = la.solve_triangular(Rhat, np.eye(K, dtype=complex), trans="C", lower=False)
    R = la.solve_triangular(Rhat, X, lower=False)
    return 0.5 * (R + R.conj().T)


def hermitian_eig(A):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Returns (w, V) with A V = V diag(w), w[0] >= w[1] >= ... Raises
    NotHermitian if ||A - A^H||_F > 1e-10 ||A||_F.
    """
    A = np.asarray(A, dtype=complex)
    nrm = la.norm(A)
    if la.norm(A - A.conj().T) > _HERM_RTOL * max(nrm, 1e-300):
        raise NotHermitian("matrix fails the Hermitian symmetry check")
    w, V = la.eigh(A)
    return w[::-1].copy(), V[:, ::-1].copy()


def mahalanobis_sq(v, R):
    """Quadratic form v^H R v for Hermitian positive definite R.

    Evaluated as ||U v||^2 with the Cholesky factor U, which is real and
    nonnegative by construction. Raises NotPD if the factorization fails.
    """
    v = np.asarray(v, dtype=complex)
    R = np.asarray(R, dtype=complex)
    try:
        U = la.cholesky(R, lower=False)
    except la.LinAlgError as exc:
        raise NotPD("quadratic-form matrix is not positive definite") from exc
    y = U @ v
    return float(np.real(np.vdot(y, y)))
