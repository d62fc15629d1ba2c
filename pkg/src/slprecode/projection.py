"""Exact Euclidean projections used by the precoding solvers.

The workhorse is the projection onto the coupled spacing/residual set

    { (d, u) : d >= floor,  -d + lo_t <= u_t <= d - hi_t  (bounded sides) }

for one real strand. Eliminating u by box clamping leaves a convex piecewise
quadratic in d whose breakpoints are the clamp activation thresholds; sorting
them once and sweeping with suffix sums gives the exact minimizer in
O(T log T).
"""

from dataclasses import dataclass

import numpy as np

from .signal_model import stack_strands, unstack_strands


@dataclass(frozen=True)
class CoupledFeasibleSet:
    """One strand's constraint data: margin sequences with bounded-side masks
    and the spacing floor.

    The set is nonempty for any margins: d large enough keeps every box
    -d + lo <= u <= d - hi nonempty.
    """

    lo: np.ndarray            # (T,)
    lo_bounded: np.ndarray    # (T,) bool
    hi: np.ndarray            # (T,)
    hi_bounded: np.ndarray    # (T,) bool
    floor: float

    def effective_floor(self):
        """Smallest feasible spacing: the floor, raised to (lo+hi)/2 where a
        coordinate is bounded on both sides (otherwise its box would be empty)."""
        both = self.lo_bounded & self.hi_bounded
        d_min = self.floor
        if np.any(both):
            d_min = max(d_min, float(np.max((self.lo[both] + self.hi[both]) / 2.0)))
        return d_min

    def contains(self, d, u, tol=0.0):
        if d < self.floor - tol:
            return False
        lo_ok = ~self.lo_bounded | (u >= -d + self.lo - tol)
        hi_ok = ~self.hi_bounded | (u <= d - self.hi + tol)
        return bool(np.all(lo_ok & hi_ok))


def project_coupled(d_tilde, u_tilde, fs):
    """Exact projection of (d_tilde, u_tilde) onto a CoupledFeasibleSet.

    Breakpoints are the spacings where a clamp switches on: u_tilde_t + hi_t
    (upper side) and lo_t - u_tilde_t (lower side), kept when >= the feasible
    floor. Between consecutive breakpoints the active sets are constant, so
    the objective is one quadratic; its vertex is clamped to the interval and
    scored. Suffix sums over the sorted breakpoint values make the sweep
    O(T) after the sort. Ties in the score resolve to the smallest d.

    Returns (d, u) with u already clamped to the box at the chosen d.
    """
    u_tilde = np.asarray(u_tilde, dtype=float)
    d_tilde = float(d_tilde)
    d_min = fs.effective_floor()

    b_vals = (u_tilde + fs.hi)[fs.hi_bounded]
    e_vals = (fs.lo - u_tilde)[fs.lo_bounded]
    vals = np.concatenate([b_vals, e_vals])
    vals = np.sort(vals[vals >= d_min], kind="stable")
    m = vals.size

    # For d in interval i (between vals[i-1] and vals[i]) the active clamp
    # terms are exactly the breakpoints above d, i.e. the suffix vals[i:].
    # F_i(d) = (d - d_tilde)^2 + sum_{v in suffix} (d - v)^2.
    suf_cnt = np.arange(m, -1, -1, dtype=float)              # (m+1,)
    suf_sum = np.concatenate([np.cumsum(vals[::-1])[::-1], [0.0]])
    suf_sq = np.concatenate([np.cumsum((vals * vals)[::-1])[::-1], [0.0]])

    left = np.concatenate([[d_min], vals])
    right = np.concatenate([vals, [np.inf]])
    vertex = (d_tilde + suf_sum) / (1.0 + suf_cnt)
    d_cand = np.clip(vertex, left, right)
    score = (1.0 + suf_cnt) * d_cand * d_cand \
        - 2.0 * d_cand * (d_tilde + suf_sum) \
        + (d_tilde * d_tilde + suf_sq)
    # d_cand is non-decreasing across intervals, so the first argmin is the
    # smallest optimal d.
    i = int(np.argmin(score))
    d = float(d_cand[i])

    u = u_tilde.copy()
    hi_cap = d - fs.hi
    lo_cap = -d + fs.lo
    u[fs.hi_bounded] = np.minimum(u[fs.hi_bounded], hi_cap[fs.hi_bounded])
    u[fs.lo_bounded] = np.maximum(u[fs.lo_bounded], lo_cap[fs.lo_bounded])
    return d, u


def coupled_objective(d_tilde, u_tilde, d, u):
    """Squared projection distance; used by tests and oracles."""
    return (d - d_tilde) ** 2 + float(np.sum((u - u_tilde) ** 2))


def project_frame(d_tilde, U_tilde, margins, floor):
    """Projection of complex (d, U) onto the frame's coupled set, strand by
    strand: 2K independent calls to project_coupled (real rows then
    imaginary rows), recombined into complex arrays.

    floor: spacing floor, either complex (K,) (real part floors the real
    strands, imaginary part the imaginary strands) or real (2K,) in strand
    order.
    """
    d_tilde = np.asarray(d_tilde, dtype=complex)
    U_tilde = np.atleast_2d(np.asarray(U_tilde, dtype=complex))
    K = d_tilde.shape[0]
    dr = stack_strands(d_tilde.reshape(K, 1))[:, 0]          # (2K,)
    Ur = stack_strands(U_tilde)                              # (2K, T)
    floor = np.asarray(floor)
    if np.iscomplexobj(floor):
        floor = stack_strands(floor.reshape(K, 1))[:, 0].real
    floors = floor.astype(float)
    d_out = np.empty(2 * K)
    U_out = np.empty_like(Ur)
    for r in range(2 * K):
        fs = CoupledFeasibleSet(
            lo=margins.lo[r],
            lo_bounded=margins.lo_bounded[r],
            hi=margins.hi[r],
            hi_bounded=margins.hi_bounded[r],
            floor=float(floors[r]),
        )
        d_out[r], U_out[r] = project_coupled(dr[r], Ur[r], fs)
    return unstack_strands(d_out.reshape(2 * K, 1))[:, 0], unstack_strands(U_out)


def project_box(U_tilde, lo, lo_bounded, hi, hi_bounded):
    """Componentwise clamp of a complex array, driven by strand-form bounds.

    lo/hi and their masks have shape (2K, ...) matching stack_strands(U).
    """
    Ur = stack_strands(np.asarray(U_tilde, dtype=complex))
    Ur = np.where(hi_bounded, np.minimum(Ur, hi), Ur)
    Ur = np.where(lo_bounded, np.maximum(Ur, lo), Ur)
    return unstack_strands(Ur)


def project_unit_modulus(phi_tilde):
    """Nearest unit-modulus vector; zero entries map to 1."""
    phi_tilde = np.asarray(phi_tilde, dtype=complex)
    mag = np.abs(phi_tilde)
    out = np.where(mag > 0.0, phi_tilde / np.where(mag > 0.0, mag, 1.0), 1.0 + 0.0j)
    return out
