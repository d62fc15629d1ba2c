"""Integer perturbation searches for the vector-perturbation schemes.

The complex K-dimensional search over Gaussian integers is lifted to a real
2K-dimensional lattice (real strands then imaginary strands). With the
Hermitian metric M (from the phase-rotated Gram inverse) factored as
M_real = C^T C and the per-strand scaling s = 4L * spacing, the quadratic
cost of an integer vector g is

    cost(g) = || C (b + diag(s) g) ||^2 = || tri @ g - target ||^2

after a QR of C @ diag(s). Enumeration is Schnorr-Euchner (zig-zag around
the conditional centers) with pruning against the best cost found so far;
the first leaf reached is the Babai point, which seeds the radius. A P-best
variant keeps the P quadratically closest points for peak-power encoding.

Kernels are JIT-compiled with numba when available (set SLPRECODE_NO_JIT=1
to force the pure-Python fallback).
"""

import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .signal_model import diamond, stack_strands

try:
    if os.environ.get("SLPRECODE_NO_JIT"):
        raise ImportError("JIT disabled by SLPRECODE_NO_JIT")
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised via SLPRECODE_NO_JIT
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return deco


_TIE_REL = 1e-12
_RADIUS_INFLATE = 1.0 + 1e-9


@dataclass(frozen=True)
class LatticeProblem:
    """One per-symbol integer search.

    tri: (2K, 2K) upper triangular with positive diagonal; target: (2K,) so
    that cost(g) = ||tri @ g - target||^2 exactly. kind selects the final
    objective: "quadratic" (the cost itself) or "peak" (the squared infinity
    norm of the mapped transmit vector, evaluated on candidates).

    For kind == "peak", the transmit map is
        x(g) = peak_base + peak_col_re @ g[:K] + peak_col_im @ g[K:].
    """

    kind: str
    tri: np.ndarray
    target: np.ndarray
    scale: np.ndarray
    peak_base: np.ndarray = None
    peak_col_re: np.ndarray = None
    peak_col_im: np.ndarray = None

    @property
    def dim(self):
        return self.tri.shape[0]


def real_metric_factor(Rphi):
    """Upper-triangular C with C^T C equal to the real 2K x 2K form of the
    Hermitian PD metric Rphi (real strands first)."""
    Re, Im = np.real(Rphi), np.imag(Rphi)
    M = np.block([[Re, -Im], [Im, Re]])
    M = 0.5 * (M + M.T)
    return la.cholesky(M, lower=False)


class FrameLatticeFactory:
    """Shares the per-frame factorization across the T per-symbol searches.

    The metric factor, scaling, and QR depend only on (Rphi, d, L); per
    symbol only the affine offset b = d <> s_t + mu_t changes, which enters
    through the target vector.
    """

    def __init__(self, Rphi, d, L, kind="quadratic", phi=None, Hp=None):
        d = np.asarray(d, dtype=complex)
        K = d.shape[0]
        self.kind = kind
        self.d = d
        self.C = real_metric_factor(Rphi)
        self.scale = 4.0 * L * stack_strands(d.reshape(K, 1))[:, 0]
        A = self.C * self.scale[None, :]
        Q, tri = la.qr(A)
        flip = np.sign(np.diag(tri))
        flip[flip == 0] = 1.0
        self.tri = tri * flip[:, None]
        self.Qt = Q.T * flip[:, None]
        if kind == "peak":
            period = 4.0 * L
            self.col_re = Hp * (phi * period * np.real(d))[None, :]
            self.col_im = Hp * (1j * phi * period * np.imag(d))[None, :]
        else:
            self.col_re = None
            self.col_im = None

    def problem(self, s_t, mu_t, base_x=None):
        b = stack_strands((diamond(self.d, s_t) + mu_t).reshape(-1, 1))[:, 0]
        target = -self.Qt @ (self.C @ b)
        return LatticeProblem(
            kind=self.kind,
            tri=self.tri,
            target=target,
            scale=self.scale,
            peak_base=base_x,
            peak_col_re=self.col_re,
            peak_col_im=self.col_im,
        )


# ---------------------------------------------------------------------------
# enumeration kernels


@njit(cache=True)
def _lex_smaller(a, b):
    for i in range(a.shape[0]):
        if a[i] != b[i]:
            return a[i] < b[i]
    return False


@njit(cache=True)
def _se_closest(tri, y):
    """Closest lattice point: returns (g, cost). Ties within 1e-12 relative
    cost resolve to the lexicographically smallest integer vector."""
    n = tri.shape[0]
    g = np.zeros(n, dtype=np.int64)
    best_g = np.zeros(n, dtype=np.int64)
    center = np.zeros(n)
    step = np.zeros(n, dtype=np.int64)
    dist = np.zeros(n + 1)
    best_cost = np.inf
    have_best = False

    k = n - 1
    center[k] = y[k] / tri[k, k]
    g[k] = np.int64(math.floor(center[k] + 0.5))
    step[k] = 1 if center[k] >= g[k] else -1
    while True:
        r = tri[k, k] * (g[k] - center[k])
        newdist = dist[k + 1] + r * r
        if newdist <= best_cost * _RADIUS_INFLATE:
            if k == 0:
                if have_best and abs(newdist - best_cost) <= _TIE_REL * max(1.0, best_cost):
                    if _lex_smaller(g, best_g):
                        for i in range(n):
                            best_g[i] = g[i]
                    if newdist < best_cost:
                        best_cost = newdist
                elif newdist < best_cost:
                    best_cost = newdist
                    for i in range(n):
                        best_g[i] = g[i]
                    have_best = True
                g[0] += step[0]
                step[0] = -step[0] - (1 if step[0] > 0 else -1)
            else:
                dist[k] = newdist
                k -= 1
                s = y[k]
                for j in range(k + 1, n):
                    s -= tri[k, j] * g[j]
                center[k] = s / tri[k, k]
                g[k] = np.int64(math.floor(center[k] + 0.5))
                step[k] = 1 if center[k] >= g[k] else -1
        else:
            k += 1
            if k == n:
                break
            g[k] += step[k]
            step[k] = -step[k] - (1 if step[k] > 0 else -1)
    return best_g, best_cost


@njit(cache=True)
def _plist_insert(costs, G, count, cost, g, P):
    """Insert (cost, g) into the sorted-by-(cost, lex) P-best list. Returns
    the new count."""
    n = g.shape[0]
    pos = count
    for i in range(count):
        tie = abs(cost - costs[i]) <= _TIE_REL * max(1.0, min(cost, costs[i]))
        if tie:
            if _lex_smaller(g, G[i]):
                pos = i
                break
        elif cost < costs[i]:
            pos = i
            break
    if pos >= P:
        return count
    last = min(count, P - 1)
    for i in range(last, pos, -1):
        costs[i] = costs[i - 1]
        for j in range(n):
            G[i, j] = G[i - 1, j]
    costs[pos] = cost
    for j in range(n):
        G[pos, j] = g[j]
    return min(count + 1, P)


@njit(cache=True)
def _se_plist(tri, y, P):
    """P best lattice points by (quadratic cost, lex). Returns (G, costs,
    count) with rows of G sorted in that order."""
    n = tri.shape[0]
    g = np.zeros(n, dtype=np.int64)
    center = np.zeros(n)
    step = np.zeros(n, dtype=np.int64)
    dist = np.zeros(n + 1)
    costs = np.full(P, np.inf)
    G = np.zeros((P, n), dtype=np.int64)
    count = 0

    k = n - 1
    center[k] = y[k] / tri[k, k]
    g[k] = np.int64(math.floor(center[k] + 0.5))
    step[k] = 1 if center[k] >= g[k] else -1
    while True:
        r = tri[k, k] * (g[k] - center[k])
        newdist = dist[k + 1] + r * r
        radius = costs[P - 1] if count == P else np.inf
        if newdist <= radius * _RADIUS_INFLATE:
            if k == 0:
                count = _plist_insert(costs, G, count, newdist, g, P)
                g[0] += step[0]
                step[0] = -step[0] - (1 if step[0] > 0 else -1)
            else:
                dist[k] = newdist
                k -= 1
                s = y[k]
                for j in range(k + 1, n):
                    s -= tri[k, j] * g[j]
                center[k] = s / tri[k, k]
                g[k] = np.int64(math.floor(center[k] + 0.5))
                step[k] = 1 if center[k] >= g[k] else -1
        else:
            k += 1
            if k == n:
                break
            g[k] += step[k]
            step[k] = -step[k] - (1 if step[k] > 0 else -1)
    return G, costs, count


# ---------------------------------------------------------------------------
# public API


def _to_complex(g):
    n = g.shape[-1] // 2
    return g[..., :n] + 1j * g[..., n:]


def quadratic_cost(problem, gamma):
    """cost of a complex-integer vector under the problem's metric."""
    g = np.concatenate([np.real(gamma), np.imag(gamma)])
    e = problem.tri @ g - problem.target
    return float(e @ e)


def map_candidates(problem, G):
    """Transmit vectors for integer candidates G (rows, length 2K): (N, M)."""
    n = problem.dim // 2
    GR = G[:, :n].T.astype(float)
    GI = G[:, n:].T.astype(float)
    return problem.peak_base[:, None] + problem.peak_col_re @ GR + problem.peak_col_im @ GI


def peak_value(problem, gamma):
    """Squared infinity norm of the mapped transmit vector at gamma."""
    g = np.concatenate([np.real(gamma), np.imag(gamma)]).astype(np.int64)
    x = map_candidates(problem, g[None, :])[:, 0]
    return float(np.max(np.abs(x) ** 2))


def sphere_decode(problem):
    """Global minimizer of the quadratic cost over complex integers.

    Deterministic: cost ties within 1e-12 relative resolve to the
    lexicographically smallest strand vector (real parts before imaginary,
    user order within each).
    """
    tri = np.ascontiguousarray(problem.tri, dtype=np.float64)
    y = np.ascontiguousarray(problem.target, dtype=np.float64)
    g, _ = _se_closest(tri, y)
    return _to_complex(np.asarray(g, dtype=float))


def enumerate_candidates(problem, candidate_budget):
    """Exactly the candidate_budget quadratically closest integer points,
    sorted by (cost, lex). Returns (G, costs) with G of shape (count, 2K)."""
    tri = np.ascontiguousarray(problem.tri, dtype=np.float64)
    y = np.ascontiguousarray(problem.target, dtype=np.float64)
    G, costs, count = _se_plist(tri, y, int(candidate_budget))
    return np.asarray(G)[:count].copy(), np.asarray(costs)[:count].copy()


def _pick_min_lex(vals, G):
    vmin = float(np.min(vals))
    tol = _TIE_REL * max(1.0, vmin)
    best = None
    for j in range(vals.shape[0]):
        if vals[j] <= vmin + tol:
            if best is None or _lex_smaller(G[j], G[best]):
                best = j
    return best


def p_sphere_encode(problem, candidate_budget=64, extra=None):
    """Peak-power integer search: evaluate the true squared infinity norm on
    the candidate_budget quadratically closest points (plus gamma = 0 and an
    optional incumbent), return the best by (peak value, lex).
    """
    if problem.kind != "peak":
        raise ValueError("p_sphere_encode needs a peak-kind problem")
    G, _ = enumerate_candidates(problem, candidate_budget)
    rows = [G, np.zeros((1, problem.dim), dtype=np.int64)]
    if extra is not None:
        ge = np.concatenate([np.real(extra), np.imag(extra)])
        rows.append(np.round(ge).astype(np.int64)[None, :])
    Gall = np.vstack(rows)
    X = map_candidates(problem, Gall)
    vals = np.max(np.abs(X) ** 2, axis=0)
    j = _pick_min_lex(vals, Gall)
    return _to_complex(Gall[j].astype(float))


def brute_force_lattice(problem, box_radius):
    """Exhaustive minimization over the integer box [-box_radius, box_radius]^{2K}
    under the problem's final objective. Test oracle; same deterministic
    tie-break as the enumerative searches."""
    n = problem.dim
    if n > 8:
        raise ValueError("brute force is limited to K <= 4")
    r = int(box_radius)
    axes = [np.arange(-r, r + 1, dtype=np.int64)] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    G = np.stack([m.ravel() for m in mesh], axis=1)
    if problem.kind == "peak":
        X = map_candidates(problem, G)
        vals = np.max(np.abs(X) ** 2, axis=0)
    else:
        E = G @ problem.tri.T - problem.target[None, :]
        vals = np.sum(E * E, axis=1)
    j = _pick_min_lex(vals, G)
    return _to_complex(G[j].astype(float))
