"""Independent reference implementations used to validate the package.

Everything here is deliberately written by a different route than the library
code: numeric quadrature instead of erfc, bisection instead of Newton, scalar
convex scans and cvxpy instead of closed-form projections, direct complex
arithmetic instead of real-stacked lattice factorizations, and exhaustive
enumeration instead of tree search.
"""

import itertools

import numpy as np
from scipy import integrate
from scipy.optimize import minimize, minimize_scalar
from scipy.stats import norm


# ---------------------------------------------------------------------------
# Gaussian tail


def q_quadrature(x):
    """Q(x) by adaptive quadrature of the standard normal density."""
    if x < 0:
        return 1.0 - q_quadrature(-x)
    val, _ = integrate.quad(lambda t: np.exp(-0.5 * t * t) / np.sqrt(2 * np.pi),
                            x, np.inf, limit=500, epsabs=0.0, epsrel=1e-13)
    return val


def q_inv_reference(p):
    """Inverse Gaussian tail via scipy's independent implementation."""
    return norm.isf(p)


# ---------------------------------------------------------------------------
# linear algebra references


def nullspace_svd(H):
    """Orthonormal nullspace basis from the SVD."""
    _, _, Vh = np.linalg.svd(H)
    return Vh[H.shape[0]:, :].conj().T


# ---------------------------------------------------------------------------
# coupled projection references


def effective_floor_reference(fs):
    floor = fs.floor
    both = fs.lo_bounded & fs.hi_bounded
    if np.any(both):
        floor = max(floor, float(np.max((fs.lo[both] + fs.hi[both]) / 2.0)))
    return floor


def coupled_objective_reference(d, u, d_tilde, u_tilde):
    return float((d - d_tilde) ** 2 + np.sum((u - u_tilde) ** 2))


def clamp_u(d, u_tilde, fs):
    lo_u = np.where(fs.lo_bounded, -d + fs.lo, -np.inf)
    hi_u = np.where(fs.hi_bounded, d - fs.hi, np.inf)
    return np.clip(u_tilde, lo_u, hi_u)


def project_coupled_scan(d_tilde, u_tilde, fs):
    """Scalar convex scan: optimal u for fixed d is the box clamp, and the
    resulting one-dimensional function of d is convex, so a bounded scalar
    minimization finds the optimum to high accuracy."""
    eff = effective_floor_reference(fs)

    def g(d):
        u = clamp_u(d, u_tilde, fs)
        return coupled_objective_reference(d, u, d_tilde, u_tilde)

    hi_candidates = [eff + 1.0, d_tilde + 1.0]
    if fs.lo_bounded.any():
        hi_candidates.append(float(np.max(fs.lo[fs.lo_bounded] - u_tilde[fs.lo_bounded])) + 1.0)
    if fs.hi_bounded.any():
        hi_candidates.append(float(np.max(u_tilde[fs.hi_bounded] + fs.hi[fs.hi_bounded])) + 1.0)
    upper = max(hi_candidates)
    res = minimize_scalar(g, bounds=(eff, upper), method="bounded",
                          options={"xatol": 1e-13})
    d = float(res.x)
    if g(eff) < res.fun:
        d = eff
    u = clamp_u(d, u_tilde, fs)
    return d, u


def project_coupled_cvxpy(d_tilde, u_tilde, fs):
    import cvxpy as cp

    m = u_tilde.size
    d = cp.Variable()
    u = cp.Variable(m)
    cons = [d >= fs.floor]
    for i in range(m):
        if fs.lo_bounded[i]:
            cons.append(u[i] >= -d + fs.lo[i])
        if fs.hi_bounded[i]:
            cons.append(u[i] <= d - fs.hi[i])
    prob = cp.Problem(cp.Minimize(cp.square(d - d_tilde)
                                  + cp.sum_squares(u - u_tilde)), cons)
    prob.solve(solver=cp.CLARABEL)
    return float(d.value), np.asarray(u.value), float(prob.value)


def random_feasible_point(rng, fs):
    """A strictly feasible (d, u) drawn directly from the set's description."""
    eff = effective_floor_reference(fs)
    d = eff + abs(rng.normal()) + 1e-6
    lo_u = np.where(fs.lo_bounded, -d + fs.lo, -10.0 - 10.0 * abs(d))
    hi_u = np.where(fs.hi_bounded, d - fs.hi, 10.0 + 10.0 * abs(d))
    u = lo_u + (hi_u - lo_u) * rng.uniform(size=fs.lo.shape)
    return d, u


# ---------------------------------------------------------------------------
# lattice references (direct complex arithmetic, exhaustive search)


def gamma_cost_quadratic(R, phi, d, L, s, mu, gamma):
    """Phase-rotated power metric evaluated directly in the complex domain."""
    re = np.real(d) * (np.real(s) + 4 * L * np.real(gamma))
    im = np.imag(d) * (np.imag(s) + 4 * L * np.imag(gamma))
    w = re + 1j * im + mu
    v = phi * w
    return float(np.real(np.vdot(v, R @ v)))


def gamma_peak(Hp, phi, d, L, s, mu, gamma, extra_x=None):
    """Per-slot antenna peak evaluated by direct assembly."""
    re = np.real(d) * (np.real(s) + 4 * L * np.real(gamma))
    im = np.imag(d) * (np.imag(s) + 4 * L * np.imag(gamma))
    w = re + 1j * im + mu
    x = Hp @ (phi * w)
    if extra_x is not None:
        x = x + extra_x
    return float(np.max(np.abs(x) ** 2))


def _lex_key(gamma):
    return tuple(np.concatenate([np.real(gamma), np.imag(gamma)]).tolist())


def brute_force_gamma(R, phi, d, L, s, mu, radius, kind="quadratic",
                      Hp=None, extra_x=None, tie_rel=1e-12):
    """Exhaustive minimization over the integer box [-radius, radius]^(2K).

    Returns (gamma, value, on_boundary): on_boundary reports whether the
    winner touches the search box, in which case the box may not contain the
    true optimum.
    """
    K = s.shape[0]
    rng_vals = range(-radius, radius + 1)
    best = None
    best_val = np.inf
    for ints in itertools.product(rng_vals, repeat=2 * K):
        gamma = np.asarray(ints[:K], dtype=float) + 1j * np.asarray(ints[K:], dtype=float)
        if kind == "quadratic":
            val = gamma_cost_quadratic(R, phi, d, L, s, mu, gamma)
        else:
            val = gamma_peak(Hp, phi, d, L, s, mu, gamma, extra_x)
        if best is None or val < best_val - tie_rel * max(1.0, abs(best_val)):
            best, best_val = gamma, val
        elif abs(val - best_val) <= tie_rel * max(1.0, abs(best_val)):
            if _lex_key(gamma) < _lex_key(best):
                best = gamma
    parts = np.concatenate([np.real(best), np.imag(best)])
    on_boundary = bool(np.any(np.abs(parts) >= radius))
    return best, best_val, on_boundary


def brute_force_gamma_vec(R, phi, d, L, s, mu, radius, kind="quadratic",
                          Hp=None, extra_x=None, tie_rel=1e-12):
    """Vectorized twin of `brute_force_gamma` for larger candidate boxes.

    Evaluates every candidate in one shot instead of a Python loop; same
    return contract and the same lexicographic tie rule.
    """
    K = s.shape[0]
    axis = np.arange(-radius, radius + 1, dtype=float)
    grids = np.meshgrid(*([axis] * (2 * K)), indexing="ij")
    parts = np.stack([g.ravel() for g in grids], axis=1)      # (M, 2K)
    G = parts[:, :K] + 1j * parts[:, K:]
    V = s[None, :] + 4 * L * G
    W = np.real(d)[None, :] * np.real(V) \
        + 1j * np.imag(d)[None, :] * np.imag(V) + mu[None, :]
    if kind == "quadratic":
        Rphi = np.conj(phi)[:, None] * R * phi[None, :]
        vals = np.real(np.einsum("mi,ij,mj->m", np.conj(W), Rphi, W))
    else:
        X = Hp @ (phi[:, None] * W.T)                         # (N, M)
        if extra_x is not None:
            X = X + extra_x[:, None]
        vals = np.max(np.abs(X) ** 2, axis=0)
    best_val = float(vals.min())
    ties = np.flatnonzero(vals <= best_val + tie_rel * max(1.0, abs(best_val)))
    order = np.lexsort(parts[ties].T[::-1])                   # first col primary
    pick = ties[order[0]]
    best = G[pick]
    on_boundary = bool(np.any(np.abs(parts[pick]) >= radius))
    return best, float(vals[pick]), on_boundary


# ---------------------------------------------------------------------------
# box-constrained quadratic references


def box_qp_disc_cvxpy(A, b, c):
    """Exact min of (b+u)^H A (b+u) over per-coordinate discs |u_i| <= c_i."""
    import cvxpy as cp

    K = b.size
    ur = cp.Variable(K)
    ui = cp.Variable(K)
    br, bi = np.real(b), np.imag(b)
    Ar, Ai = np.real(A), np.imag(A)
    # real form of the Hermitian quadratic
    M = np.block([[Ar, -Ai], [Ai, Ar]])
    M = 0.5 * (M + M.T)
    v = cp.hstack([br + ur, bi + ui])
    cons = [cp.norm(cp.hstack([ur[i], ui[i]])) <= c[i] for i in range(K)]
    prob = cp.Problem(cp.Minimize(cp.quad_form(v, cp.psd_wrap(M))), cons)
    prob.solve(solver=cp.CLARABEL)
    return float(prob.value)


def box_qp_scipy(Q, b, lo, hi):
    """min 0.5 x^T Q x + b^T x over [lo, hi] via L-BFGS-B."""
    def f(x):
        return 0.5 * x @ Q @ x + b @ x

    def g(x):
        return Q @ x + b

    x0 = np.clip(np.zeros_like(b), lo, hi)
    res = minimize(f, x0, jac=g, method="L-BFGS-B",
                   bounds=list(zip(lo, hi)),
                   options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 10000})
    return res.x, float(res.fun)


# ---------------------------------------------------------------------------
# SINR-constrained beamforming references


def socp_min_total_power(H, chi, noise):
    import cvxpy as cp

    K, N = H.shape
    W = cp.Variable((N, K), complex=True)
    cons = []
    for i in range(K):
        others = cp.hstack([H[i:i + 1, :] @ W[:, j] for j in range(K) if j != i])
        cons.append(cp.norm(cp.hstack([others, np.sqrt(noise)]))
                    <= cp.real(H[i:i + 1, :] @ W[:, i])[0] / np.sqrt(chi[i]))
    prob = cp.Problem(cp.Minimize(cp.sum_squares(W)), cons)
    prob.solve(solver=cp.CLARABEL)
    return float(prob.value)


def socp_min_peak_power(H, chi, noise):
    import cvxpy as cp

    K, N = H.shape
    W = cp.Variable((N, K), complex=True)
    t = cp.Variable()
    cons = [cp.norm(W[n, :]) <= t for n in range(N)]
    for i in range(K):
        others = cp.hstack([H[i:i + 1, :] @ W[:, j] for j in range(K) if j != i])
        cons.append(cp.norm(cp.hstack([others, np.sqrt(noise)]))
                    <= cp.real(H[i:i + 1, :] @ W[:, i])[0] / np.sqrt(chi[i]))
    prob = cp.Problem(cp.Minimize(t), cons)
    prob.solve(solver=cp.CLARABEL)
    return float(prob.value) ** 2


# ---------------------------------------------------------------------------
# misc


def finite_diff_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def random_psd_hermitian(rng, n, cond=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    lam = np.geomspace(1.0, cond, n)
    return (Q * lam) @ Q.conj().T
