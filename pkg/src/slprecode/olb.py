"""SINR-constrained linear beamforming baselines.

Both solvers work in the unit-symbol-power domain: with symbol power rho
factored out, the per-user constraint is

    |h_i^H w_i|^2 / (sum_{j != i} |h_i^H w_j|^2 + noise) >= chi_i.

The total-power problem is solved by the classic uplink-downlink duality
fixed point; the peak-per-antenna-power problem by a primal-dual first-order
method (Chambolle-Pock) on its second-order-cone form. Both are finished by
an exact feasibility rescale and a per-user phase rotation making the
effective gains real positive.
"""

import numpy as np
import scipy.linalg as la


class Infeasible(RuntimeError):
    """SINR targets could not be met (peak-power form under extreme conditioning)."""


def achieved_sinrs(H, W, noise_power):
    """Per-user SINRs of beamformer columns under unit symbol power."""
    M = H @ W
    sig = np.abs(np.diag(M)) ** 2
    interf = np.sum(np.abs(M) ** 2, axis=1) - sig
    return sig / (interf + noise_power)


def _rotate_phases(H, W):
    """Phase-rotate each column so h_i^H w_i is real and nonnegative."""
    M = np.diag(H @ W)
    phases = np.where(np.abs(M) > 0, M / np.where(np.abs(M) > 0, np.abs(M), 1.0), 1.0)
    return W * np.conj(phases)[None, :]


def _feasibility_rescale(H, W, chi, noise_power):
    """Smallest uniform scale c >= 1 making every SINR constraint hold exactly.

    SINR_i(c W) = sig_i / (interf_i + noise/c^2) is increasing in c, so the
    per-user requirement solves in closed form; an infinite requirement means
    the target is interference-limited infeasible.
    """
    M = H @ W
    sig = np.abs(np.diag(M)) ** 2
    interf = np.sum(np.abs(M) ** 2, axis=1) - sig
    headroom = sig / chi - interf
    if np.any(headroom <= 0.0):
        raise Infeasible("SINR targets unreachable for these beamformer directions")
    c2 = np.max(noise_power / headroom)
    return W * np.sqrt(max(1.0, c2))


def olb_ttp_beamformers(H, chi, noise_power, tol=1e-10, max_iters=10**4):
    """Minimum total power beamformers meeting SINR targets.

    Uplink-downlink duality: iterate the standard interference-function fixed
    point on virtual uplink powers q (monotone convergent from q = 0), take
    MMSE receive directions, then match downlink powers by solving the K x K
    coupling system so every constraint is tight.

    Returns (W, info) with info holding iterations and achieved SINRs.
    """
    H = np.asarray(H, dtype=complex)
    K, N = H.shape
    chi = np.asarray(chi, dtype=float)
    q = np.zeros(K)
    it = 0
    for it in range(1, max_iters + 1):
        A = noise_power * np.eye(N, dtype=complex) + (H.conj().T * q) @ H
        Xs = la.solve(A, H.conj().T, assume_a="pos")         # A^{-1} H^H
        m = np.real(np.einsum("kn,nk->k", H, Xs))            # h_i^H A^{-1} h_i
        q_new = chi * (1.0 - q * m) / m
        delta = np.max(np.abs(q_new - q)) / (1.0 + np.max(q_new))
        q = q_new
        if delta < tol:
            break
    A = noise_power * np.eye(N, dtype=complex) + (H.conj().T * q) @ H
    U = la.solve(A, H.conj().T, assume_a="pos")
    U = U / np.linalg.norm(U, axis=0, keepdims=True)
    M = np.abs(H @ U) ** 2                                   # |h_i^H u_j|^2
    G = -M
    G[np.arange(K), np.arange(K)] = np.diag(M) / chi
    p = la.solve(G, np.full(K, noise_power))
    if np.any(p <= 0.0):
        raise Infeasible("duality power match produced nonpositive powers")
    W = U * np.sqrt(p)[None, :]
    W = _rotate_phases(H, _feasibility_rescale(H, W, chi, noise_power))
    info = {"iterations": it, "sinr": achieved_sinrs(H, W, noise_power)}
    return W, info


# ---------------------------------------------------------------------------
# peak per-antenna power: SOC form solved by Chambolle-Pock
#
# variables x = (Re vec(W), Im vec(W), t); minimize t subject to
#   antenna n:  ( t, W[n, :] )                          in SOC(2K+1)
#   user i:     ( Re(h_i^H w_i)/sqrt(chi_i),
#                 (h_i^H w_j)_{j != i}, sqrt(noise) )   in SOC(2K)


def _soc_project(v, dims):
    out = np.empty_like(v)
    pos = 0
    for m in dims:
        t = v[pos]
        z = v[pos + 1:pos + m]
        nz = np.linalg.norm(z)
        if nz <= t:
            out[pos:pos + m] = v[pos:pos + m]
        elif nz <= -t:
            out[pos:pos + m] = 0.0
        else:
            a = 0.5 * (t + nz)
            out[pos] = a
            out[pos + 1:pos + m] = z * (a / nz)
        pos += m
    return out


def _build_ppap_socp(H, chi, noise_power):
    K, N = H.shape
    nw = N * K
    nx = 2 * nw + 1

    def re_idx(n, i):
        return i * N + n

    def im_idx(n, i):
        return nw + i * N + n

    t_idx = 2 * nw
    dims = []
    rows = []
    offsets = []

    def lin_row(coeffs):
        row = np.zeros(nx)
        for idx, val in coeffs:
            row[idx] += val
        return row

    # antenna cones
    for n in range(N):
        dims.append(2 * K + 1)
        rows.append(lin_row([(t_idx, 1.0)]))
        offsets.append(0.0)
        for i in range(K):
            rows.append(lin_row([(re_idx(n, i), 1.0)]))
            offsets.append(0.0)
            rows.append(lin_row([(im_idx(n, i), 1.0)]))
            offsets.append(0.0)
    # user cones
    sqn = np.sqrt(noise_power)
    for i in range(K):
        dims.append(2 * K)
        # head: Re(h_i^H w_i)/sqrt(chi_i); h_i^H w_i = sum_n H[i,n] W[n,i]
        coeffs = []
        for n in range(N):
            a, b = np.real(H[i, n]), np.imag(H[i, n])
            coeffs.append((re_idx(n, i), a / np.sqrt(chi[i])))
            coeffs.append((im_idx(n, i), -b / np.sqrt(chi[i])))
        rows.append(lin_row(coeffs))
        offsets.append(0.0)
        for j in range(K):
            if j == i:
                continue
            cr, ci = [], []
            for n in range(N):
                a, b = np.real(H[i, n]), np.imag(H[i, n])
                cr.append((re_idx(n, j), a))
                cr.append((im_idx(n, j), -b))
                ci.append((re_idx(n, j), b))
                ci.append((im_idx(n, j), a))
            rows.append(lin_row(cr))
            offsets.append(0.0)
            rows.append(lin_row(ci))
            offsets.append(0.0)
        rows.append(np.zeros(nx))
        offsets.append(sqn)
    A = np.asarray(rows)
    b = np.asarray(offsets)
    c = np.zeros(nx)
    c[t_idx] = 1.0
    return A, b, c, dims, t_idx


def olb_ppap_beamformers(H, chi, noise_power, tol=1e-7, max_iters=200_000):
    """Minimum peak-per-antenna-power beamformers meeting SINR targets.

    Chambolle-Pock on the SOC form: dual ascent on the cone multipliers,
    primal descent on (W, t), with over-relaxed primal extrapolation. The
    final iterate is rescaled for exact feasibility. Checks residuals every
    200 iterations and stops once the cone residual is below tol and the
    feasible objective has stabilized.

    Returns (W, info).
    """
    H = np.asarray(H, dtype=complex)
    K, N = H.shape
    chi = np.asarray(chi, dtype=float)
    A, b, c, dims, t_idx = _build_ppap_socp(H, chi, noise_power)
    opn = la.svdvals(A)[0]
    tau = sigma = 0.95 / opn
    nx = A.shape[1]
    x = np.zeros(nx)
    y = np.zeros(A.shape[0])
    xbar = x.copy()
    best_obj = np.inf
    best_W = None
    last_obj = np.inf
    it = 0
    for it in range(1, max_iters + 1):
        v = y + sigma * (A @ xbar)
        # prox of the conjugate of the cone indicator (Moreau)
        y = v - sigma * (_soc_project(v / sigma + b, dims) - b)
        x_new = x - tau * (c + A.T @ y)
        xbar = 2.0 * x_new - x
        x = x_new
        if it % 200 == 0:
            res = A @ x + b
            gap = float(np.linalg.norm(res - _soc_project(res, dims)))
            W = _extract_w(x, N, K)
            try:
                Wf = _feasibility_rescale(H, W, chi, noise_power)
                obj = float(np.max(np.sum(np.abs(Wf) ** 2, axis=1)))
                if obj < best_obj:
                    best_obj, best_W = obj, Wf
            except Infeasible:
                obj = np.inf
            settled = np.isfinite(obj) and abs(last_obj - obj) <= 1e-9 * max(1.0, obj)
            last_obj = obj
            if gap <= tol * (1.0 + np.linalg.norm(b)) and settled:
                break
    if best_W is None:
        raise Infeasible("peak-power SOCP did not reach a feasible point")
    W = _rotate_phases(H, best_W)
    info = {
        "iterations": it,
        "sinr": achieved_sinrs(H, W, noise_power),
        "peak_power": float(np.max(np.sum(np.abs(W) ** 2, axis=1))),
    }
    return W, info


def _extract_w(x, N, K):
    nw = N * K
    return x[:nw].reshape(K, N).T.copy() + 1j * x[nw:2 * nw].reshape(K, N).T.copy()
