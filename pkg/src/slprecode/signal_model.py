"""QAM signal model: constellation, error-probability margins, detection,
and the perturbed zero-forcing representation of transmit frames.

Conventions used throughout the package:

* channels H are (K, N) with K <= N, symbol frames S are (K, T), transmit
  frames X are (N, T);
* "strand" arrays stack the real parts of all K users on top of the
  imaginary parts, giving shape (2K, ...) — row r < K is user r's real
  axis, row K + r its imaginary axis;
* the componentwise real/imaginary product is ``diamond``:
  Re(x)*Re(y) + j Im(x)*Im(y).
"""

from dataclasses import dataclass

import numpy as np

from .numerics import gram_inverse, nullspace_basis, pseudo_inverse, qfunc_inv


class DimensionMismatch(ValueError):
    pass


class SymbolNotInConstellation(ValueError):
    pass


# ---------------------------------------------------------------------------
# constellation


@dataclass(frozen=True)
class Constellation:
    """Square QAM alphabet with odd-integer coordinates ±1, ±3, ..., ±(2L-1).

    rho is the average symbol power over the full alphabet; rho_bar the
    average over the inner points (both coordinates strictly inside the
    boundary), defined for L >= 2.
    """

    L: int
    levels: np.ndarray        # (2L,) odd integers, ascending
    points: np.ndarray        # (4L^2,) complex, row-major over (re, im)
    rho: float
    rho_bar: float
    max_level: int            # 2L - 1
    modulo_period: int        # 4L


def make_constellation(L):
    if L < 1:
        raise ValueError("L must be a positive integer")
    L = int(L)
    levels = np.arange(-(2 * L - 1), 2 * L, 2, dtype=float)
    re, im = np.meshgrid(levels, levels, indexing="ij")
    points = (re + 1j * im).ravel()
    rho = 2.0 * (2 * L + 1) * (2 * L - 1) / 3.0
    rho_bar = 2.0 * (2 * L - 1) * (2 * L - 3) / 3.0 if L >= 2 else float("nan")
    return Constellation(
        L=L,
        levels=levels,
        points=points,
        rho=rho,
        rho_bar=rho_bar,
        max_level=2 * L - 1,
        modulo_period=4 * L,
    )


def validate_symbols(S, cons):
    S = np.asarray(S)
    parts = np.concatenate([np.real(S).ravel(), np.imag(S).ravel()])
    ok = np.isin(parts, cons.levels)
    if not np.all(ok):
        bad = parts[~ok][0]
        raise SymbolNotInConstellation(
            f"coordinate {bad} is not an odd integer within +-{cons.max_level}"
        )


# ---------------------------------------------------------------------------
# componentwise real/imaginary algebra


def diamond(x, y):
    """Componentwise product acting separately on real and imaginary parts."""
    return np.real(x) * np.real(y) + 1j * (np.imag(x) * np.imag(y))


def stack_strands(v):
    """Complex (K, ...) -> real (2K, ...): real rows then imaginary rows."""
    v = np.asarray(v)
    return np.concatenate([np.real(v), np.imag(v)], axis=0)


def unstack_strands(w):
    """Inverse of stack_strands."""
    w = np.asarray(w, dtype=float)
    K = w.shape[0] // 2
    return w[:K] + 1j * w[K:]


def modulo_fold(v, L):
    """Fold real values into [-2L, 2L) with period 4L."""
    period = 4 * L
    return v - np.floor((v + 2 * L) / period) * period


# ---------------------------------------------------------------------------
# SEP margins


def inner_margin(eps, sigma_v2=1.0):
    """Two-sided decision margin guaranteeing per-axis SEP <= eps.

    Solves 1 - (1 - 2Q(m/sigma_x))^2 = eps for the per-axis noise deviation
    sigma_x = sigma_v/sqrt(2), i.e. m = sigma_x * Qinv((1 - sqrt(1-eps))/2).
    """
    eps = np.asarray(eps, dtype=float)
    sigma_x = np.sqrt(sigma_v2 / 2.0)
    p = (1.0 - np.sqrt(1.0 - eps)) / 2.0
    out = sigma_x * np.vectorize(qfunc_inv)(p)
    return float(out) if out.ndim == 0 else out


def boundary_margin(eps, sigma_v2=1.0):
    """One-sided margin for boundary coordinates: sigma_x * Qinv(1-sqrt(1-eps))."""
    eps = np.asarray(eps, dtype=float)
    sigma_x = np.sqrt(sigma_v2 / 2.0)
    p = 1.0 - np.sqrt(1.0 - eps)
    out = sigma_x * np.vectorize(qfunc_inv)(p)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class SepSpec:
    """Per-user SEP targets and the margins they induce.

    alpha is the two-sided (inner-coordinate) margin, beta the one-sided
    (boundary-coordinate) margin; alpha_c = alpha * (1 + 1j) is the complex
    spacing floor.
    """

    eps: np.ndarray           # (K,)
    sigma_v: float
    alpha: np.ndarray         # (K,)
    beta: np.ndarray          # (K,)
    alpha_c: np.ndarray       # (K,) complex


def make_sep_spec(eps, K=None, sigma_v2=1.0):
    eps = np.asarray(eps, dtype=float)
    if eps.ndim == 0:
        if K is None:
            raise ValueError("scalar eps needs an explicit user count K")
        eps = np.full(K, float(eps))
    if np.any((eps <= 0.0) | (eps >= 1.0)):
        raise ValueError("SEP targets must lie strictly in (0,1)")
    alpha = inner_margin(eps, sigma_v2)
    beta = boundary_margin(eps, sigma_v2)
    assert np.all(alpha > 0.0)
    return SepSpec(
        eps=eps,
        sigma_v=float(np.sqrt(sigma_v2)),
        alpha=np.atleast_1d(alpha),
        beta=np.atleast_1d(beta),
        alpha_c=np.atleast_1d(alpha * (1.0 + 1.0j)),
    )


# ---------------------------------------------------------------------------
# channel state


@dataclass(frozen=True)
class ChannelState:
    """Channel with its precomputed factorizations.

    Hp is the right pseudo-inverse H^H (H H^H)^{-1}; B an orthonormal basis
    of the nullspace of H (zero width when K = N); R = (H H^H)^{-1}.
    """

    H: np.ndarray             # (K, N)
    Hp: np.ndarray            # (N, K)
    B: np.ndarray             # (N, N-K)
    R: np.ndarray             # (K, K)

    @property
    def K(self):
        return self.H.shape[0]

    @property
    def N(self):
        return self.H.shape[1]


def make_channel_state(H):
    H = np.asarray(H, dtype=complex)
    return ChannelState(H=H, Hp=pseudo_inverse(H), B=nullspace_basis(H), R=gram_inverse(H))


# ---------------------------------------------------------------------------
# per-frame margins


@dataclass(frozen=True)
class MarginPair:
    """Margins for one symbol time, in strand form (length 2K).

    The shaping constraint on the residual strand u_r is
    -d_r + lo[r] <= u_r <= d_r - hi[r], with each side active only where its
    bounded mask is True.
    """

    lo: np.ndarray
    lo_bounded: np.ndarray
    hi: np.ndarray
    hi_bounded: np.ndarray


@dataclass(frozen=True)
class FrameMargins:
    """Strand-form margin arrays for a whole frame, shape (2K, T).

    Unbounded sides are encoded by the boolean masks (False = no constraint),
    never by infinities, so downstream sorts and sums never see non-finite
    values.
    """

    lo: np.ndarray            # (2K, T)
    lo_bounded: np.ndarray    # (2K, T) bool
    hi: np.ndarray            # (2K, T)
    hi_bounded: np.ndarray    # (2K, T) bool
    alpha_strand: np.ndarray  # (2K,) spacing floor per strand

    def at(self, t):
        return MarginPair(
            lo=self.lo[:, t].copy(),
            lo_bounded=self.lo_bounded[:, t].copy(),
            hi=self.hi[:, t].copy(),
            hi_bounded=self.hi_bounded[:, t].copy(),
        )


def margins_for_frame(S, spec, cons, modulo=False):
    """Margin assignment per symbol coordinate.

    Inner coordinates get the two-sided margin alpha on both sides; a
    coordinate at +(2L-1) needs lo = beta and no upper bound; at -(2L-1)
    no lower bound and hi = beta. In modulo mode every coordinate is treated
    as inner (the folding removes the boundary), with alpha on both sides.
    """
    S = np.atleast_2d(np.asarray(S, dtype=complex))
    validate_symbols(S, cons)
    K, T = S.shape
    if spec.alpha.shape[0] != K:
        raise DimensionMismatch("SEP spec and frame disagree on user count")
    SS = stack_strands(S)                          # (2K, T)
    alpha = np.concatenate([spec.alpha, spec.alpha])[:, None]
    beta = np.concatenate([spec.beta, spec.beta])[:, None]
    ones = np.ones((2 * K, T), dtype=bool)
    if modulo:
        lo = np.broadcast_to(alpha, SS.shape).copy()
        return FrameMargins(
            lo=lo,
            lo_bounded=ones,
            hi=lo.copy(),
            hi_bounded=ones.copy(),
            alpha_strand=np.concatenate([spec.alpha, spec.alpha]),
        )
    at_top = SS >= cons.max_level
    at_bot = SS <= -cons.max_level
    lo = np.where(at_top, beta, alpha)
    hi = np.where(at_bot, beta, alpha)
    return FrameMargins(
        lo=lo,
        lo_bounded=~at_bot,
        hi=hi,
        hi_bounded=~at_top,
        alpha_strand=np.concatenate([spec.alpha, spec.alpha]),
    )


# ---------------------------------------------------------------------------
# shaping variables and the transmit-signal representation


@dataclass
class ShapingVars:
    """All per-frame design variables of the perturbed-ZF representation.

    d: (K,) complex half spacings (Re/Im may differ), floor alpha_c.
    phi: (K,) unit-modulus per-user phases.
    U: (K, T) complex residual perturbations (plays the folded-residual role
       when Gamma is nonzero).
    Z: (N-K, T) nullspace coefficients.
    Gamma: (K, T) complex integers (vector-perturbation offsets).
    """

    d: np.ndarray
    phi: np.ndarray
    U: np.ndarray
    Z: np.ndarray
    Gamma: np.ndarray

    def copy(self):
        return ShapingVars(
            d=self.d.copy(),
            phi=self.phi.copy(),
            U=self.U.copy(),
            Z=self.Z.copy(),
            Gamma=self.Gamma.copy(),
        )


def zf_shaping(spec, ch, T):
    """The benchmark shaping point: d at the floor, no rotation, no residuals."""
    K, N = ch.K, ch.N
    return ShapingVars(
        d=spec.alpha_c.astype(complex).copy(),
        phi=np.ones(K, dtype=complex),
        U=np.zeros((K, T), dtype=complex),
        Z=np.zeros((N - K, T), dtype=complex),
        Gamma=np.zeros((K, T), dtype=complex),
    )


def _effective_symbols(S, Gamma, cons):
    if Gamma is None:
        return S
    return S + cons.modulo_period * Gamma


def assemble_transmit(vars, S, ch, cons):
    """Transmit frame X from shaping variables:

    x_t = Hp (phi o (d <> (s_t + 4L g_t) + u_t)) + B z_t,

    where o is the elementwise product and <> the diamond product. Accepts a
    single symbol vector (K,) or a frame (K, T); the output matches.
    """
    S = np.asarray(S, dtype=complex)
    single = S.ndim == 1
    S2 = S[:, None] if single else S
    K, T = S2.shape
    U2 = vars.U[:, None] if vars.U.ndim == 1 else vars.U
    G2 = vars.Gamma[:, None] if vars.Gamma.ndim == 1 else vars.Gamma
    Z2 = vars.Z[:, None] if vars.Z.ndim == 1 else vars.Z
    if ch.K != K or vars.d.shape[0] != K or U2.shape != (K, T) or G2.shape != (K, T):
        raise DimensionMismatch("shaping variables inconsistent with the frame")
    if Z2.shape != (ch.B.shape[1], T):
        raise DimensionMismatch("nullspace coefficient shape mismatch")
    s_eff = S2 + cons.modulo_period * G2
    V = diamond(vars.d[:, None], s_eff) + U2
    X = ch.Hp @ (vars.phi[:, None] * V)
    if ch.B.shape[1] > 0:
        X = X + ch.B @ Z2
    return X[:, 0] if single else X


def decompose_transmit(X, S, d, phi, ch, cons=None, Gamma=None):
    """Recover (U, Z) from a transmit frame:

    u_t = conj(phi) o (H x_t) - d <> s_eff_t,   z_t = B^H x_t.

    With Gamma given (and the constellation for its modulo period), s_eff
    includes the integer offsets and U is the folded residual.
    """
    X = np.asarray(X, dtype=complex)
    S = np.asarray(S, dtype=complex)
    single = S.ndim == 1
    X2 = X[:, None] if X.ndim == 1 else X
    S2 = S[:, None] if single else S
    if X2.shape[0] != ch.N or S2.shape[0] != ch.K or X2.shape[1] != S2.shape[1]:
        raise DimensionMismatch("frame shapes inconsistent with the channel")
    if Gamma is not None:
        if cons is None:
            raise ValueError("Gamma offsets need the constellation's modulo period")
        G2 = Gamma[:, None] if Gamma.ndim == 1 else Gamma
        s_eff = S2 + cons.modulo_period * G2
    else:
        s_eff = S2
    U = np.conj(phi)[:, None] * (ch.H @ X2) - diamond(np.asarray(d)[:, None], s_eff)
    Z = ch.B.conj().T @ X2
    if single:
        return U[:, 0], Z[:, 0]
    return U, Z


def margin_residual(U, d, margins, alpha=None):
    """Worst-case violation of the shaping constraints (0 means feasible).

    Checks, in strand form, -d_r + lo <= u_r <= d_r - hi on bounded sides and
    the spacing floor d_r >= alpha_r (taken from the margins when not given).
    """
    Ur = stack_strands(np.atleast_2d(U))
    dr = stack_strands(np.asarray(d).reshape(-1, 1))[:, 0]
    floor = margins.alpha_strand if alpha is None else np.concatenate([alpha, alpha])
    lo_gap = np.where(margins.lo_bounded, (-dr[:, None] + margins.lo) - Ur, 0.0)
    hi_gap = np.where(margins.hi_bounded, Ur - (dr[:, None] - margins.hi), 0.0)
    d_gap = floor - dr
    worst = 0.0
    for arr in (lo_gap, hi_gap, d_gap):
        if arr.size:
            worst = max(worst, float(np.max(arr)))
    return worst


# ---------------------------------------------------------------------------
# detection


def _expand(v, ndim):
    v = np.asarray(v)
    return v.reshape(v.shape + (1,) * (ndim - 1))


def _decide_levels(v, cons):
    dec = 2.0 * np.round((v - 1.0) / 2.0) + 1.0
    return np.clip(dec, -cons.max_level, cons.max_level)


def detect(y, d, phi, cons):
    """Nearest-odd-integer decision after phase derotation and rescaling.

    Broadcasts over trailing axes: y may be (K,), (K, T) or (K, B, T) with
    d, phi of shape (K,).
    """
    y = np.asarray(y, dtype=complex)
    w = np.conj(_expand(phi, y.ndim)) * y
    re = np.real(w) / np.real(_expand(d, y.ndim))
    im = np.imag(w) / np.imag(_expand(d, y.ndim))
    return _decide_levels(re, cons) + 1j * _decide_levels(im, cons)


def detect_modulo(y, d, phi, cons):
    """Modulo receiver: fold each normalized axis into [-2L, 2L), then decide."""
    y = np.asarray(y, dtype=complex)
    w = np.conj(_expand(phi, y.ndim)) * y
    re = modulo_fold(np.real(w) / np.real(_expand(d, y.ndim)), cons.L)
    im = modulo_fold(np.imag(w) / np.imag(_expand(d, y.ndim)), cons.L)
    return _decide_levels(re, cons) + 1j * _decide_levels(im, cons)


# ---------------------------------------------------------------------------
# empirical SEP


@dataclass(frozen=True)
class SepReport:
    """Per-user Monte Carlo SEP estimate with Wilson-interval half-widths."""

    err_rate: np.ndarray      # (K,)
    half_width: np.ndarray    # (K,)
    draws: int                # per user
    errors: np.ndarray        # (K,) integer counts


def wilson_half_width(errors, draws, z=1.96):
    p = errors / draws
    denom = 1.0 + z * z / draws
    return z * np.sqrt(p * (1.0 - p) / draws + z * z / (4.0 * draws * draws)) / denom


def empirical_sep(X, S, spec, d, phi, ch, cons, modulo=False, trials=10**6, seed=0):
    """Monte Carlo SEP of a fixed transmit frame under fresh receiver noise.

    The frame is replayed ceil(trials/T) times with i.i.d. circular complex
    Gaussian noise of variance sigma_v^2 per user; detection is `detect` or
    `detect_modulo`. `seed` may be an int or a numpy SeedSequence.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    X = np.atleast_2d(np.asarray(X, dtype=complex))
    S = np.atleast_2d(np.asarray(S, dtype=complex))
    K, T = S.shape
    Y0 = ch.H @ X                                   # (K, T) noise-free receive
    n_rep = -(-int(trials) // T)                    # ceil
    rng = np.random.default_rng(seed)
    sigma_ax = spec.sigma_v / np.sqrt(2.0)
    decider = detect_modulo if modulo else detect
    errors = np.zeros(K, dtype=np.int64)
    # chunk replications to bound memory at ~2^21 complex entries per block
    block = max(1, (1 << 21) // max(K * T, 1))
    done = 0
    while done < n_rep:
        b = min(block, n_rep - done)
        noise = rng.standard_normal((K, b, T)) + 1j * rng.standard_normal((K, b, T))
        Yn = Y0[:, None, :] + sigma_ax * noise
        Shat = decider(Yn, d, phi, cons)
        errors += np.sum(Shat != S[:, None, :], axis=(1, 2))
        done += b
    draws = n_rep * T
    return SepReport(
        err_rate=errors / draws,
        half_width=wilson_half_width(errors.astype(float), draws),
        draws=draws,
        errors=errors,
    )
