"""Precoding schemes for the perturbed zero-forcing downlink.

Every scheme returns a :class:`PrecodeResult` whose ``objective_value`` is
recomputed from the transmit frame ``X`` itself, so reported numbers are
always consistent with what would actually be transmitted:

* total transmit power  ``ttp  = ||X||_F^2 / T``
* peak per-antenna (per-symbol) power ``ppap = max |X|^2``

Scheme families (objective "ttp" or "ppap"):

=============  ====================================  =====================
key            optimized variables                   objectives
=============  ====================================  =====================
zf             none (rigid scaling)                  ttp, ppap
olb            linear beamformers                    ttp, ppap
semi-zf        phases, box offsets                   ttp, ppap (+ null Z)
null-zf        nullspace component only              ppap
slp            scale, phases, offsets (+ null Z)     ttp, ppap
vp             integer perturbations                 ttp, ppap
null-vp        nullspace + integer perturbations     ppap
slp-vp         scale, phases, offsets, perturb.      ttp, ppap (+ null Z)
=============  ====================================  =====================

Alternating-minimization schemes stop when the (objective-specific) merit
changes by less than ``am_rel_tol`` relatively, or after ``am_max_iters``
rounds. Peak-power schemes track the best true peak seen at any block
boundary and return that snapshot, while a smoothed soft-max drives the
inner solvers.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .lattice import FrameLatticeFactory, p_sphere_encode, sphere_decode
from .numerics import hermitian_eig
from .olb import achieved_sinrs, olb_ppap_beamformers, olb_ttp_beamformers
from .optimize import (
    BlockPacking,
    SmoothObjective,
    SolverConfig,
    apg_minimize,
    lse_grad,
    lse_max,
    pg_unit_modulus,
)
from .projection import project_box, project_frame
from .signal_model import (
    ShapingVars,
    assemble_transmit,
    decompose_transmit,
    diamond,
    margin_residual,
    margins_for_frame,
    stack_strands,
    zf_shaping,
)

TTP_SCHEMES = ("zf", "olb", "semi-zf", "slp", "vp", "slp-vp")
PPAP_SCHEMES = ("zf", "olb", "semi-zf", "null-zf", "slp", "vp", "null-vp", "slp-vp")
MODULO_SCHEMES = ("vp", "null-vp", "slp-vp")


@dataclass
class PrecoderSpec:
    """What to run: scheme key, objective, and solver knobs."""

    scheme: str = "zf"
    objective: str = "ttp"
    solver: SolverConfig = field(default_factory=SolverConfig)
    candidate_budget: int = 64


@dataclass
class PrecodeResult:
    scheme: str
    objective: str
    X: np.ndarray
    shaping: ShapingVars
    objective_value: float
    trace: np.ndarray
    wall_time: float
    residual: float
    modulo: bool
    extras: dict


def ttp_value(X):
    """Average per-symbol total transmit power of a frame."""
    return float(np.sum(np.abs(X) ** 2)) / X.shape[1]


def ppap_value(X):
    """Worst instantaneous per-antenna power of a frame."""
    return float(np.max(np.abs(X) ** 2))


def objective_of(X, objective):
    return ttp_value(X) if objective == "ttp" else ppap_value(X)


def _rphi(R, phi):
    """Congruence of the inverse Gram matrix by a diagonal phase matrix."""
    return np.conj(phi)[:, None] * R * phi[None, :]


def _quad_ttp(Rphi, Wm):
    return float(np.real(np.sum(np.conj(Wm) * (Rphi @ Wm)))) / Wm.shape[1]


def _finish(scheme, objective, shaping, S, ch, sep, cons, trace, t0, extras=None,
            X=None, exempt=False):
    """Assemble, certify, and package a result."""
    modulo = scheme in MODULO_SCHEMES
    if X is None:
        X = assemble_transmit(shaping, S, ch, cons)
    margins = margins_for_frame(S, sep, cons, modulo=modulo)
    U, _ = decompose_transmit(X, S, shaping.d, shaping.phi, ch,
                              cons=cons if modulo else None,
                              Gamma=shaping.Gamma if modulo else None)
    res = margin_residual(U, shaping.d, margins)
    return PrecodeResult(
        scheme=scheme,
        objective=objective,
        X=X,
        shaping=shaping,
        objective_value=objective_of(X, objective),
        trace=np.asarray(trace, dtype=float),
        wall_time=time.perf_counter() - t0,
        residual=float(res) if not exempt else float("nan"),
        modulo=modulo,
        extras=extras or {},
    )


# ---------------------------------------------------------------------------
# rigid and linear baselines


def zf(ch, S, sep, cons, objective="ttp"):
    """Rigid scaling: every symbol hit exactly at the common scale."""
    t0 = time.perf_counter()
    shaping = zf_shaping(sep, ch, S.shape[1])
    X = assemble_transmit(shaping, S, ch, cons)
    val = objective_of(X, objective)
    return _finish("zf", objective, shaping, S, ch, sep, cons, [val], t0, X=X)


def olb(ch, S, sep, cons, objective="ttp"):
    """SINR-constrained linear beamforming baseline.

    The shaping decomposition reported here treats the diagonal receive gains
    as the per-user scales; multiuser interference lands in the offsets, so
    the margin residual certificate does not apply (recorded as NaN).
    """
    t0 = time.perf_counter()
    chi = cons.rho * sep.alpha ** 2 / sep.sigma_v ** 2
    noise = sep.sigma_v ** 2 / cons.rho
    if objective == "ttp":
        W, info = olb_ttp_beamformers(ch.H, chi, noise)
    else:
        W, info = olb_ppap_beamformers(ch.H, chi, noise)
    X = W @ S
    g = np.real(np.diag(ch.H @ W))
    d = g * (1.0 + 1.0j)
    phi = np.ones(ch.K, dtype=complex)
    U, Z = decompose_transmit(X, S, d, phi, ch)
    shaping = ShapingVars(d=d, phi=phi, U=U, Z=Z,
                          Gamma=np.zeros_like(S))
    val = objective_of(X, objective)
    extras = {"beamformers": W, "sinr": info["sinr"], "iterations": info["iterations"]}
    out = _finish("olb", objective, shaping, S, ch, sep, cons, [val], t0,
                  extras=extras, X=X, exempt=True)
    return out


# ---------------------------------------------------------------------------
# total-power solvers (quadratic blocks)


def _phi_update_quadratic(R, Wm, phi0, cfg):
    """Minimize the frame power over unit-modulus per-user phases.

    The objective reduces to phi^H Rbar phi with
    Rbar = R  *  conj(Wm Wm^H) / T, a PSD Hermitian form, so projected
    gradient with the fixed step 1/(2 lambda_max) descends monotonically.
    """
    T = Wm.shape[1]
    Rbar = R * np.conj(Wm @ Wm.conj().T) / T
    Rbar = 0.5 * (Rbar + Rbar.conj().T)
    lam = hermitian_eig(Rbar)[0][0]
    if lam <= 0.0:
        return phi0, np.array([0.0])

    def vg(phi):
        Rp = Rbar @ phi
        return float(np.real(np.vdot(phi, Rp))), 2.0 * Rp

    return pg_unit_modulus(vg, phi0, cfg, fixed_step=1.0 / (2.0 * lam))


def _box_qp_update(Rphi, D, U0, margins, d_strand, cfg):
    """Offsets-only frame-power descent with per-entry box constraints."""
    K, T = U0.shape
    packer = BlockPacking({"U": (K, T)})
    lo_arr = -d_strand[:, None] + margins.lo
    hi_arr = d_strand[:, None] - margins.hi

    def vg(x):
        U = packer.unpack(x)["U"]
        Wm = D + U
        G = Rphi @ Wm
        val = float(np.real(np.sum(np.conj(Wm) * G))) / T
        return val, packer.pack({"U": (2.0 / T) * G})

    def project(x):
        U = packer.unpack(x)["U"]
        U = project_box(U, lo_arr, margins.lo_bounded, hi_arr, margins.hi_bounded)
        return packer.pack({"U": U})

    obj = SmoothObjective(value_and_grad=vg, project=project, is_quadratic=True)
    x, trace = apg_minimize(obj, packer.pack({"U": U0}), cfg)
    return packer.unpack(x)["U"], trace


def _coupled_qp_update(Rphi, S_eff, d0, U0, margins, alpha, cfg):
    """Joint (scales, offsets) frame-power descent with coupled projection."""
    K, T = U0.shape
    packer = BlockPacking({"d": (K,), "U": (K, T)})

    def vg(x):
        parts = packer.unpack(x)
        d, U = parts["d"], parts["U"]
        Wm = diamond(d[:, None], S_eff) + U
        G = Rphi @ Wm
        val = float(np.real(np.sum(np.conj(Wm) * G))) / T
        gW = (2.0 / T) * G
        return val, packer.pack({"d": diamond(gW, S_eff).sum(axis=1), "U": gW})

    def project(x):
        parts = packer.unpack(x)
        d, U = project_frame(parts["d"], parts["U"], margins, alpha)
        return packer.pack({"d": d, "U": U})

    obj = SmoothObjective(value_and_grad=vg, project=project, is_quadratic=True)
    x, trace = apg_minimize(obj, packer.pack({"d": d0, "U": U0}), cfg)
    parts = packer.unpack(x)
    return parts["d"], parts["U"], trace


def semi_zf_slp_ttp(ch, S, sep, cons, cfg=None):
    """Alternate phase rotations and box-constrained offsets at fixed scales."""
    t0 = time.perf_counter()
    cfg = cfg if cfg is not None else SolverConfig()
    T = S.shape[1]
    margins = margins_for_frame(S, sep, cons)
    shaping = zf_shaping(sep, ch, T)
    D = diamond(shaping.d[:, None], S)
    d_strand = stack_strands(shaping.d)
    Rphi = _rphi(ch.R, shaping.phi)
    f_prev = _quad_ttp(Rphi, D + shaping.U)
    trace = [f_prev]
    for _ in range(cfg.am_max_iters):
        shaping.phi, tr_phi = _phi_update_quadratic(ch.R, D + shaping.U,
                                                    shaping.phi, cfg)
        trace.append(float(tr_phi[-1]))
        Rphi = _rphi(ch.R, shaping.phi)
        shaping.U, tr_u = _box_qp_update(Rphi, D, shaping.U, margins,
                                         d_strand, cfg)
        f = float(tr_u[-1])
        trace.append(f)
        if abs(f_prev - f) <= cfg.am_rel_tol * max(abs(f_prev), 1e-12):
            f_prev = f
            break
        f_prev = f
    return _finish("semi-zf", "ttp", shaping, S, ch, sep, cons, trace, t0)


def slp_ttp(ch, S, sep, cons, cfg=None, init=None):
    """Full symbol-level shaping of the in-range component for frame power.

    Warm-started from the fixed-scale solution so the returned power can
    never exceed it.
    """
    t0 = time.perf_counter()
    cfg = cfg if cfg is not None else SolverConfig()
    if init is None:
        init = semi_zf_slp_ttp(ch, S, sep, cons, cfg=cfg)
    shaping = init.shaping.copy()
    margins = margins_for_frame(S, sep, cons)
    alpha = margins.alpha_strand
    Rphi = _rphi(ch.R, shaping.phi)
    f_prev = _quad_ttp(Rphi, diamond(shaping.d[:, None], S) + shaping.U)
    trace = [f_prev]
    for _ in range(cfg.am_max_iters):
        Wm = diamond(shaping.d[:, None], S) + shaping.U
        shaping.phi, tr_phi = _phi_update_quadratic(ch.R, Wm, shaping.phi, cfg)
        trace.append(float(tr_phi[-1]))
        Rphi = _rphi(ch.R, shaping.phi)
        shaping.d, shaping.U, tr = _coupled_qp_update(
            Rphi, S, shaping.d, shaping.U, margins, alpha, cfg)
        f = float(tr[-1])
        trace.append(f)
        if abs(f_prev - f) <= cfg.am_rel_tol * max(abs(f_prev), 1e-12):
            f_prev = f
            break
        f_prev = f
    return _finish("slp", "ttp", shaping, S, ch, sep, cons, trace, t0,
                   extras={"init_value": init.objective_value})


# ---------------------------------------------------------------------------
# peak-power solvers (smoothed max blocks + true-peak snapshots)


def _delta_for(cons, cfg):
    return cfg.lse_delta if cfg.lse_delta is not None else cons.L ** 2 / 25.0


class _PeakTracker:
    """Keeps the best true-peak snapshot across block boundaries."""

    def __init__(self, ch, S, cons):
        self.ch, self.S, self.cons = ch, S, cons
        self.best_val = np.inf
        self.best_shaping = None
        self.best_X = None
        self.trace = []

    def consider(self, shaping):
        X = assemble_transmit(shaping, self.S, self.ch, self.cons)
        val = ppap_value(X)
        if val < self.best_val:
            self.best_val = val
            self.best_shaping = shaping.copy()
            self.best_X = X
        self.trace.append(self.best_val)
        return X

    def adopt(self, result):
        X = result.X
        val = ppap_value(X)
        if val < self.best_val:
            self.best_val = val
            self.best_shaping = result.shaping.copy()
            self.best_X = X.copy()
        self.trace.append(self.best_val)


def _lse_joint_update(ch, S_eff, phi, d_val, U0, Z0, delta, margins, alpha,
                      cfg, optimize_d):
    """Smoothed-peak descent over (scales,) offsets, and nullspace weights."""
    K, T = U0.shape
    M = Z0.shape[0]
    shapes = {}
    if optimize_d:
        shapes["d"] = (K,)
    shapes["U"] = (K, T)
    shapes["Z"] = (M, T)
    packer = BlockPacking(shapes)
    if not optimize_d:
        d_strand = stack_strands(d_val)
        lo_arr = -d_strand[:, None] + margins.lo
        hi_arr = d_strand[:, None] - margins.hi
        D = diamond(d_val[:, None], S_eff)

    def vg(x):
        parts = packer.unpack(x)
        U, Z = parts["U"], parts["Z"]
        d = parts["d"] if optimize_d else d_val
        V = diamond(d[:, None], S_eff) + U
        X = ch.Hp @ (phi[:, None] * V)
        if M:
            X = X + ch.B @ Z
        P = np.abs(X) ** 2
        val = lse_max(P, delta)
        Wg = lse_grad(P.ravel(), delta).reshape(P.shape)
        gX = 2.0 * Wg * X
        gV = np.conj(phi)[:, None] * (ch.Hp.conj().T @ gX)
        out = {"U": gV, "Z": ch.B.conj().T @ gX if M else np.zeros((0, T))}
        if optimize_d:
            out["d"] = diamond(gV, S_eff).sum(axis=1)
        return val, packer.pack(out)

    def project(x):
        parts = packer.unpack(x)
        if optimize_d:
            d, U = project_frame(parts["d"], parts["U"], margins, alpha)
            parts["d"], parts["U"] = d, U
        else:
            parts["U"] = project_box(parts["U"], lo_arr, margins.lo_bounded,
                                     hi_arr, margins.hi_bounded)
        return packer.pack(parts)

    obj = SmoothObjective(value_and_grad=vg, project=project)
    x0 = {"U": U0, "Z": Z0}
    if optimize_d:
        x0["d"] = d_val
    x, trace = apg_minimize(obj, packer.pack(x0), cfg)
    parts = packer.unpack(x)
    d = parts["d"] if optimize_d else d_val
    return d, parts["U"], parts["Z"], trace


def _phi_lse_update(ch, S_eff, d, U, Z, phi0, delta, cfg):
    """Smoothed-peak descent over unit-modulus phases (everything else fixed)."""
    V = diamond(d[:, None], S_eff) + U
    Xz = ch.B @ Z if Z.shape[0] else 0.0

    def vg(phi):
        X = ch.Hp @ (phi[:, None] * V) + Xz
        P = np.abs(X) ** 2
        val = lse_max(P, delta)
        Wg = lse_grad(P.ravel(), delta).reshape(P.shape)
        gX = 2.0 * Wg * X
        return val, (np.conj(V) * (ch.Hp.conj().T @ gX)).sum(axis=1)

    return pg_unit_modulus(vg, phi0, cfg)


def _null_z_update(ch, X_fixed, Z0, delta, cfg):
    """Nullspace-only smoothed-peak descent, one soft max per symbol slot."""
    M, T = Z0.shape
    packer = BlockPacking({"Z": (M, T)})

    def vg(x):
        Z = packer.unpack(x)["Z"]
        X = X_fixed + ch.B @ Z
        P = np.abs(X) ** 2
        m = P.max(axis=0)
        E = np.exp((P - m[None, :]) / delta)
        col = E.sum(axis=0)
        val = float(np.sum(m + delta * np.log(col)))
        Wg = E / col[None, :]
        gX = 2.0 * Wg * X
        return val, packer.pack({"Z": ch.B.conj().T @ gX})

    obj = SmoothObjective(value_and_grad=vg, project=lambda x: x)
    x, trace = apg_minimize(obj, packer.pack({"Z": Z0}), cfg)
    return packer.unpack(x)["Z"], trace


def _smoothed_peak(ch, shaping, S, cons, delta):
    X = assemble_transmit(shaping, S, ch, cons)
    return lse_max(np.abs(X) ** 2, delta)


def slp_ppap(ch, S, sep, cons, variant="full", cfg=None,
             init_semi=None, init_null=None):
    """Peak-per-antenna-power shaping, in three variants.

    ``semi-zf``: phases and box offsets at fixed scales (plus nullspace).
    ``null-zf``: nullspace component only (reduces to rigid scaling when the
    channel is square).
    ``full``: scales, phases, offsets, and nullspace, warm-started from the
    better of the other two so it can never be worse than either.
    """
    t0 = time.perf_counter()
    cfg = cfg if cfg is not None else SolverConfig()
    delta = _delta_for(cons, cfg)
    T = S.shape[1]
    margins = margins_for_frame(S, sep, cons)
    alpha = margins.alpha_strand
    tracker = _PeakTracker(ch, S, cons)

    if variant == "null-zf":
        shaping = zf_shaping(sep, ch, T)
        tracker.consider(shaping)
        if ch.B.shape[1]:
            X_fixed = ch.Hp @ (shaping.phi[:, None] *
                               diamond(shaping.d[:, None], S))
            shaping.Z, _ = _null_z_update(ch, X_fixed, shaping.Z, delta, cfg)
            tracker.consider(shaping)
        return _finish("null-zf", "ppap", tracker.best_shaping, S, ch, sep,
                       cons, tracker.trace, t0, X=tracker.best_X)

    if variant == "semi-zf":
        shaping = zf_shaping(sep, ch, T)
        optimize_d = False
        scheme = "semi-zf"
        extras = {}
    elif variant == "full":
        if init_semi is None:
            init_semi = slp_ppap(ch, S, sep, cons, variant="semi-zf", cfg=cfg)
        if init_null is None:
            init_null = slp_ppap(ch, S, sep, cons, variant="null-zf", cfg=cfg)
        better = init_semi if init_semi.objective_value <= init_null.objective_value \
            else init_null
        shaping = better.shaping.copy()
        optimize_d = True
        scheme = "slp"
        extras = {"init_value": better.objective_value}
        tracker.adopt(better)
    else:
        raise ValueError("unknown peak-shaping variant %r" % (variant,))

    if variant == "semi-zf":
        tracker.consider(shaping)
    f_prev = _smoothed_peak(ch, shaping, S, cons, delta)
    for _ in range(cfg.am_max_iters):
        shaping.phi, _ = _phi_lse_update(ch, S, shaping.d, shaping.U,
                                         shaping.Z, shaping.phi, delta, cfg)
        tracker.consider(shaping)
        shaping.d, shaping.U, shaping.Z, _ = _lse_joint_update(
            ch, S, shaping.phi, shaping.d, shaping.U, shaping.Z, delta,
            margins, alpha, cfg, optimize_d)
        tracker.consider(shaping)
        f = _smoothed_peak(ch, shaping, S, cons, delta)
        if abs(f_prev - f) <= cfg.am_rel_tol * max(abs(f_prev), 1e-12):
            f_prev = f
            break
        f_prev = f
    return _finish(scheme, "ppap", tracker.best_shaping, S, ch, sep, cons,
                   tracker.trace, t0, extras=extras, X=tracker.best_X)


# ---------------------------------------------------------------------------
# modulo (vector-perturbation) family


def _gamma_sphere_update(ch, shaping, S, cons, use_peak, budget):
    """Per-slot integer perturbation update.

    Quadratic mode finds the exact per-slot minimizer of the phase-rotated
    power metric; peak mode re-ranks the closest candidates by their true
    per-slot antenna peak (current perturbation always among the candidates,
    so the peak never increases).
    """
    Rphi = _rphi(ch.R, shaping.phi)
    factory = FrameLatticeFactory(
        Rphi, shaping.d, cons.L,
        kind="peak" if use_peak else "quadratic",
        phi=shaping.phi if use_peak else None,
        Hp=ch.Hp if use_peak else None)
    T = S.shape[1]
    Gamma = shaping.Gamma.copy()
    if use_peak:
        V = diamond(shaping.d[:, None], S) + shaping.U
        X_base = ch.Hp @ (shaping.phi[:, None] * V)
        if ch.B.shape[1]:
            X_base = X_base + ch.B @ shaping.Z
    for t in range(T):
        mu_t = shaping.U[:, t]
        if use_peak:
            prob = factory.problem(S[:, t], mu_t, base_x=X_base[:, t])
            Gamma[:, t] = p_sphere_encode(prob, candidate_budget=budget,
                                          extra=shaping.Gamma[:, t])
        else:
            prob = factory.problem(S[:, t], mu_t)
            Gamma[:, t] = sphere_decode(prob)
    return Gamma


def vp_family(ch, S, sep, cons, scheme, objective, cfg=None,
              candidate_budget=64, init=None):
    """Modulo-receiver schemes: vp, null-vp (peak only), slp-vp."""
    t0 = time.perf_counter()
    cfg = cfg if cfg is not None else SolverConfig()
    T = S.shape[1]
    margins = margins_for_frame(S, sep, cons, modulo=True)
    alpha = margins.alpha_strand
    use_peak = objective == "ppap"
    delta = _delta_for(cons, cfg)

    if scheme == "vp":
        shaping = zf_shaping(sep, ch, T)
        trace = [objective_of(assemble_transmit(shaping, S, ch, cons), objective)]
        shaping.Gamma = _gamma_sphere_update(ch, shaping, S, cons, use_peak,
                                             candidate_budget)
        X = assemble_transmit(shaping, S, ch, cons)
        trace.append(objective_of(X, objective))
        return _finish("vp", objective, shaping, S, ch, sep, cons, trace, t0, X=X)

    if scheme == "null-vp":
        if objective != "ppap":
            raise ValueError("null-vp targets the peak objective only")
        if init is None:
            init = vp_family(ch, S, sep, cons, "vp", "ppap", cfg=cfg,
                             candidate_budget=candidate_budget)
        shaping = init.shaping.copy()
        tracker = _PeakTracker(ch, S, cons)
        tracker.adopt(init)
        f_prev = _smoothed_peak(ch, shaping, S, cons, delta)
        for _ in range(cfg.am_max_iters):
            if ch.B.shape[1]:
                S_eff = S + cons.modulo_period * shaping.Gamma
                X_fixed = ch.Hp @ (shaping.phi[:, None] *
                                   (diamond(shaping.d[:, None], S_eff) + shaping.U))
                shaping.Z, _ = _null_z_update(ch, X_fixed, shaping.Z, delta, cfg)
                tracker.consider(shaping)
            shaping.Gamma = _gamma_sphere_update(ch, shaping, S, cons, True,
                                                 candidate_budget)
            tracker.consider(shaping)
            f = _smoothed_peak(ch, shaping, S, cons, delta)
            if abs(f_prev - f) <= cfg.am_rel_tol * max(abs(f_prev), 1e-12):
                f_prev = f
                break
            f_prev = f
        return _finish("null-vp", "ppap", tracker.best_shaping, S, ch, sep,
                       cons, tracker.trace, t0, X=tracker.best_X,
                       extras={"init_value": init.objective_value})

    if scheme != "slp-vp":
        raise ValueError("unknown modulo scheme %r" % (scheme,))

    if objective == "ttp":
        if init is None:
            init = vp_family(ch, S, sep, cons, "vp", "ttp", cfg=cfg,
                             candidate_budget=candidate_budget)
        shaping = init.shaping.copy()
        trace = [init.objective_value]
        S_eff = S + cons.modulo_period * shaping.Gamma
        Rphi = _rphi(ch.R, shaping.phi)
        f_prev = _quad_ttp(Rphi, diamond(shaping.d[:, None], S_eff) + shaping.U)
        for _ in range(cfg.am_max_iters):
            S_eff = S + cons.modulo_period * shaping.Gamma
            Wm = diamond(shaping.d[:, None], S_eff) + shaping.U
            shaping.phi, tr_phi = _phi_update_quadratic(ch.R, Wm, shaping.phi, cfg)
            trace.append(float(tr_phi[-1]))
            Rphi = _rphi(ch.R, shaping.phi)
            shaping.d, shaping.U, tr = _coupled_qp_update(
                Rphi, S_eff, shaping.d, shaping.U, margins, alpha, cfg)
            trace.append(float(tr[-1]))
            shaping.Gamma = _gamma_sphere_update(ch, shaping, S, cons, False,
                                                 candidate_budget)
            S_eff = S + cons.modulo_period * shaping.Gamma
            f = _quad_ttp(Rphi, diamond(shaping.d[:, None], S_eff) + shaping.U)
            trace.append(f)
            if abs(f_prev - f) <= cfg.am_rel_tol * max(abs(f_prev), 1e-12):
                f_prev = f
                break
            f_prev = f
        return _finish("slp-vp", "ttp", shaping, S, ch, sep, cons, trace, t0,
                       extras={"init_value": init.objective_value})

    # slp-vp, peak objective
    if init is None:
        init = vp_family(ch, S, sep, cons, "null-vp", "ppap", cfg=cfg,
                         candidate_budget=candidate_budget)
    shaping = init.shaping.copy()
    tracker = _PeakTracker(ch, S, cons)
    tracker.adopt(init)
    f_prev = _smoothed_peak(ch, shaping, S, cons, delta)
    for _ in range(cfg.am_max_iters):
        S_eff = S + cons.modulo_period * shaping.Gamma
        shaping.phi, _ = _phi_lse_update(ch, S_eff, shaping.d, shaping.U,
                                         shaping.Z, shaping.phi, delta, cfg)
        tracker.consider(shaping)
        shaping.d, shaping.U, shaping.Z, _ = _lse_joint_update(
            ch, S_eff, shaping.phi, shaping.d, shaping.U, shaping.Z, delta,
            margins, alpha, cfg, optimize_d=True)
        tracker.consider(shaping)
        shaping.Gamma = _gamma_sphere_update(ch, shaping, S, cons, True,
                                             candidate_budget)
        tracker.consider(shaping)
        f = _smoothed_peak(ch, shaping, S, cons, delta)
        if abs(f_prev - f) <= cfg.am_rel_tol * max(abs(f_prev), 1e-12):
            f_prev = f
            break
        f_prev = f
    return _finish("slp-vp", "ppap", tracker.best_shaping, S, ch, sep, cons,
                   tracker.trace, t0, X=tracker.best_X,
                   extras={"init_value": init.objective_value})


# ---------------------------------------------------------------------------
# dispatch


def run_scheme(scheme, ch, S, sep, cons, objective="ttp", cfg=None,
               candidate_budget=64, **warm):
    """Run one named scheme on one frame and return its PrecodeResult."""
    allowed = TTP_SCHEMES if objective == "ttp" else PPAP_SCHEMES
    if objective not in ("ttp", "ppap"):
        raise ValueError("unknown objective %r" % (objective,))
    if scheme not in allowed:
        raise ValueError("scheme %r not defined for objective %r"
                         % (scheme, objective))
    if scheme == "zf":
        return zf(ch, S, sep, cons, objective=objective)
    if scheme == "olb":
        return olb(ch, S, sep, cons, objective=objective)
    if scheme in MODULO_SCHEMES:
        return vp_family(ch, S, sep, cons, scheme, objective, cfg=cfg,
                         candidate_budget=candidate_budget, **warm)
    if objective == "ttp":
        if scheme == "semi-zf":
            return semi_zf_slp_ttp(ch, S, sep, cons, cfg=cfg)
        return slp_ttp(ch, S, sep, cons, cfg=cfg, **warm)
    variant = {"semi-zf": "semi-zf", "null-zf": "null-zf", "slp": "full"}[scheme]
    return slp_ppap(ch, S, sep, cons, variant=variant, cfg=cfg, **warm)


def run_spec(spec, ch, S, sep, cons, **warm):
    return run_scheme(spec.scheme, ch, S, sep, cons, objective=spec.objective,
                      cfg=spec.solver, candidate_budget=spec.candidate_budget,
                      **warm)
