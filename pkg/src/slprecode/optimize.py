"""First-order solvers: accelerated projected gradient with backtracking and
a monotone safeguard, projected gradient on the unit-modulus set, and
log-sum-exp smoothing of the max.

Complex decision variables are optimized as stacked real vectors through
BlockPacking; complex gradients follow the convention that for
f(w) = w^H A w (A Hermitian) the packed gradient is the stacking of 2*A*w.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .projection import project_unit_modulus


class LineSearchStalled(RuntimeError):
    """Backtracking shrank the step below 1e-18 without sufficient decrease."""


@dataclass
class SolverConfig:
    """Knobs shared by the iterative solvers.

    initial_step None means: estimate the curvature by power iteration for
    quadratic objectives, else start at 1.0 and let backtracking adapt.
    lse_delta None means: the caller derives the smoothing width from the
    constellation (default L^2/25).
    """

    max_iters: int = 300
    rel_tol: float = 1e-3
    initial_step: float | None = None
    backtrack_shrink: float = 0.5
    lse_delta: float | None = None
    am_max_iters: int = 10
    am_rel_tol: float = 1e-3


@dataclass
class SmoothObjective:
    """Differentiable objective over a real vector plus a projection onto its
    feasible set. value_and_grad returns (value, gradient)."""

    value_and_grad: Callable[[np.ndarray], tuple]
    project: Callable[[np.ndarray], np.ndarray]
    is_quadratic: bool = False


# ---------------------------------------------------------------------------
# packing complex blocks into one real vector


class BlockPacking:
    """Maps named complex arrays to one real vector [Re(b1), Im(b1), Re(b2), ...]
    and back. Zero-size blocks are legal and occupy no space."""

    def __init__(self, shapes):
        self.shapes = dict(shapes)
        self._sizes = {k: int(np.prod(s, dtype=int)) for k, s in self.shapes.items()}
        self.total = 2 * sum(self._sizes.values())

    def pack(self, blocks):
        parts = []
        for name, shape in self.shapes.items():
            b = np.asarray(blocks[name], dtype=complex).reshape(shape)
            parts.append(np.real(b).ravel())
            parts.append(np.imag(b).ravel())
        if not parts:
            return np.zeros(0)
        return np.concatenate(parts)

    def unpack(self, x):
        out = {}
        pos = 0
        for name, shape in self.shapes.items():
            n = self._sizes[name]
            re = x[pos:pos + n].reshape(shape)
            im = x[pos + n:pos + 2 * n].reshape(shape)
            out[name] = re + 1j * im
            pos += 2 * n
        return out


# ---------------------------------------------------------------------------
# log-sum-exp smoothing


def lse_max(v, delta):
    """delta * log sum exp(v/delta), max-subtracted for overflow safety."""
    v = np.asarray(v, dtype=float).ravel()
    m = float(np.max(v))
    return m + delta * float(np.log(np.sum(np.exp((v - m) / delta))))


def lse_grad(v, delta):
    """Softmax weights of v/delta (the gradient of lse_max); sums to 1."""
    v = np.asarray(v, dtype=float)
    m = np.max(v)
    e = np.exp((v - m) / delta)
    return e / np.sum(e)


# ---------------------------------------------------------------------------
# curvature estimate (quadratics): power iteration on the Hessian via
# gradient differences — exact Hessian-vector products for quadratics


def estimate_curvature(obj, x0, iters=5):
    n = x0.size
    if n == 0:
        return 1.0
    v = np.cos(np.arange(1.0, n + 1.0))
    v /= np.linalg.norm(v)
    _, g0 = obj.value_and_grad(x0)
    lam = 1.0
    for _ in range(iters):
        _, g1 = obj.value_and_grad(x0 + v)
        hv = g1 - g0
        lam = float(np.linalg.norm(hv))
        if lam < 1e-12:
            return 1.0
        v = hv / lam
    return 1.05 * lam  # mild inflation so 1/lam stays a safe step


def _backtrack(obj, p, f_p, g_p, step, shrink):
    """One projected-gradient step from p with sufficient-decrease backtracking."""
    while True:
        x_new = obj.project(p - step * g_p)
        dx = x_new - p
        f_new, g_new = obj.value_and_grad(x_new)
        bound = f_p + float(g_p @ dx) + float(dx @ dx) / (2.0 * step) \
            + 1e-12 * (1.0 + abs(f_p))
        if f_new <= bound:
            return x_new, f_new, g_new, step
        step *= shrink
        if step < 1e-18:
            raise LineSearchStalled("backtracking step underflow")


def apg_minimize(obj, x0, cfg):
    """Accelerated projected gradient (FISTA momentum, backtracking line
    search, monotone safeguard).

    Iterates are feasible throughout (x0 is projected first). Stops when the
    infinity-norm change between successive iterates drops below cfg.rel_tol
    or after cfg.max_iters iterations. If an accelerated step would increase
    the objective, the iteration falls back to a plain projected-gradient
    step from the current point and resets the momentum, so the returned
    trace is non-increasing.

    Returns (x, trace) with trace[k] the objective after k iterations.
    """
    x = obj.project(np.asarray(x0, dtype=float).copy())
    f_x, g_x = obj.value_and_grad(x)
    trace = [f_x]
    if x.size == 0:
        return x, np.asarray(trace)
    if cfg.initial_step is not None:
        step = float(cfg.initial_step)
    elif obj.is_quadratic:
        step = 1.0 / estimate_curvature(obj, x)
    else:
        step = 1.0
    x_prev = x
    nu_prev = 0.0
    for _ in range(cfg.max_iters):
        nu = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * nu_prev * nu_prev))
        p = x + ((nu_prev - 1.0) / nu) * (x - x_prev)
        if np.array_equal(p, x):
            f_p, g_p = f_x, g_x
        else:
            f_p, g_p = obj.value_and_grad(p)
        x_new, f_new, g_new, step = _backtrack(obj, p, f_p, g_p, step, cfg.backtrack_shrink)
        if f_new > f_x + 1e-15 * (1.0 + abs(f_x)):
            # accelerated step went uphill: plain PG from x, restart momentum
            x_new, f_new, g_new, step = _backtrack(obj, x, f_x, g_x, step, cfg.backtrack_shrink)
            nu = 1.0
        diff = float(np.max(np.abs(x_new - x)))
        x_prev, x = x, x_new
        f_x, g_x = f_new, g_new
        nu_prev = nu
        trace.append(f_x)
        if diff < cfg.rel_tol:
            break
    return x, np.asarray(trace)


def pg_unit_modulus(value_and_grad, phi0, cfg, fixed_step=None):
    """Projected gradient on the unit-modulus set, operating on complex
    vectors directly.

    value_and_grad(phi) returns (value, complex gradient) in the convention
    df = Re(<grad, dphi>). With fixed_step given (the quadratic case, step
    1/(2 lambda_max)), the sufficient-decrease test holds by the descent
    lemma and backtracking never triggers; otherwise the step adapts.

    Returns (phi, trace).
    """
    phi = project_unit_modulus(np.asarray(phi0, dtype=complex))
    f, g = value_and_grad(phi)
    trace = [f]
    if phi.size == 0:
        return phi, np.asarray(trace)
    step = fixed_step if fixed_step is not None else (cfg.initial_step or 1.0)
    for _ in range(cfg.max_iters):
        while True:
            cand = project_unit_modulus(phi - step * g)
            dphi = cand - phi
            f_new, g_new = value_and_grad(cand)
            bound = f + float(np.real(np.vdot(g, dphi))) \
                + float(np.real(np.vdot(dphi, dphi))) / (2.0 * step) \
                + 1e-12 * (1.0 + abs(f))
            if f_new <= bound:
                break
            step *= cfg.backtrack_shrink
            if step < 1e-18:
                raise LineSearchStalled("unit-modulus step underflow")
        diff = float(np.max(np.abs(cand - phi)))
        phi, f, g = cand, f_new, g_new
        trace.append(f)
        if diff < cfg.rel_tol:
            break
    return phi, np.asarray(trace)
