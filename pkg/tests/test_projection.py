import numpy as np
import pytest

from oracles import (
    coupled_objective_reference,
    effective_floor_reference,
    project_coupled_cvxpy,
    project_coupled_scan,
    random_feasible_point,
)
from slprecode import (
    CoupledFeasibleSet,
    make_constellation,
    make_sep_spec,
    margins_for_frame,
    project_box,
    project_coupled,
    project_frame,
    project_unit_modulus,
)


def random_feasible_set(rng, m, floor=None):
    """A random mixture of two-sided, lower-only, and upper-only coordinates."""
    lo = 0.2 + rng.uniform(size=m)
    hi = 0.2 + rng.uniform(size=m)
    case = rng.integers(0, 3, m)
    lo_bounded = case != 1
    hi_bounded = case != 2
    if floor is None:
        floor = 0.1 + 0.5 * rng.uniform()
    return CoupledFeasibleSet(lo=lo, lo_bounded=lo_bounded, hi=hi,
                              hi_bounded=hi_bounded, floor=float(floor))


def test_projection_matches_scan_oracle(rng):
    for _ in range(300):
        m = int(rng.integers(1, 7))
        fs = random_feasible_set(rng, m)
        d_t = rng.normal(scale=2.0)
        u_t = rng.normal(scale=2.0, size=m)
        d, u = project_coupled(d_t, u_t, fs)
        mine = coupled_objective_reference(d, u, d_t, u_t)
        d_o, u_o = project_coupled_scan(d_t, u_t, fs)
        ref = coupled_objective_reference(d_o, u_o, d_t, u_t)
        assert mine <= ref + 1e-8
        assert fs.contains(d, u, tol=1e-10)


def test_projection_matches_cvxpy(rng):
    for _ in range(40):
        m = int(rng.integers(1, 7))
        fs = random_feasible_set(rng, m)
        d_t = rng.normal(scale=2.0)
        u_t = rng.normal(scale=2.0, size=m)
        d, u = project_coupled(d_t, u_t, fs)
        mine = coupled_objective_reference(d, u, d_t, u_t)
        _, _, ref = project_coupled_cvxpy(d_t, u_t, fs)
        assert mine <= ref + 1e-7
        # cvxpy solves to ~1e-7; being slightly below its value is fine
        assert mine >= ref - 1e-6 * (1.0 + abs(ref))


def test_projection_variational_inequality(rng):
    # <x_tilde - p, q - p> <= 0 for all feasible q characterizes the projection
    for _ in range(100):
        m = int(rng.integers(1, 7))
        fs = random_feasible_set(rng, m)
        d_t = rng.normal(scale=2.0)
        u_t = rng.normal(scale=2.0, size=m)
        d, u = project_coupled(d_t, u_t, fs)
        r = np.concatenate([[d_t - d], u_t - u])
        for _ in range(10):
            qd, qu = random_feasible_point(rng, fs)
            q = np.concatenate([[qd - d], qu - u])
            bound = 1e-8 * np.linalg.norm(r) * np.linalg.norm(q)
            assert float(r @ q) <= bound


def test_projection_nonexpansive(rng):
    for _ in range(100):
        m = int(rng.integers(1, 7))
        fs = random_feasible_set(rng, m)
        x1 = (rng.normal(scale=2.0), rng.normal(scale=2.0, size=m))
        x2 = (rng.normal(scale=2.0), rng.normal(scale=2.0, size=m))
        p1 = project_coupled(*x1, fs)
        p2 = project_coupled(*x2, fs)
        dist_p = np.hypot(p1[0] - p2[0], np.linalg.norm(p1[1] - p2[1]))
        dist_x = np.hypot(x1[0] - x2[0], np.linalg.norm(x1[1] - x2[1]))
        assert dist_p <= dist_x + 1e-10


def test_projection_idempotent_and_fixed_points(rng):
    for _ in range(50):
        m = int(rng.integers(1, 6))
        fs = random_feasible_set(rng, m)
        d_t = rng.normal(scale=2.0)
        u_t = rng.normal(scale=2.0, size=m)
        d, u = project_coupled(d_t, u_t, fs)
        d2, u2 = project_coupled(d, u, fs)
        assert d2 == pytest.approx(d, abs=1e-12)
        assert np.allclose(u2, u, atol=1e-12)
        # feasible points are fixed
        qd, qu = random_feasible_point(rng, fs)
        pd, pu = project_coupled(qd, qu, fs)
        assert pd == pytest.approx(qd, abs=1e-12)
        assert np.allclose(pu, qu, atol=1e-12)


def test_effective_floor():
    fs = CoupledFeasibleSet(
        lo=np.array([1.0, 0.6]), lo_bounded=np.array([True, True]),
        hi=np.array([0.8, 0.6]), hi_bounded=np.array([True, True]),
        floor=0.5)
    # both-bounded coordinate needs d >= (lo+hi)/2 = 0.9 > 0.5
    assert fs.effective_floor() == pytest.approx(0.9)
    assert effective_floor_reference(fs) == pytest.approx(0.9)
    d, u = project_coupled(0.0, np.array([0.0, 0.0]), fs)
    assert d >= 0.9 - 1e-12
    assert fs.contains(d, u, tol=1e-10)


def test_projection_no_bounds_reduces_to_clamp(rng):
    m = 4
    fs = CoupledFeasibleSet(
        lo=np.zeros(m), lo_bounded=np.zeros(m, dtype=bool),
        hi=np.zeros(m), hi_bounded=np.zeros(m, dtype=bool),
        floor=1.3)
    u_t = rng.normal(size=m)
    d, u = project_coupled(0.2, u_t, fs)
    assert d == pytest.approx(1.3)
    assert np.allclose(u, u_t)
    d, u = project_coupled(2.5, u_t, fs)
    assert d == pytest.approx(2.5)


def test_projection_single_breakpoint_closed_form():
    # one upper-bounded coordinate: minimize (d-d_t)^2 + (u-u_t)^2
    # s.t. u <= d - hi, d >= floor; off-constraint optimum at the fold line
    fs = CoupledFeasibleSet(
        lo=np.array([0.0]), lo_bounded=np.array([False]),
        hi=np.array([1.0]), hi_bounded=np.array([True]),
        floor=0.1)
    # target violates the constraint: u_t > d_t - hi: fold onto u = d - 1
    d, u = project_coupled(1.0, np.array([1.0]), fs)
    # unconstrained foot of (1,1) on the line u = d-1: d = 1.5, u = 0.5
    assert d == pytest.approx(1.5, abs=1e-12)
    assert u[0] == pytest.approx(0.5, abs=1e-12)


def test_project_box(rng):
    lo = np.array([[-1.0, -2.0]])
    hi = np.array([[1.0, 0.5]])
    U = np.array([[-3.0, 2.0]])
    out = project_box(U, lo, np.array([[True, False]]),
                      hi, np.array([[False, True]]))
    assert out[0, 0] == -1.0  # clamped up to lo
    assert out[0, 1] == 0.5   # clamped down to hi
    out2 = project_box(U, lo, np.zeros((1, 2), bool), hi, np.zeros((1, 2), bool))
    assert np.array_equal(out2, U)


def test_project_unit_modulus(rng):
    phi = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    phi[2] = 0.0
    out = project_unit_modulus(phi)
    assert np.allclose(np.abs(out), 1.0)
    assert out[2] == 1.0 + 0.0j
    nz = np.abs(phi) > 0
    assert np.allclose(out[nz], phi[nz] / np.abs(phi[nz]))


def test_project_frame_strandwise(rng):
    cons = make_constellation(2)
    spec = make_sep_spec([1e-2, 5e-3, 2e-2], K=None)
    K, T = 3, 5
    S = cons.levels[rng.integers(0, 4, (K, T))] + 1j * cons.levels[rng.integers(0, 4, (K, T))]
    m = margins_for_frame(S, spec, cons)
    d_t = rng.standard_normal(K) + 1j * rng.standard_normal(K)
    U_t = (rng.standard_normal((K, T)) + 1j * rng.standard_normal((K, T)))
    d, U = project_frame(d_t, U_t, m, m.alpha_strand)
    # strand r of the result equals the scalar coupled projection of strand r
    from slprecode import stack_strands
    dr_t = stack_strands(d_t.reshape(-1, 1))[:, 0]
    Ur_t = stack_strands(U_t)
    dr = stack_strands(d.reshape(-1, 1))[:, 0]
    Ur = stack_strands(U)
    for r in range(2 * K):
        fs = CoupledFeasibleSet(lo=m.lo[r], lo_bounded=m.lo_bounded[r],
                                hi=m.hi[r], hi_bounded=m.hi_bounded[r],
                                floor=float(m.alpha_strand[r]))
        d_ref, u_ref = project_coupled(float(dr_t[r]), Ur_t[r], fs)
        assert dr[r] == pytest.approx(d_ref, abs=1e-12)
        assert np.allclose(Ur[r], u_ref, atol=1e-12)
        assert dr[r] >= m.alpha_strand[r] - 1e-12
