import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import crandn, scalar_threshold
from relaybf import conic
from relaybf.conic import (ConicProblem, Layout, build_perfect, build_phase_slice, build_robust,
                           lift_complex, lift_hermitian, solve_feasibility, unlift_complex,
                           unlift_hermitian)
from relaybf.feasibility import gamma_upper_bound
from relaybf.metrics import sinrs
from relaybf.model import ChannelSet, NetworkConfig, derive, generate_channels, make_uncertainty
from relaybf.robust import robust_constants


def test_lift_examples():
    assert np.array_equal(lift_complex([1 + 2j]), [1.0, 2.0])
    assert np.array_equal(lift_hermitian([[2.0]]), [[2.0, 0.0], [0.0, 2.0]])


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6))
def test_lift_preserves_quadratic_forms_and_psd(seed, n):
    rng = np.random.default_rng(seed)
    a = crandn(rng, (n, n))
    m = a + a.conj().T
    w = crandn(rng, n)
    wl, ml = lift_complex(w), lift_hermitian(m)
    assert np.allclose(ml, ml.T)
    assert abs(np.real(np.vdot(w, m @ w)) - wl @ ml @ wl) <= 1e-12 * max(1, np.abs(m).sum())
    # eigenvalues are duplicated, so PSD-ness carries over both ways
    assert np.allclose(np.sort(np.repeat(np.linalg.eigvalsh(m), 2)), np.linalg.eigvalsh(ml))
    assert np.allclose(unlift_complex(wl), w) and np.allclose(unlift_hermitian(ml), m)


def toy(n_vars):
    return ConicProblem(n_vars, [], np.zeros(n_vars), Layout(0, omega=False, n_aux=n_vars))


def test_solver_linear_infeasible():
    p = toy(1)
    p.add("nonneg", [[1.0]], [-1.0], "x >= 1")
    p.add("nonneg", [[-1.0]], [0.0], "x <= 0")
    assert solve_feasibility(p).status == "infeasible"


def test_solver_soc_feasible():
    p = toy(2)
    p.add("soc", [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [1.0, 0.0, 0.0], "||x|| <= 1")
    p.add("eq", [[1.0, 0.0]], [-0.5], "x1 = 0.5")
    r = solve_feasibility(p)
    assert r.status == "feasible" and r.residuals <= 1e-8
    assert abs(r.x[0] - 0.5) < 1e-8 and abs(r.x[1]) <= np.sqrt(0.75) + 1e-8


def test_solver_psd_infeasible():
    p = toy(1)
    # [[x, 1], [1, 1]] column-major
    p.add("psd", [[1.0], [0.0], [0.0], [0.0]], [0.0, 1.0, 1.0, 1.0], "[[x,1],[1,1]] >= 0")
    p.add("nonneg", [[-1.0]], [0.5], "x <= 0.5")
    assert solve_feasibility(p).status == "infeasible"
    q = toy(1)
    q.add("psd", [[1.0], [0.0], [0.0], [0.0]], [0.0, 1.0, 1.0, 1.0], "[[x,1],[1,1]] >= 0")
    r = solve_feasibility(q)
    assert r.status == "feasible" and r.x[0] >= 1 - 1e-7


def test_block_shape_checked():
    p = toy(2)
    with pytest.raises(ValueError):
        p.add("nonneg", [[1.0]], [0.0], "bad")


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 5),
       alpha=st.floats(0.0, 10.0), beta=st.floats(0.0, 10.0))
def test_product_cone_equivalence(seed, n, alpha, beta):
    a = crandn(np.random.default_rng(seed), n)
    quad = np.vdot(a, a).real
    if abs(quad - alpha * beta) < 1e-12:
        return
    soc = np.linalg.norm(np.concatenate([[alpha - beta], 2 * a])) <= alpha + beta
    assert (quad <= alpha * beta) == soc


def default_config(**kw):
    d = dict(n_relays=10, n_interferers=2, p_interferer=10 ** -0.1, noise_var=0.01, mu=3.0,
             p_relay_max=10 ** 0.1)
    d.update(kw)
    return NetworkConfig(**d)


@pytest.mark.parametrize("seed", range(3))
def test_near_zero_target_feasible_and_double_bound_infeasible(seed):
    c = default_config()
    dq = derive(c, generate_channels(c, seed))
    g_up = gamma_upper_bound(dq, c)
    assert solve_feasibility(build_perfect(dq, c, 1e-6 * g_up)).status == "feasible"
    assert solve_feasibility(build_perfect(dq, c, 2 * g_up)).status == "infeasible"


def test_gamma_must_be_positive():
    c = default_config()
    dq = derive(c, generate_channels(c, 0))
    for build in (lambda g: build_perfect(dq, c, g), lambda g: build_phase_slice(dq, c, g, 0.0)):
        with pytest.raises(ValueError):
            build(0.0)


@pytest.mark.parametrize("seed", range(3))
def test_relaxed_point_meets_primary_constraints_and_schur(seed):
    c = default_config()
    dq = derive(c, generate_channels(c, seed))
    g = 0.3
    p = build_perfect(dq, c, g)
    r = solve_feasibility(p)
    assert r.status == "feasible"
    w = r.w
    s = sinrs(w, dq, c)
    # primary cones are exact in w, the caps too
    assert np.all(s[:2] >= g * (1 - 1e-6))
    assert np.all(dq.xi_r * np.abs(w) ** 2 <= c.p_relay_max * (1 + 1e-7))
    assert abs(np.vdot(dq.k_p1p2, w).imag) < 1e-7
    gap = r.omega - np.outer(w, w.conj())
    assert np.linalg.eigvalsh(gap).min() >= -1e-7
    # diag caps on Omega hold as well
    assert np.all(dq.xi_r * np.real(np.diag(r.omega)) <= c.p_relay_max * (1 + 1e-7))


def test_single_relay_threshold_matches_scalar_search():
    c = NetworkConfig(n_relays=1, n_interferers=0, p_primary=[1.0, 2.0], p_secondary=0.0,
                      noise_var=0.3, p_relay_max=0.8)
    ch = ChannelSet([[1.0], [1.0]], [[1.0], [1.0]], np.zeros((2, 0)), np.zeros((2, 0)),
                    np.zeros((0, 1)))
    dq = derive(c, ch)
    g_star = scalar_threshold(c, dq)
    assert solve_feasibility(build_perfect(dq, c, g_star * (1 - 1e-4))).status == "feasible"
    assert solve_feasibility(build_perfect(dq, c, g_star * (1 + 1e-4))).status == "infeasible"


def test_building_is_deterministic_and_dump_lists_blocks():
    c = default_config()
    dq = derive(c, generate_channels(c, 4))
    a, b = build_perfect(dq, c, 0.7), build_perfect(dq, c, 0.7)
    assert len(a.blocks) == len(b.blocks)
    for x, y in zip(a.blocks, b.blocks):
        assert x.kind == y.kind and x.label == y.label
        assert np.array_equal(x.coef, y.coef) and np.array_equal(x.const, y.const)
    text = a.dump()
    assert text == b.dump()
    assert "Schur" in text and "relay cap" in text and "product cone" in text
    assert len(a.psd_constraints) == 1 and a.psd_constraints[0].dim == (2 * 11) ** 2
    assert len(a.soc_constraints) == 2 + 2 + 10
    kinds = {blk.kind for blk in a.linear_constraints}
    assert kinds == {"eq", "nonneg"}
    assert a.labels[0].startswith("Im{k_P1P2")


def robust_setup(seed, rho):
    c = default_config()
    truth = generate_channels(c, seed)
    um = make_uncertainty(truth, c, "fractional", rho, seed=seed + 50)
    cr = um.apply_to(c)
    dq = derive(cr, um.estimates)
    return cr, um, dq, robust_constants(um, cr, dq)


@pytest.mark.parametrize("seed", range(2))
def test_robust_auxiliaries_bound_the_leakage(seed):
    c, um, dq, rc = robust_setup(seed, 0.1)
    p = build_robust(dq, c, rc, um.estimates, 0.2)
    r = solve_feasibility(p)
    assert r.status == "feasible"
    w = r.w
    lay = p.layout
    n_int = 2
    for which, fs in (("p", um.estimates.f_p), ("s", um.estimates.f_s)):
        base = 0 if which == "p" else 2
        for i in range(2):
            rho = r.x[lay.aux(base + i)]
            norm = np.linalg.norm(np.conj(fs[i]) * w)
            assert rho >= norm - 1e-6
            vr0 = 4 + (0 if which == "p" else 2 * n_int) + i * n_int
            for l in range(n_int):
                varrho = r.x[lay.aux(vr0 + l)]
                leak = abs(np.sum(np.conj(w) * fs[i] * um.estimates.h_i[l]))
                varpi = varrho + c.eps_interferer[l] * rho
                assert varpi >= leak + c.eps_interferer[l] * norm - 1e-6


@pytest.mark.parametrize("seed", range(2))
def test_robust_and_perfect_slices_agree_at_zero_radius(seed):
    c, um, dq, rc = robust_setup(seed, 0.0)
    for g, ph in ((0.5, 0.3), (0.9, 2.0)):
        a = solve_feasibility(build_phase_slice(dq, c, g, ph))
        b = solve_feasibility(build_phase_slice(dq, c, g, ph, rc, um.estimates))
        assert a.status == b.status
        if a.status == "feasible":
            assert abs(a.x[-1] - b.x[-1]) < 1e-6


@pytest.mark.parametrize("seed", range(3))
def test_phase_slice_points_meet_the_original_constraints(seed):
    c = default_config()
    dq = derive(c, generate_channels(c, seed))
    for ph in np.linspace(0, 2 * np.pi, 4, endpoint=False):
        p = build_phase_slice(dq, c, 0.5, ph)
        r = solve_feasibility(p)
        if r.status != "feasible" or r.x[-1] < 0:
            continue
        s = sinrs(r.w, dq, c)
        assert np.all(s[:2] >= 0.5 * (1 - 1e-6))
        assert np.all(c.mu * s[2:] >= 0.5 * (1 - 1e-6))
        assert abs(np.angle(np.vdot(dq.k_s1s2, r.w)) - np.angle(np.exp(1j * ph))) < 1e-5


def test_schur_block_is_symmetric():
    c = default_config(n_relays=3)
    dq = derive(c, generate_channels(c, 0))
    p = build_perfect(dq, c, 0.1)
    blk = p.psd_constraints[0]
    x = np.random.default_rng(0).standard_normal(p.n_vars)
    m = blk.value(x).reshape(8, 8, order="F")
    assert np.allclose(m, m.T)
    # reading back Omega and w from the lifted block
    om = p.layout.omega_from_x(x)
    assert np.allclose(unlift_hermitian(np.block([[m[:3, :3], m[:3, 4:7]], [m[4:7, :3], m[4:7, 4:7]]])), om)
    assert np.allclose(m[:3, 3] + 1j * m[4:7, 3], x[:3] + 1j * x[3:6])


def test_solver_error_never_feasible(monkeypatch):
    import cvxopt.solvers

    def boom(*a, **k):
        raise ArithmeticError("synthetic")

    monkeypatch.setattr(cvxopt.solvers, "conelp", boom)
    p = toy(1)
    p.add("nonneg", [[1.0]], [0.0], "x >= 0")
    r = solve_feasibility(p)
    assert r.status == "error" and not np.isfinite(r.residuals)


def test_default_tolerance():
    assert conic.DEFAULT_TOL == 1e-8 and conic.DEFAULT_MAX_ITERS == 200
