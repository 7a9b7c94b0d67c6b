"""Real-lifted conic feasibility problems for a fixed SINR target.

A problem is a list of cone blocks over a real decision vector ``x``.
Every block holds an affine map ``coef @ x + const`` and the cone it must
lie in:

* ``nonneg`` -- every entry >= 0
* ``eq``     -- every entry == 0
* ``soc``    -- entry 0 >= Euclidean norm of the rest
* ``psd``    -- the entries, read column-major as a square matrix, form a
  positive semidefinite matrix

The decision vector stacks ``[Re w; Im w]``, then the free real
parameters of a Hermitian matrix Omega (diagonal, upper real parts, upper
imaginary parts), then auxiliary scalars.  The solver back end is the
primal-dual interior-point cone solver of CVXOPT.
"""
from __future__ import annotations

import io
import time
from dataclasses import dataclass, field

import numpy as np

from .metrics import active_secondary
from .model import ChannelSet, DerivedQuantities, NetworkConfig
from .robust import RobustConstants

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITERS = 200


def lift_complex(v) -> np.ndarray:
    """v -> [Re v; Im v]."""
    v = np.asarray(v, dtype=complex)
    return np.concatenate([v.real, v.imag])


def unlift_complex(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    n = x.shape[0] // 2
    return x[:n] + 1j * x[n:]


def lift_hermitian(m) -> np.ndarray:
    """M -> [[Re M, -Im M], [Im M, Re M]].

    Works for any complex matrix; for Hermitian M the result is symmetric
    and w^H M w = lift(w)^T lift(M) lift(w).
    """
    m = np.asarray(m, dtype=complex)
    return np.block([[m.real, -m.imag], [m.imag, m.real]])


def unlift_hermitian(mh) -> np.ndarray:
    mh = np.asarray(mh, dtype=float)
    n = mh.shape[0] // 2
    return mh[:n, :n] + 1j * mh[n:, :n]


def psd_sqrt(m) -> np.ndarray:
    """Hermitian square root, negative round-off eigenvalues clipped."""
    lam, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.sqrt(np.clip(lam, 0.0, None))) @ v.conj().T


class Layout:
    """Positions of w, Omega and the auxiliary scalars inside x."""

    def __init__(self, n_relays: int, omega: bool = True, n_aux: int = 0):
        self.n = n_relays
        self.omega = omega
        self.n_omega = n_relays * n_relays if omega else 0
        self.omega_start = 2 * n_relays
        self.aux_start = self.omega_start + self.n_omega
        self.n_vars = self.aux_start + n_aux
        n = n_relays
        iu = np.triu_indices(n, 1)
        self._iu = iu
        if omega:
            self._diag = self.omega_start + np.arange(n)
            self._re = self.omega_start + n + np.arange(len(iu[0]))
            self._im = self._re[-1] + 1 + np.arange(len(iu[0])) if len(iu[0]) else self._re

    def zeros(self, rows=None):
        return np.zeros(self.n_vars) if rows is None else np.zeros((rows, self.n_vars))

    def aux(self, k: int) -> int:
        return self.aux_start + k

    def linear_w(self, a):
        """Rows giving Re(a^H w) and Im(a^H w)."""
        a = np.asarray(a, dtype=complex)
        n = self.n
        re, im = self.zeros(), self.zeros()
        re[:n], re[n:2 * n] = a.real, a.imag
        im[:n], im[n:2 * n] = -a.imag, a.real
        return re, im

    def matrix_w(self, m):
        """Rows giving lift(M w) for a complex (k x n) matrix M."""
        m = np.atleast_2d(np.asarray(m, dtype=complex))
        rows = self.zeros(2 * m.shape[0])
        n = self.n
        rows[:, :2 * n] = lift_hermitian(m)
        return rows

    def omega_inner(self, m):
        """Row giving Re tr(M^H Omega) for Hermitian M."""
        m = np.asarray(m, dtype=complex)
        row = self.zeros()
        row[self._diag] = np.real(np.diag(m))
        iu = self._iu
        row[self._re] = 2.0 * m.real[iu]
        row[self._im] = 2.0 * m.imag[iu]
        return row

    def omega_diag(self, j: int) -> int:
        return int(self._diag[j])

    def omega_parts(self):
        """Coefficient tensors for Re Omega and Im Omega, shape (n, n, n_vars)."""
        n = self.n
        re = np.zeros((n, n, self.n_vars))
        im = np.zeros((n, n, self.n_vars))
        re[np.arange(n), np.arange(n), self._diag] = 1.0
        for k, (i, j) in enumerate(zip(*self._iu)):
            re[i, j, self._re[k]] = re[j, i, self._re[k]] = 1.0
            im[i, j, self._im[k]] = 1.0
            im[j, i, self._im[k]] = -1.0
        return re, im

    def omega_from_x(self, x) -> np.ndarray:
        n = self.n
        om = np.zeros((n, n), dtype=complex)
        om[np.arange(n), np.arange(n)] = x[self._diag]
        iu = self._iu
        om[iu] = x[self._re] + 1j * x[self._im]
        om[(iu[1], iu[0])] = x[self._re] - 1j * x[self._im]
        return om


@dataclass
class ConeBlock:
    kind: str
    coef: np.ndarray
    const: np.ndarray
    label: str

    @property
    def dim(self) -> int:
        return self.coef.shape[0]

    def value(self, x):
        return self.coef @ x + self.const

    def violation(self, x) -> float:
        """Absolute constraint violation at x (0 when satisfied)."""
        v = self.value(x)
        if self.kind == "nonneg":
            return float(max(0.0, -v.min())) if v.size else 0.0
        if self.kind == "eq":
            return float(np.abs(v).max()) if v.size else 0.0
        if self.kind == "soc":
            return float(max(0.0, np.linalg.norm(v[1:]) - v[0]))
        if self.kind == "psd":
            m = int(round(np.sqrt(v.size)))
            s = v.reshape(m, m, order="F")
            return float(max(0.0, -np.linalg.eigvalsh(0.5 * (s + s.T)).min()))
        raise ValueError(self.kind)

    def scale(self) -> float:
        return 1.0 + float(np.abs(self.const).max(initial=0.0))


@dataclass
class ConicProblem:
    n_vars: int
    blocks: list
    objective: np.ndarray
    layout: Layout
    gamma: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def linear_constraints(self):
        return [b for b in self.blocks if b.kind in ("nonneg", "eq")]

    @property
    def soc_constraints(self):
        return [b for b in self.blocks if b.kind == "soc"]

    @property
    def psd_constraints(self):
        return [b for b in self.blocks if b.kind == "psd"]

    @property
    def labels(self):
        return [b.label for b in self.blocks]

    def add(self, kind, coef, const, label):
        coef = np.atleast_2d(np.asarray(coef, dtype=float))
        const = np.atleast_1d(np.asarray(const, dtype=float))
        if coef.shape != (const.shape[0], self.n_vars):
            raise ValueError(f"block {label!r}: coef {coef.shape} does not match "
                             f"({const.shape[0]}, {self.n_vars})")
        self.blocks.append(ConeBlock(kind, coef, const, label))

    def max_violation(self, x, relative: bool = True) -> float:
        worst = 0.0
        for b in self.blocks:
            v = b.violation(x)
            if relative:
                v /= b.scale()
            worst = max(worst, v)
        return worst

    def dump(self, fh=None) -> str:
        """Plain-text listing of variables and constraint blocks."""
        out = io.StringIO()
        lay = self.layout
        out.write(f"# conic feasibility problem, gamma = {self.gamma!r}\n")
        out.write(f"variables {self.n_vars}\n")
        out.write(f"  w      [0, {2 * lay.n})  lifted [Re w; Im w]\n")
        if lay.omega:
            out.write(f"  omega  [{lay.omega_start}, {lay.aux_start})  diag, Re upper, Im upper\n")
        if lay.n_vars > lay.aux_start:
            out.write(f"  aux    [{lay.aux_start}, {lay.n_vars})  {self.meta.get('aux', '')}\n")
        out.write("objective " + " ".join(repr(float(c)) for c in self.objective) + "\n")
        for b in self.blocks:
            out.write(f"block {b.kind} {b.dim} {b.label}\n")
            for row, c in zip(b.coef, b.const):
                nz = np.flatnonzero(row)
                terms = " ".join(f"{k}:{row[k]!r}" for k in nz)
                out.write(f"  {c!r} | {terms}\n")
        text = out.getvalue()
        if fh is not None:
            fh.write(text)
        return text


@dataclass
class SolverResult:
    status: str
    x: np.ndarray
    w_lift: np.ndarray
    omega_lift: np.ndarray | None
    residuals: float
    solve_time: float
    solver_status: str = ""
    iterations: int = 0

    @property
    def w(self) -> np.ndarray:
        return unlift_complex(self.w_lift)

    @property
    def omega(self) -> np.ndarray | None:
        return None if self.omega_lift is None else unlift_hermitian(self.omega_lift)


def solve_feasibility(p: ConicProblem, tol: float = DEFAULT_TOL,
                      max_iters: int = DEFAULT_MAX_ITERS) -> SolverResult:
    """Decide feasibility of ``p`` with CVXOPT's cone LP solver.

    ``feasible`` is only reported when the solver converged and the point
    satisfies every block to ``tol`` (violations scaled by 1 + |const|).
    """
    from cvxopt import matrix, solvers

    order = {"nonneg": 0, "soc": 1, "psd": 2}
    ineq = sorted((b for b in p.blocks if b.kind in order), key=lambda b: order[b.kind])
    eqs = [b for b in p.blocks if b.kind == "eq"]
    dims = {"l": sum(b.dim for b in ineq if b.kind == "nonneg"),
            "q": [b.dim for b in ineq if b.kind == "soc"],
            "s": [int(round(np.sqrt(b.dim))) for b in ineq if b.kind == "psd"]}
    G = -np.vstack([b.coef for b in ineq]) if ineq else np.zeros((0, p.n_vars))
    h = np.concatenate([b.const for b in ineq]) if ineq else np.zeros(0)
    kwargs = {}
    if eqs:
        kwargs["A"] = matrix(np.vstack([b.coef for b in eqs]))
        kwargs["b"] = matrix(-np.concatenate([b.const for b in eqs]))
    t0 = time.perf_counter()
    sol = None
    # tight stopping criteria can hit a domain error in the final steps;
    # fall back to the solver defaults and let the residual check decide
    for stop in (min(1e-8, tol), None):
        opts = {"show_progress": False, "maxiters": int(max_iters)}
        if stop is not None:
            opts.update(abstol=stop, reltol=stop, feastol=stop)
        try:
            sol = solvers.conelp(matrix(p.objective), matrix(G), matrix(h), dims,
                                 options=opts, **kwargs)
            break
        except (ValueError, ArithmeticError) as exc:
            err = exc
    if sol is None:
        x = np.zeros(p.n_vars)
        return _result(p, "error", x, np.inf, time.perf_counter() - t0, repr(err), 0)
    elapsed = time.perf_counter() - t0
    raw = sol["status"]
    iters = int(sol.get("iterations", 0) or 0)
    if raw == "primal infeasible":
        x = np.zeros(p.n_vars)
        return _result(p, "infeasible", x, np.inf, elapsed, raw, iters)
    if sol["x"] is None:
        x = np.zeros(p.n_vars)
        return _result(p, "error", x, np.inf, elapsed, raw, iters)
    x = np.array(sol["x"]).ravel()
    res = p.max_violation(x)
    status = "feasible" if raw == "optimal" and res <= tol else "inaccurate"
    return _result(p, status, x, res, elapsed, raw, iters)


def _result(p, status, x, res, elapsed, raw, iters):
    lay = p.layout
    w_lift = x[:2 * lay.n].copy()
    omega_lift = lift_hermitian(lay.omega_from_x(x)) if lay.omega else None
    return SolverResult(status, x, w_lift, omega_lift, float(res), elapsed, raw, iters)


# ---------------------------------------------------------------- builders

def _soc(p, t_row, t_const, u_rows, u_const, label):
    coef = np.vstack([t_row[None, :], u_rows])
    const = np.concatenate([[t_const], u_const])
    p.add("soc", coef, const, label)


def _schur_block(p, lay):
    """[[Omega, w], [w^H, 1]] >= 0, real-lifted to order 2(n+1)."""
    n = lay.n
    re_om, im_om = lay.omega_parts()
    m = n + 1
    re = np.zeros((m, m, lay.n_vars))
    im = np.zeros((m, m, lay.n_vars))
    re[:n, :n] = re_om
    im[:n, :n] = im_om
    for j in range(n):
        re[j, n, j] = re[n, j, j] = 1.0
        im[j, n, n + j] = 1.0
        im[n, j, n + j] = -1.0
    re_c = np.zeros((m, m))
    re_c[n, n] = 1.0
    big = np.zeros((2 * m, 2 * m, lay.n_vars))
    big[:m, :m] = re
    big[m:, m:] = re
    big[:m, m:] = -im
    big[m:, :m] = im
    big_c = np.zeros((2 * m, 2 * m))
    big_c[:m, :m] = re_c
    big_c[m:, m:] = re_c
    # column-major vectorisation
    coef = big.transpose(1, 0, 2).reshape(4 * m * m, lay.n_vars)
    const = big_c.T.reshape(-1)
    p.add("psd", coef, const, "Omega - w w^H >= 0 (Schur complement)")


def _phase_normalization(p, lay, dq):
    re_kw, im_kw = lay.linear_w(dq.k_p1p2)
    p.add("eq", im_kw, [0.0], "Im{k_P1P2^H w} = 0")
    p.add("nonneg", re_kw, [0.0], "Re{k_P1P2^H w} >= 0")
    return re_kw


def _relay_caps(p, lay, power_coef, p_max, with_omega):
    n = lay.n
    for j in range(n):
        u = lay.zeros(2)
        u[0, j] = u[1, n + j] = np.sqrt(power_coef[j])
        _soc(p, lay.zeros(), np.sqrt(p_max[j]), u, np.zeros(2), f"relay cap j={j}")
    if with_omega:
        # implied by Omega = w w^H; keeps the Omega-terms bounded
        rows = lay.zeros(n)
        for j in range(n):
            rows[j, lay.omega_diag(j)] = -power_coef[j]
        p.add("nonneg", rows, p_max, "relay cap on diag(Omega)")


def _product_cone_block(p, lay, beta_row, beta_const, a_rows, label):
    """a^T a <= 1 * beta  as  ||[1 - beta; 2a]|| <= 1 + beta."""
    t_row, t_const = beta_row, 1.0 + beta_const
    u_rows = np.vstack([-beta_row[None, :], 2.0 * a_rows])
    u_const = np.concatenate([[1.0 - beta_const], np.zeros(a_rows.shape[0])])
    _soc(p, t_row, t_const, u_rows, u_const, label)


def _objective(lay, power_coef, p_max):
    c = lay.zeros()
    for j in range(lay.n):
        c[lay.omega_diag(j)] = power_coef[j] / p_max[j]
    return c / lay.n


def build_perfect(dq: DerivedQuantities, config: NetworkConfig, gamma: float) -> ConicProblem:
    """Relaxed feasibility problem at SINR target ``gamma`` with exact CSI.

    Primary constraints are second-order cones in w under the phase
    normalisation k^H w >= 0 real; secondary constraints go through Omega
    >= w w^H.  The objective (normalised relay power carried by Omega)
    only picks a point; feasibility is what matters.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    n = dq.n_relays
    lay = Layout(n, omega=True)
    p = ConicProblem(lay.n_vars, [], _objective(lay, dq.xi_r, config.p_relay_max), lay, gamma,
                     {"mode": "perfect"})
    s2 = config.noise_var
    re_kw = _phase_normalization(p, lay, dq)

    for i in range(2):
        scale = np.sqrt(config.p_primary[1 - i] / gamma)
        u_rows = np.vstack([lay.matrix_w(psd_sqrt(dq.q_p[i])), lay.zeros(1)])
        u_const = np.concatenate([np.zeros(2 * n), [np.sqrt(dq.zeta_p[i] + s2)]])
        _soc(p, scale * re_kw, 0.0, u_rows, u_const, f"primary SINR P{i + 1} >= gamma")

    ks = np.outer(dq.k_s1s2, dq.k_s1s2.conj())
    ks_row = lay.omega_inner(ks)
    active = active_secondary(config)
    for i in range(2):
        if not active[i]:
            continue
        coef = config.mu * config.p_secondary[1 - i] / gamma
        _product_cone_block(p, lay, coef * ks_row, -(dq.zeta_s[i] + s2),
                      lay.matrix_w(psd_sqrt(dq.q_s[i])), f"secondary SINR S{i + 1} (product cone)")
    if active.any():
        p.add("nonneg", ks_row, [0.0], "<k_S k_S^H, Omega> >= 0")

    _relay_caps(p, lay, dq.xi_r, config.p_relay_max, with_omega=True)
    _schur_block(p, lay)
    return p


def _robust_aux_layout(n, n_int, omega):
    # rho_p[2], rho_s[2], varrho_p[2, N_I], varrho_s[2, N_I]
    return Layout(n, omega=omega, n_aux=4 + 4 * n_int)


def _robust_leakage(p, lay, f, h_hat_i, eps_l, p_i, which, i, n_int):
    """Aux cones bounding ||F^H w|| and |w^H F h_l|; returns rows of P_I^{1/2} varpi."""
    n = lay.n
    base = 0 if which == "p" else 2
    rho = lay.aux(base + i)
    vr0 = 4 + (0 if which == "p" else 2 * n_int) + i * n_int
    # ||F^H w|| <= rho   (note ||w^H F|| = ||conj(F) w||)
    t = lay.zeros()
    t[rho] = 1.0
    _soc(p, t, 0.0, lay.matrix_w(np.diag(np.conj(f))), np.zeros(2 * n),
         f"||w^H F_{which.upper()}{i + 1}|| <= rho")
    varpi_rows = lay.zeros(n_int)
    for l in range(n_int):
        var = lay.aux(vr0 + l)
        t = lay.zeros()
        t[var] = 1.0
        # w^H F h = conj((F h)^H w), same modulus
        re, im = lay.linear_w(f * h_hat_i[l])
        _soc(p, t, 0.0, np.vstack([re, im]), np.zeros(2),
             f"|w^H F_{which.upper()}{i + 1} h_I{l + 1}| <= varrho")
        varpi_rows[l, var] = np.sqrt(p_i[l])
        varpi_rows[l, rho] = np.sqrt(p_i[l]) * eps_l[l]
    return varpi_rows


def build_robust(dq_hat: DerivedQuantities, config: NetworkConfig, rc: RobustConstants,
                 estimates: ChannelSet, gamma: float, eps_interferer=None) -> ConicProblem:
    """Relaxed worst-case feasibility problem at target ``gamma``.

    ``eps_interferer`` defaults to ``config.eps_interferer``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    n, n_int = dq_hat.n_relays, estimates.n_interferers
    eps_l = np.asarray(config.eps_interferer if eps_interferer is None else eps_interferer, float)
    lay = _robust_aux_layout(n, n_int, omega=True)
    p = ConicProblem(lay.n_vars, [], _objective(lay, rc.kappa_r, config.p_relay_max), lay, gamma,
                     {"mode": "robust", "aux": "rho_p[2] rho_s[2] varrho_p[2,N_I] varrho_s[2,N_I]"})
    s2 = config.noise_var
    p_i = config.p_interferer
    re_kw = _phase_normalization(p, lay, dq_hat)

    for i in range(2):
        varpi = _robust_leakage(p, lay, estimates.f_p[i], estimates.h_i, eps_l, p_i, "p", i, n_int)
        scale = np.sqrt(config.p_primary[1 - i] / gamma)
        u_rows = np.vstack([varpi, lay.matrix_w(psd_sqrt(dq_hat.t_p[i])), lay.zeros(1)])
        u_const = np.concatenate([np.zeros(n_int + 2 * n), [np.sqrt(rc.kappa_p[i] + s2)]])
        _soc(p, scale * re_kw, 0.0, u_rows, u_const, f"robust primary SINR P{i + 1} >= gamma")

    ks = np.outer(dq_hat.k_s1s2, dq_hat.k_s1s2.conj())
    ks_row = lay.omega_inner(ks)
    active = active_secondary(config)
    for i in range(2):
        if not active[i]:
            continue
        varpi = _robust_leakage(p, lay, estimates.f_s[i], estimates.h_i, eps_l, p_i, "s", i, n_int)
        coef = config.mu * config.p_secondary[1 - i] / gamma
        a_rows = np.vstack([varpi, lay.matrix_w(psd_sqrt(dq_hat.t_s[i]))])
        _product_cone_block(p, lay, coef * ks_row, -(rc.kappa_s[i] + s2), a_rows,
                      f"robust secondary SINR S{i + 1} (product cone)")
    if active.any():
        p.add("nonneg", ks_row, [0.0], "<k_S k_S^H, Omega> >= 0")

    _relay_caps(p, lay, rc.kappa_r, config.p_relay_max, with_omega=True)
    _schur_block(p, lay)
    return p


def build_phase_slice(dq: DerivedQuantities, config: NetworkConfig, gamma: float, phase: float,
                      rc: RobustConstants | None = None, estimates: ChannelSet | None = None,
                      eps_interferer=None) -> ConicProblem:
    """Convex restriction with the phase of k_S1S2^H w pinned to ``phase``.

    With both k^H w terms phase-pinned every SINR constraint is a
    second-order cone in w, so any feasible point satisfies the original
    (unrelaxed) constraints.  The objective maximises a common margin
    ``tau`` on the secondary cones; tau >= 0 means feasible.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    robust = rc is not None
    n = dq.n_relays
    n_int = estimates.n_interferers if robust else 0
    lay = _robust_aux_layout(n, n_int, omega=False) if robust else Layout(n, omega=False)
    lay = Layout(n, omega=False, n_aux=lay.n_vars - 2 * n + 1)
    tau = lay.n_vars - 1
    obj = lay.zeros()
    obj[tau] = -1.0
    p = ConicProblem(lay.n_vars, [], obj, lay, gamma, {"mode": "phase-slice", "phase": phase})
    s2 = config.noise_var
    re_kw = _phase_normalization(p, lay, dq)
    active = active_secondary(config)
    rot = np.exp(1j * phase)
    re_ks, im_ks = lay.linear_w(rot * dq.k_s1s2)  # Re/Im of e^{-j phase} k^H w
    if active.any():
        p.add("eq", im_ks, [0.0], "Im{e^{-j phase} k_S1S2^H w} = 0")
    eps_l = None
    if robust:
        eps_l = np.asarray(config.eps_interferer if eps_interferer is None else eps_interferer, float)

    for i in range(2):
        scale = np.sqrt(config.p_primary[1 - i] / gamma)
        if robust:
            varpi = _robust_leakage(p, lay, estimates.f_p[i], estimates.h_i, eps_l,
                                    config.p_interferer, "p", i, n_int)
            u_rows = np.vstack([varpi, lay.matrix_w(psd_sqrt(dq.t_p[i])), lay.zeros(1)])
            c = rc.kappa_p[i] + s2
            u_const = np.concatenate([np.zeros(n_int + 2 * n), [np.sqrt(c)]])
        else:
            u_rows = np.vstack([lay.matrix_w(psd_sqrt(dq.q_p[i])), lay.zeros(1)])
            u_const = np.concatenate([np.zeros(2 * n), [np.sqrt(dq.zeta_p[i] + s2)]])
        _soc(p, scale * re_kw, 0.0, u_rows, u_const, f"primary SINR P{i + 1} >= gamma")

    for i in range(2):
        if not active[i]:
            continue
        scale = np.sqrt(config.mu * config.p_secondary[1 - i] / gamma)
        if robust:
            varpi = _robust_leakage(p, lay, estimates.f_s[i], estimates.h_i, eps_l,
                                    config.p_interferer, "s", i, n_int)
            u_rows = np.vstack([varpi, lay.matrix_w(psd_sqrt(dq.t_s[i])), lay.zeros(1)])
            u_const = np.concatenate([np.zeros(n_int + 2 * n), [np.sqrt(rc.kappa_s[i] + s2)]])
        else:
            u_rows = np.vstack([lay.matrix_w(psd_sqrt(dq.q_s[i])), lay.zeros(1)])
            u_const = np.concatenate([np.zeros(2 * n), [np.sqrt(dq.zeta_s[i] + s2)]])
        t_row = scale * re_ks
        t_row = t_row.copy()
        t_row[tau] = -1.0
        _soc(p, t_row, 0.0, u_rows, u_const, f"secondary SINR S{i + 1} >= gamma (phase-pinned)")

    power = rc.kappa_r if robust else dq.xi_r
    _relay_caps(p, lay, power, config.p_relay_max, with_omega=False)
    if not active.any():
        # tau is otherwise unbounded
        cap = lay.zeros()
        cap[tau] = -1.0
        p.add("nonneg", cap, [1.0], "tau <= 1")
    return p
