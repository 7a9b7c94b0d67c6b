"""Worst-case closed forms over norm-bounded interferer channel errors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ChannelSet, DerivedQuantities, NetworkConfig, UncertaintyModel, sample_ball


class DegenerateChannelError(ValueError):
    """Raised when a closed form needs to divide by the norm of a zero vector."""


@dataclass(frozen=True)
class RobustConstants:
    """Worst-case replacements for zeta (kappa_p, kappa_s) and xi (kappa_r)."""

    kappa_p: np.ndarray
    kappa_s: np.ndarray
    kappa_r: np.ndarray


def worst_case_linear(c, a_hat, eps: float):
    """max |c^H (a_hat + b)| over ||b|| <= eps, and the b attaining it."""
    c = np.asarray(c, dtype=complex)
    a_hat = np.asarray(a_hat, dtype=complex)
    if c.shape != a_hat.shape:
        raise ValueError("c and a_hat must have the same length")
    inner = np.vdot(c, a_hat)
    nc = np.linalg.norm(c)
    value = abs(inner) + eps * nc
    if nc == 0.0 or eps == 0.0:
        return float(value), np.zeros_like(c)
    return float(value), (eps / nc) * c * np.exp(1j * np.angle(inner))


def worst_case_scaled(a_hat, eps: float, delta) -> float:
    """The closed form (1 + eps/||a_hat||) ||a_hat^H delta||.

    It is the exact maximum of ||(a_hat + b)^H delta|| over the eps-ball
    when ``delta`` is a multiple of a unitary matrix (equal interferer
    powers, for instance).  For a general ``delta`` it can fall below the
    true maximum; ``worst_case_scaled_bound`` is always an upper bound.
    """
    a_hat = np.asarray(a_hat, dtype=complex)
    delta = np.asarray(delta)
    na = np.linalg.norm(a_hat)
    base = np.linalg.norm(a_hat.conj() @ delta)
    if eps == 0.0:
        return float(base)
    if na == 0.0:
        raise DegenerateChannelError("a_hat is zero; use worst_case_scaled_bound")
    return float((1.0 + eps / na) * base)


def worst_case_scaled_bound(a_hat, eps: float, delta) -> float:
    """||a_hat^H delta|| + eps * sigma_max(delta).

    Upper bound on ||(a_hat + b)^H delta|| for ||b|| <= eps, attained at
    b = eps * u for a top left singular vector u of delta aligned with
    a_hat.  Coincides with ``worst_case_scaled`` for scaled unitary delta
    and reduces to the exact supremum eps * sigma_max when a_hat = 0.
    """
    a_hat = np.asarray(a_hat, dtype=complex)
    delta = np.asarray(delta)
    base = np.linalg.norm(a_hat.conj() @ delta)
    if eps == 0.0 or delta.size == 0:
        return float(base)
    smax = np.linalg.norm(delta, 2)
    return float(base + eps * smax)


def robust_constants(um: UncertaintyModel, config: NetworkConfig,
                     dq_hat: DerivedQuantities) -> RobustConstants:
    """kappa constants from the estimated channels and the error radii."""
    est = um.estimates
    est.check(config)
    r = um.radii
    p_sqrt = np.diag(np.sqrt(config.p_interferer))
    kappa_p = np.array([worst_case_scaled_bound(est.h_p[i], r.eps_primary[i], p_sqrt) ** 2
                        for i in range(2)])
    kappa_s = np.array([worst_case_scaled_bound(est.h_s[i], r.eps_secondary[i], p_sqrt) ** 2
                        for i in range(2)])
    # relay j sees |h_hat_lj| + eps_l in the worst case, for every interferer l
    worst = np.abs(est.h_i) + np.asarray(r.eps_interferer)[:, None]
    kappa_r = config.p_interferer @ worst ** 2 + dq_hat.chi_r
    return RobustConstants(kappa_p, kappa_s, np.asarray(kappa_r, dtype=float))


def sample_uncertainty(um: UncertaintyModel, seed=None) -> ChannelSet:
    """Estimates plus independent uniform-in-ball errors on every interferer vector."""
    rng = np.random.default_rng(seed)
    est, r = um.estimates, um.radii

    def perturb(vectors, radii):
        out = np.array(vectors, dtype=complex, copy=True)
        for k in range(out.shape[0]):
            if radii[k] > 0:
                out[k] = out[k] + sample_ball(rng, out.shape[1], radii[k])
        return out

    return est.with_interferer_channels(perturb(est.h_p, r.eps_primary),
                                        perturb(est.h_s, r.eps_secondary),
                                        perturb(est.h_i, r.eps_interferer))


def worst_case_sinrs(w, dq_hat: DerivedQuantities, rc: RobustConstants, estimates: ChannelSet,
                     config: NetworkConfig, eps_interferer) -> np.ndarray:
    """Closed-form worst-case SINRs (P1, P2, S1, S2) of a fixed w.

    The relay-side interferer leakage is maximised per interferer, the
    direct interference is replaced by kappa.
    """
    w = np.asarray(w, dtype=complex)
    s2 = config.noise_var
    p_i = config.p_interferer
    eps_l = np.asarray(eps_interferer, dtype=float)
    gp = abs(np.vdot(dq_hat.k_p1p2, w)) ** 2
    gs = abs(np.vdot(dq_hat.k_s1s2, w)) ** 2

    def leak(f):
        # w^H F h_l = sum_j conj(w_j) f_j h_lj ;  ||w^H F|| = ||F^H w||
        g = estimates.h_i @ (f * np.conj(w))
        return float(p_i @ (np.abs(g) + eps_l * np.linalg.norm(np.conj(f) * w)) ** 2)

    def quad(m):
        return float(np.real(np.vdot(w, m @ w)))

    out = np.empty(4)
    for i in range(2):
        den_p = leak(estimates.f_p[i]) + quad(dq_hat.t_p[i]) + rc.kappa_p[i] + s2
        den_s = leak(estimates.f_s[i]) + quad(dq_hat.t_s[i]) + rc.kappa_s[i] + s2
        out[i] = config.p_primary[1 - i] * gp / den_p
        out[2 + i] = config.p_secondary[1 - i] * gs / den_s
    return out


def worst_case_relay_powers(w, rc: RobustConstants) -> np.ndarray:
    return rc.kappa_r * np.abs(np.asarray(w, dtype=complex)) ** 2


def perturbation_sinrs(w, dq_hat: DerivedQuantities, estimates: ChannelSet, config: NetworkConfig,
                       radii, n_samples: int = 200, seed=None):
    """SINRs (P1, P2, S1, S2) and relay powers of a fixed w under sampled errors.

    Every interferer-side vector gets an independent uniform error from its
    ball; the relay-side f vectors are exact.  Returns arrays of shape
    (n_samples, 4) and (n_samples, N_r).
    """
    rng = np.random.default_rng(seed)
    w = np.asarray(w, dtype=complex)
    m = int(n_samples)
    eps_p, eps_s, eps_i = (np.asarray(r, dtype=float) for r in radii)

    def perturb(vectors, eps):
        out = np.broadcast_to(vectors, (m,) + vectors.shape).copy()
        for k in range(vectors.shape[0]):
            if eps[k] > 0:
                out[:, k] += sample_ball(rng, vectors.shape[1], eps[k], size=m)
        return out

    h_p = perturb(estimates.h_p, eps_p)
    h_s = perturb(estimates.h_s, eps_s)
    h_i = perturb(estimates.h_i, eps_i)
    p_i, s2 = config.p_interferer, config.noise_var
    gp = abs(np.vdot(dq_hat.k_p1p2, w)) ** 2
    gs = abs(np.vdot(dq_hat.k_s1s2, w)) ** 2

    def quad(mat):
        return float(np.real(np.vdot(w, mat @ w)))

    out = np.empty((m, 4))
    for i in range(2):
        for col, f, t, h, power, gain in ((i, estimates.f_p[i], dq_hat.t_p[i], h_p[:, i],
                                           config.p_primary[1 - i], gp),
                                          (2 + i, estimates.f_s[i], dq_hat.t_s[i], h_s[:, i],
                                           config.p_secondary[1 - i], gs)):
            leak = np.abs(h_i @ (f * np.conj(w))) ** 2 @ p_i
            direct = np.abs(h) ** 2 @ p_i
            out[:, col] = power * gain / (quad(t) + leak + direct + s2)
    xi = dq_hat.chi_r + np.einsum("l,mlj->mj", p_i, np.abs(h_i) ** 2)
    return out, xi * np.abs(w) ** 2
