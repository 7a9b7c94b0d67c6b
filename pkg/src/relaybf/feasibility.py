"""Single-constraint feasibility test and the resulting upper bound on gamma."""
from __future__ import annotations

import numpy as np
import scipy.linalg

from .model import DerivedQuantities, NetworkConfig

FEASIBILITY_TOL = 1e-9


def _quad_inv(delta, a):
    """a^H delta^{-1} a via a Cholesky solve; raises if delta is not PD."""
    try:
        c = scipy.linalg.cho_factor(delta, lower=True)
    except np.linalg.LinAlgError:
        raise ValueError("delta is not positive definite") from None
    return float(np.real(np.vdot(a, scipy.linalg.cho_solve(c, a))))


def ratio_target_feasible(delta, a, t: float, tol: float = FEASIBILITY_TOL) -> bool:
    """Whether |x^H a|^2 / (x^H delta x + c) >= t can hold for some x.

    That is the case exactly when a^H delta^{-1} a > t.  The strict
    inequality is taken with a relative margin ``tol``.
    """
    delta = np.asarray(delta, dtype=complex)
    a = np.asarray(a, dtype=complex)
    if t <= 0:
        raise ValueError("t must be positive")
    if np.linalg.eigvalsh(0.5 * (delta + delta.conj().T)).min() <= 1e-10:
        raise ValueError("delta is not positive definite")
    q = _quad_inv(delta, a)
    return q - t > tol * q


def _regularized(q):
    n = q.shape[0]
    ridge = 1e-12 * np.real(np.trace(q)) / n
    if ridge <= 0:
        ridge = 1e-300
    return q + ridge * np.eye(n)


def _bound_term(power, k, q):
    try:
        return power * _quad_inv(q, k)
    except ValueError:
        try:
            return power * _quad_inv(_regularized(q), k)
        except ValueError:
            raise ValueError("Q is singular beyond regularization") from None


def sinr_bounds(dq: DerivedQuantities, config: NetworkConfig) -> np.ndarray:
    """Per-constraint ceilings (P1, P2, mu*S1, mu*S2) on the achievable SINR."""
    out = np.empty(4)
    for i in range(2):
        out[i] = _bound_term(config.p_primary[1 - i], dq.k_p1p2, dq.q_p[i])
        out[2 + i] = config.mu * _bound_term(config.p_secondary[1 - i], dq.k_s1s2, dq.q_s[i])
    return out


def gamma_upper_bound(dq: DerivedQuantities, config: NetworkConfig) -> float:
    """Smallest of the single-constraint ceilings; bisection starts below it.

    Secondary receivers whose partner is silent carry no constraint.
    """
    b = sinr_bounds(dq, config)
    active = np.concatenate([[True, True], config.p_secondary[::-1] > 0])
    return float(b[active].min())


def power_limited_bound(dq: DerivedQuantities, config: NetworkConfig, power_coef=None) -> float:
    """Ceiling on the max-min SINR that accounts for the relay caps.

    With |w_j|^2 <= P_j^max / c_j every |k^H w| is at most
    sum_j |k_j| sqrt(P_j^max / c_j) and every denominator is at least
    zeta + sigma^2.  ``power_coef`` defaults to xi.
    """
    c = dq.xi_r if power_coef is None else np.asarray(power_coef, dtype=float)
    amp = np.sqrt(config.p_relay_max / c)
    s2 = config.noise_var
    gp = (np.abs(dq.k_p1p2) @ amp) ** 2
    gs = (np.abs(dq.k_s1s2) @ amp) ** 2
    vals = [config.p_primary[1 - i] * gp / (dq.zeta_p[i] + s2) for i in range(2)]
    for i in range(2):
        if config.p_secondary[1 - i] > 0:
            vals.append(config.mu * config.p_secondary[1 - i] * gs / (dq.zeta_s[i] + s2))
    return float(min(vals))
