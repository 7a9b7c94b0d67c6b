"""SINR, relay power and rate evaluation for a given beamforming vector.

The analytic path evaluates the closed-form ratios; ``empirical_sinr``
simulates the two-phase exchange symbol by symbol and is used as an
independent check of them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ChannelSet, DerivedQuantities, NetworkConfig

USERS = ("P1", "P2", "S1", "S2")


@dataclass
class BeamformingSolution:
    w: np.ndarray
    gamma: float
    sinr_p: np.ndarray
    sinr_s: np.ndarray
    relay_power: np.ndarray
    rank_one_ok: bool
    iterations: int
    gamma_up: float = 0.0
    status: str = "ok"
    diagnostics: dict = field(default_factory=dict)


def _check_w(w, dq):
    w = np.asarray(w, dtype=complex)
    if w.shape != (dq.n_relays,):
        raise ValueError(f"w must have length {dq.n_relays}, got shape {w.shape}")
    return w


def relay_powers(w, dq: DerivedQuantities) -> np.ndarray:
    """Average transmit power of every relay, xi_j |w_j|^2."""
    w = _check_w(w, dq)
    return dq.xi_r * np.abs(w) ** 2


def _quad(w, m):
    return float(np.real(np.vdot(w, m @ w)))


def sinrs(w, dq: DerivedQuantities, config: NetworkConfig) -> np.ndarray:
    """SINRs of (P1, P2, S1, S2)."""
    w = _check_w(w, dq)
    s2 = config.noise_var
    gp = abs(np.vdot(dq.k_p1p2, w)) ** 2
    gs = abs(np.vdot(dq.k_s1s2, w)) ** 2
    out = np.empty(4)
    for i in range(2):
        out[i] = config.p_primary[1 - i] * gp / (_quad(w, dq.q_p[i]) + dq.zeta_p[i] + s2)
        out[2 + i] = config.p_secondary[1 - i] * gs / (_quad(w, dq.q_s[i]) + dq.zeta_s[i] + s2)
    return out


def sinr(w, dq: DerivedQuantities, user: str, config: NetworkConfig) -> float:
    try:
        idx = USERS.index(user)
    except ValueError:
        raise ValueError(f"user must be one of {USERS}") from None
    return float(sinrs(w, dq, config)[idx])


def active_secondary(config: NetworkConfig) -> np.ndarray:
    """Mask of secondary receivers whose partner actually transmits.

    A secondary receiver with a silent partner has nothing to decode, so
    its SINR is left out of the max-min objective and of every constraint.
    """
    return config.p_secondary[::-1] > 0


def weighted_sinrs(w, dq: DerivedQuantities, config: NetworkConfig) -> np.ndarray:
    """SINR_P1, SINR_P2 and mu*SINR_Si for the active secondaries."""
    s = sinrs(w, dq, config)
    return np.concatenate([s[:2], config.mu * s[2:][active_secondary(config)]])


def objective(w, dq: DerivedQuantities, config: NetworkConfig) -> float:
    """min(SINR_P1, SINR_P2, mu SINR_S1, mu SINR_S2)."""
    return float(weighted_sinrs(w, dq, config).min())


def rate(sinr_value):
    """Achievable rate log2(1 + SINR) in bit/s/Hz."""
    s = np.asarray(sinr_value, dtype=float)
    if np.any(s < 0):
        raise ValueError("SINR must be nonnegative")
    r = np.log2(1.0 + s)
    return float(r) if r.ndim == 0 else r


@dataclass
class EmpiricalResult:
    sinr: np.ndarray
    sinr_stderr: np.ndarray
    relay_power: np.ndarray
    relay_power_stderr: np.ndarray
    n_symbols: int


def _unit_symbols(rng, shape):
    return np.exp(2j * np.pi * rng.random(shape))


def _noise(rng, shape, var):
    return np.sqrt(var / 2.0) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def empirical_sinr(w, channels: ChannelSet, config: NetworkConfig, n_symbols: int = 10**6,
                   seed=None, batch: int = 100_000) -> EmpiricalResult:
    """Monte Carlo estimate of the four SINRs and the relay powers.

    Phase 1: every transceiver and interferer transmits a unit-modulus
    symbol, the relays receive ``r``.  Phase 2: relay ``j`` sends
    ``conj(w_j) r_j``; each transceiver receives it together with fresh
    interferer symbols and noise, then removes its own echo.  The SINR is
    the power of the partner's term over the power of everything left.
    """
    if n_symbols < 1000:
        raise ValueError("n_symbols must be at least 1000")
    channels.check(config)
    w = np.asarray(w, dtype=complex)
    rng = np.random.default_rng(seed)
    nr, ni = config.n_relays, config.n_interferers
    sp, ss, si = np.sqrt(config.p_primary), np.sqrt(config.p_secondary), np.sqrt(config.p_interferer)
    s2 = config.noise_var
    f_p, f_s, h_p, h_s, h_i = (channels.f_p, channels.f_s, channels.h_p, channels.h_s, channels.h_i)
    # receive filters of the four transceivers: y = rx @ t + direct interference
    rx = np.vstack([f_p, f_s])
    h_direct = np.vstack([h_p, h_s])

    # amplitudes of the desired and own-echo terms, per receiver
    def gain(f_rx, f_tx, amp):
        return amp * np.sum(f_rx * np.conj(w) * f_tx)

    desired = np.array([gain(f_p[0], f_p[1], sp[1]), gain(f_p[1], f_p[0], sp[0]),
                        gain(f_s[0], f_s[1], ss[1]), gain(f_s[1], f_s[0], ss[0])])
    own = np.array([gain(f_p[0], f_p[0], sp[0]), gain(f_p[1], f_p[1], sp[1]),
                    gain(f_s[0], f_s[0], ss[0]), gain(f_s[1], f_s[1], ss[1])])

    sum_i = np.zeros(4)
    sum_i2 = np.zeros(4)
    sum_t = np.zeros(nr)
    sum_t2 = np.zeros(nr)
    done = 0
    while done < n_symbols:
        m = min(batch, n_symbols - done)
        x_p = _unit_symbols(rng, (m, 2))
        x_s = _unit_symbols(rng, (m, 2))
        x_i1 = _unit_symbols(rng, (m, ni))
        x_i2 = _unit_symbols(rng, (m, ni))
        r = ((x_p * sp) @ f_p + (x_s * ss) @ f_s + (x_i1 * si) @ h_i
             + _noise(rng, (m, nr), s2))
        t = r * np.conj(w)
        y = t @ rx.T + (x_i2 * si) @ h_direct.T + _noise(rng, (m, 4), s2)
        # own echo removed, partner's term split off
        own_sym = np.hstack([x_p, x_s])
        partner_sym = np.hstack([x_p[:, ::-1], x_s[:, ::-1]])
        v = y - own * own_sym - desired * partner_sym
        pv = np.abs(v) ** 2
        sum_i += pv.sum(axis=0)
        sum_i2 += (pv ** 2).sum(axis=0)
        pt = np.abs(t) ** 2
        sum_t += pt.sum(axis=0)
        sum_t2 += (pt ** 2).sum(axis=0)
        done += m

    n = float(n_symbols)
    mean_i = sum_i / n
    se_i = np.sqrt(np.maximum(sum_i2 / n - mean_i ** 2, 0.0) / (n - 1))
    mean_t = sum_t / n
    se_t = np.sqrt(np.maximum(sum_t2 / n - mean_t ** 2, 0.0) / (n - 1))
    # desired power is exact: unit-modulus symbols
    d = np.abs(desired) ** 2
    est = d / mean_i
    se = est * se_i / mean_i
    return EmpiricalResult(est, se, mean_t, se_t, n_symbols)
