"""Network parameters, channel state and the quantities derived from them.

Index convention: user index ``i`` is 0 or 1 and ``1 - i`` is the partner
(the transceiver whose message user ``i`` wants to receive).
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np


def _as_float_array(x, n=None, name="value"):
    arr = np.atleast_1d(np.asarray(x, dtype=float)).copy()
    if n is not None:
        if arr.size == 1 and n != 1:
            arr = np.full(n, arr.item())
        if arr.shape != (n,):
            raise ValueError(f"{name} must have length {n}, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class NetworkConfig:
    """Scalar parameters of the network, all powers in linear scale.

    Scalars given for the per-user/per-relay/per-interferer fields are
    broadcast to the right length.
    """

    n_relays: int
    n_interferers: int
    p_primary: np.ndarray = 1.0
    p_secondary: np.ndarray = 1.0
    p_interferer: np.ndarray = 1.0
    noise_var: float = 1.0
    mu: float = 1.0
    p_relay_max: np.ndarray = 1.0
    eps_primary: np.ndarray = 0.0
    eps_secondary: np.ndarray = 0.0
    eps_interferer: np.ndarray = 0.0

    def __post_init__(self):
        nr, ni = int(self.n_relays), int(self.n_interferers)
        if nr < 1:
            raise ValueError("n_relays must be a positive integer")
        if ni < 0:
            raise ValueError("n_interferers must be nonnegative")
        object.__setattr__(self, "n_relays", nr)
        object.__setattr__(self, "n_interferers", ni)
        for name, n in [("p_primary", 2), ("p_secondary", 2), ("p_interferer", ni),
                        ("p_relay_max", nr), ("eps_primary", 2), ("eps_secondary", 2),
                        ("eps_interferer", ni)]:
            object.__setattr__(self, name, _as_float_array(getattr(self, name), n, name))
        object.__setattr__(self, "noise_var", float(self.noise_var))
        object.__setattr__(self, "mu", float(self.mu))

        if np.any(self.p_primary <= 0) or np.any(self.p_relay_max <= 0):
            raise ValueError("primary and relay powers must be positive")
        # a zero secondary power switches the secondary link off
        if np.any(self.p_secondary < 0) or np.any(self.p_interferer < 0):
            raise ValueError("secondary and interferer powers must be nonnegative")
        if not self.noise_var > 0:
            raise ValueError("noise_var must be positive")
        if not self.mu >= 1:
            raise ValueError("mu must be >= 1")
        for name in ("eps_primary", "eps_secondary", "eps_interferer"):
            if np.any(getattr(self, name) < 0):
                raise ValueError(f"{name} must be nonnegative")

    def with_radii(self, eps_primary, eps_secondary, eps_interferer) -> "NetworkConfig":
        return replace(self, eps_primary=eps_primary, eps_secondary=eps_secondary,
                       eps_interferer=eps_interferer)


def _cvec(x, n, name):
    arr = np.asarray(x, dtype=complex)
    if arr.shape != n:
        raise ValueError(f"{name} must have shape {n}, got {arr.shape}")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ChannelSet:
    """Complex channel vectors.

    f_p, f_s : (2, N_r)   primary / secondary transceivers to relays
    h_p, h_s : (2, N_I)   interferers to primary / secondary transceivers
    h_i      : (N_I, N_r) interferer ``l`` to every relay
    """

    f_p: np.ndarray
    f_s: np.ndarray
    h_p: np.ndarray
    h_s: np.ndarray
    h_i: np.ndarray

    def __post_init__(self):
        f_p = np.asarray(self.f_p)
        nr = f_p.shape[-1]
        ni = np.asarray(self.h_p).shape[-1] if np.asarray(self.h_p).ndim == 2 else 0
        object.__setattr__(self, "f_p", _cvec(self.f_p, (2, nr), "f_p"))
        object.__setattr__(self, "f_s", _cvec(self.f_s, (2, nr), "f_s"))
        object.__setattr__(self, "h_p", _cvec(np.reshape(self.h_p, (2, ni)), (2, ni), "h_p"))
        object.__setattr__(self, "h_s", _cvec(np.reshape(self.h_s, (2, ni)), (2, ni), "h_s"))
        object.__setattr__(self, "h_i", _cvec(np.reshape(self.h_i, (ni, nr)), (ni, nr), "h_i"))

    @property
    def n_relays(self) -> int:
        return self.f_p.shape[1]

    @property
    def n_interferers(self) -> int:
        return self.h_i.shape[0]

    def check(self, config: NetworkConfig) -> None:
        if (self.n_relays, self.n_interferers) != (config.n_relays, config.n_interferers):
            raise ValueError(
                f"channel dimensions (N_r={self.n_relays}, N_I={self.n_interferers}) do not "
                f"match config (N_r={config.n_relays}, N_I={config.n_interferers})")

    def with_interferer_channels(self, h_p, h_s, h_i) -> "ChannelSet":
        return ChannelSet(self.f_p, self.f_s, h_p, h_s, h_i)

    def equals(self, other: "ChannelSet") -> bool:
        return all(np.array_equal(getattr(self, k), getattr(other, k))
                   for k in ("f_p", "f_s", "h_p", "h_s", "h_i"))


@dataclass(frozen=True)
class Radii:
    eps_primary: np.ndarray
    eps_secondary: np.ndarray
    eps_interferer: np.ndarray


@dataclass(frozen=True)
class UncertaintyModel:
    """Estimated interferer-side channels with their error radii.

    ``truth`` is only populated in validation runs where the real channel
    is known.
    """

    estimates: ChannelSet
    radii: Radii
    truth: ChannelSet | None = None

    def apply_to(self, config: NetworkConfig) -> NetworkConfig:
        """Config with the eps fields replaced by this model's radii."""
        return config.with_radii(self.radii.eps_primary, self.radii.eps_secondary,
                                 self.radii.eps_interferer)


@dataclass(frozen=True)
class DerivedQuantities:
    """Everything the SINR, power and conic constraints are written in.

    ``k_sp[i, j]`` is F_{S_i} f_{P_j}; the Q matrices include interferer
    leakage through the relays, the T matrices are the same without it.
    ``chi_r`` is ``xi_r`` without the interferer terms.
    """

    k_p1p2: np.ndarray
    k_s1s2: np.ndarray
    k_sp: np.ndarray
    q_p: np.ndarray
    q_s: np.ndarray
    t_p: np.ndarray
    t_s: np.ndarray
    zeta_p: np.ndarray
    zeta_s: np.ndarray
    xi_r: np.ndarray
    chi_r: np.ndarray
    p_i_diag: np.ndarray
    noise_var: float = field(default=1.0)

    @property
    def n_relays(self) -> int:
        return self.k_p1p2.shape[0]


def _herm(m):
    return 0.5 * (m + m.conj().swapaxes(-1, -2))


def _crandn(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def generate_channels(config: NetworkConfig, seed) -> ChannelSet:
    """Draw every channel coefficient i.i.d. CN(0, 1).

    ``seed`` is anything ``numpy.random.default_rng`` accepts.
    """
    rng = np.random.default_rng(seed)
    nr, ni = config.n_relays, config.n_interferers
    f_p = _crandn(rng, (2, nr))
    f_s = _crandn(rng, (2, nr))
    h_p = _crandn(rng, (2, ni))
    h_s = _crandn(rng, (2, ni))
    h_i = _crandn(rng, (ni, nr))
    return ChannelSet(f_p, f_s, h_p, h_s, h_i)


def sample_ball(rng, n, radius, size=None):
    """Uniform samples from the complex ``n``-ball of the given radius."""
    shape = (n,) if size is None else (size, n)
    if n == 0:
        return np.zeros(shape, dtype=complex)
    z = _crandn(rng, shape)
    norms = np.linalg.norm(z, axis=-1, keepdims=True)
    norms[norms == 0] = 1.0
    # real dimension is 2n
    r = radius * rng.random(shape[:-1] + (1,)) ** (1.0 / (2 * n))
    return z / norms * r


def make_uncertainty(truth: ChannelSet, config: NetworkConfig, mode="absolute",
                     rho: float = 0.0, seed=None, max_redraws: int = 10_000) -> UncertaintyModel:
    """Perturb the interferer-side channels of ``truth`` into estimates.

    ``mode="absolute"`` draws each error uniformly from the ball of the
    radius given in ``config``.  ``mode="fractional"`` sets each radius to
    ``rho * ||estimate||``; errors are redrawn until they fit that radius.
    The f-vectors are copied unchanged.
    """
    truth.check(config)
    rng = np.random.default_rng(seed)

    if mode == "fractional":
        if not 0.0 <= rho < 1.0:
            raise ValueError("fractional uncertainty needs 0 <= rho < 1")

        def draw(h):
            nh = np.linalg.norm(h)
            if rho == 0.0 or nh == 0.0:
                return h.copy(), 0.0
            for _ in range(max_redraws):
                dh = sample_ball(rng, h.size, rho * nh / (1.0 - rho))
                est = h - dh
                eps = rho * np.linalg.norm(est)
                if np.linalg.norm(dh) <= eps:
                    return est, eps
            raise RuntimeError("could not draw a consistent fractional error")
    elif mode == "absolute":
        def draw(h, eps):
            return h - sample_ball(rng, h.size, eps), float(eps)
    else:
        raise ValueError(f"unknown uncertainty mode {mode!r}")

    def draw_all(vectors, radii):
        out, eps = [], []
        for k, h in enumerate(vectors):
            e, r = draw(h) if mode == "fractional" else draw(h, radii[k])
            out.append(e)
            eps.append(r)
        return np.array(out, dtype=complex).reshape(vectors.shape), np.array(eps)

    h_p, eps_p = draw_all(truth.h_p, config.eps_primary)
    h_s, eps_s = draw_all(truth.h_s, config.eps_secondary)
    h_i, eps_i = draw_all(truth.h_i, config.eps_interferer)
    estimates = truth.with_interferer_channels(h_p, h_s, h_i)
    return UncertaintyModel(estimates, Radii(eps_p, eps_s, eps_i), truth)


def derive(config: NetworkConfig, channels: ChannelSet) -> DerivedQuantities:
    """Precompute the k-vectors, Q/T matrices and the zeta/xi/chi constants."""
    channels.check(config)
    f_p, f_s, h_p, h_s, h_i = (channels.f_p, channels.f_s, channels.h_p,
                               channels.h_s, channels.h_i)
    pp, ps, pi_, s2 = config.p_primary, config.p_secondary, config.p_interferer, config.noise_var

    k_p1p2 = f_p[0] * f_p[1]
    k_s1s2 = f_s[0] * f_s[1]
    k_sp = f_s[:, None, :] * f_p[None, :, :]

    def outer(v):
        return np.einsum("...i,...j->...ij", v, v.conj())

    # interferer leakage through the relays: sum_l P_l (F h_l)(F h_l)^H
    def leak(f):
        g = f[None, :] * h_i
        return np.einsum("l,li,lj->ij", pi_, g, g.conj()) if len(pi_) else 0.0

    t_p = np.empty((2,) + k_p1p2.shape * 2, dtype=complex)
    t_s = np.empty_like(t_p)
    q_p = np.empty_like(t_p)
    q_s = np.empty_like(t_p)
    for j in range(2):
        t_p[j] = np.einsum("i,iab->ab", ps, outer(k_sp[:, j, :])) + s2 * np.diag(np.abs(f_p[j]) ** 2)
        t_s[j] = np.einsum("i,iab->ab", pp, outer(k_sp[j, :, :])) + s2 * np.diag(np.abs(f_s[j]) ** 2)
        q_p[j] = t_p[j] + leak(f_p[j])
        q_s[j] = t_s[j] + leak(f_s[j])

    zeta_p = np.abs(h_p) ** 2 @ pi_
    zeta_s = np.abs(h_s) ** 2 @ pi_
    chi_r = pp @ np.abs(f_p) ** 2 + ps @ np.abs(f_s) ** 2 + s2
    xi_r = chi_r + pi_ @ np.abs(h_i) ** 2

    return DerivedQuantities(
        k_p1p2=k_p1p2, k_s1s2=k_s1s2, k_sp=k_sp,
        q_p=_herm(q_p), q_s=_herm(q_s), t_p=_herm(t_p), t_s=_herm(t_s),
        zeta_p=np.asarray(zeta_p, dtype=float), zeta_s=np.asarray(zeta_s, dtype=float),
        xi_r=np.asarray(xi_r, dtype=float), chi_r=np.asarray(chi_r, dtype=float),
        p_i_diag=np.diag(pi_), noise_var=s2,
    )
