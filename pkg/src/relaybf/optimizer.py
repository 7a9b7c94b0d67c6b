"""Bisection over the common SINR target with verified acceptance.

At every midpoint the phase-pinned restriction that worked last is tried
first, then the relaxed conic problem.  An infeasible relaxation settles
the midpoint.  Otherwise its w-block is accepted when it meets the exact
constraints, and failing that a search over phase-pinned convex
restrictions looks for a point that does.  Only verified points ever
raise the lower end of the interval.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from . import conic
from .feasibility import gamma_upper_bound, power_limited_bound
from .metrics import BeamformingSolution, active_secondary, relay_powers, sinrs
from .model import ChannelSet, DerivedQuantities, NetworkConfig
from .robust import (RobustConstants, perturbation_sinrs, worst_case_relay_powers,
                     worst_case_sinrs)

SINR_SLACK = 1e-6
CAP_SLACK = 1e-8
RANK_ONE_RATIO = 1e-6


@dataclass(frozen=True)
class BisectionConfig:
    """tol_gamma is the absolute interval width at which bisection stops.

    Left as None it becomes ``rel_tol`` times the initial upper end.
    """

    tol_gamma: float | None = None
    max_iters: int = 60
    solver_tol: float = conic.DEFAULT_TOL
    rel_tol: float = 1e-3
    phase_grid: int = 12

    def __post_init__(self):
        if self.tol_gamma is not None and not self.tol_gamma > 0:
            raise ValueError("tol_gamma must be positive")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if not self.solver_tol > 0:
            raise ValueError("solver_tol must be positive")
        if self.phase_grid < 1:
            raise ValueError("phase_grid must be at least 1")

    def tolerance(self, upper: float) -> float:
        return self.tol_gamma if self.tol_gamma is not None else self.rel_tol * upper


@dataclass(frozen=True)
class RobustMode:
    """Worst-case optimisation against the error balls given in the config."""

    constants: RobustConstants
    estimates: ChannelSet
    n_samples: int = 200
    seed: int = 0


def _is_robust(mode) -> bool:
    if isinstance(mode, RobustMode):
        return True
    if mode == "perfect":
        return False
    raise ValueError(f"mode must be 'perfect' or a RobustMode, got {mode!r}")


def _radii(config):
    return config.eps_primary, config.eps_secondary, config.eps_interferer


def _weighted(s, config):
    return np.concatenate([s[:2], config.mu * s[2:][active_secondary(config)]])


def _exact_sinrs(w, dq, config, mode):
    if _is_robust(mode):
        return worst_case_sinrs(w, dq, mode.constants, mode.estimates, config, config.eps_interferer)
    return sinrs(w, dq, config)


def _powers(w, dq, mode):
    if _is_robust(mode):
        return worst_case_relay_powers(w, mode.constants)
    return relay_powers(w, dq)


def post_verify(w, dq: DerivedQuantities, config: NetworkConfig, gamma: float,
                mode="perfect") -> bool:
    """Whether w meets SINR target gamma (mu-weighted for secondaries) and the caps.

    Robust mode checks the closed-form worst case and, in addition, the
    exact SINRs and relay powers under ``mode.n_samples`` sampled errors.
    """
    w = np.asarray(w, dtype=complex)
    target = gamma * (1.0 - SINR_SLACK)
    caps = config.p_relay_max * (1.0 + CAP_SLACK)
    if np.any(_powers(w, dq, mode) > caps):
        return False
    with np.errstate(divide="ignore", invalid="ignore"):
        if np.any(~(_weighted(_exact_sinrs(w, dq, config, mode), config) >= target)):
            return False
    if _is_robust(mode) and mode.n_samples > 0:
        s, p = perturbation_sinrs(w, dq, mode.estimates, config, _radii(config),
                                  mode.n_samples, mode.seed)
        weighted = np.hstack([s[:, :2], config.mu * s[:, 2:][:, active_secondary(config)]])
        if np.any(~(weighted >= target)) or np.any(p > caps):
            return False
    return True


def extract_beamformer(res: conic.SolverResult, dq: DerivedQuantities):
    """w-block of a solver point, rotated so k_P1P2^H w is real and >= 0.

    The flag reports whether Omega is numerically rank one.
    """
    w = res.w
    inner = np.vdot(dq.k_p1p2, w)
    if abs(inner) > 0:
        w = w * np.exp(-1j * np.angle(inner))
    rank_one = False
    omega = res.omega
    if omega is not None:
        lam = np.linalg.eigvalsh(0.5 * (omega + omega.conj().T))
        second = max(lam[-2], 0.0) if lam.size > 1 else 0.0
        rank_one = bool(lam[-1] > 0 and second / lam[-1] <= RANK_ONE_RATIO)
    return w, rank_one


def _fit_caps(w, dq, config, mode):
    """Scale w down onto the caps when round-off puts it marginally outside."""
    p = _powers(w, dq, mode)
    over = np.max(p / config.p_relay_max)
    return w / np.sqrt(over) if over > 1.0 else w


class _PhaseFound(Exception):
    def __init__(self, w, phase):
        self.w, self.phase = w, phase


class _Oracle:
    """Feasibility verdicts at a fixed target, with state carried across targets."""

    def __init__(self, dq, config, mode, bc):
        self.dq, self.config, self.mode, self.bc = dq, config, mode, bc
        self.robust = _is_robust(mode)
        self.phase_best = None
        self._last_margin = -np.inf
        self.verdicts = []
        self.stats = {"relaxed_solves": 0, "slice_solves": 0, "certified_infeasible": 0,
                      "unverified": 0, "inaccurate": 0, "accepted_relaxed": 0, "accepted_phase": 0,
                      "rank_one": 0}

    def _relaxed(self, gamma):
        if self.robust:
            p = conic.build_robust(self.dq, self.config, self.mode.constants,
                                   self.mode.estimates, gamma)
        else:
            p = conic.build_perfect(self.dq, self.config, gamma)
        self.stats["relaxed_solves"] += 1
        return conic.solve_feasibility(p, self.bc.solver_tol)

    def _slice(self, gamma, phase):
        if self.robust:
            p = conic.build_phase_slice(self.dq, self.config, gamma, phase,
                                        self.mode.constants, self.mode.estimates)
        else:
            p = conic.build_phase_slice(self.dq, self.config, gamma, phase)
        self.stats["slice_solves"] += 1
        return conic.solve_feasibility(p, self.bc.solver_tol)

    def _margin(self, gamma, phase):
        res = self._slice(gamma, phase)
        tau = float(res.x[-1]) if res.status == "feasible" else -np.inf
        self._last_margin = tau
        if tau >= 0:
            w, _ = extract_beamformer(res, self.dq)
            w = _fit_caps(w, self.dq, self.config, self.mode)
            if post_verify(w, self.dq, self.config, gamma, self.mode):
                raise _PhaseFound(w, phase)
        return tau

    def _phase_search(self, gamma, w_hint):
        def margin(phase):
            phase = float(np.mod(phase, 2 * np.pi))
            return self._margin(gamma, phase)

        def loss(ph):
            m = margin(ph)
            return -m if np.isfinite(m) else 1e6

        def refine(center):
            half = np.pi / self.bc.phase_grid
            minimize_scalar(loss, method="bounded", bounds=(center - half, center + half),
                            options={"xatol": 5e-3, "maxiter": 10})

        best_phase, best = None, -np.inf
        if self.phase_best is not None:
            best_phase, best = self.phase_best, self._last_margin
        if w_hint is not None and abs(np.vdot(self.dq.k_s1s2, w_hint)) > 0:
            ph = float(np.angle(np.vdot(self.dq.k_s1s2, w_hint)))
            m = margin(ph)
            if m > best:
                best_phase, best = ph, m
        # the margin can be multimodal in the phase and its best mode moves with
        # gamma, so the grid is redone at every target that needs a search
        start = best_phase if best_phase is not None else 0.0
        for k in range(self.bc.phase_grid):
            ph = start + 2 * np.pi * (k + 0.5) / self.bc.phase_grid
            m = margin(ph)
            if m > best:
                best_phase, best = ph, m
        if best_phase is not None and np.isfinite(best):
            refine(best_phase)
        return None

    def __call__(self, gamma):
        """(w, rank_one flag) when a verified point exists at target gamma, else None."""
        w, rank_one, how = self._verdict(gamma)
        self.verdicts.append((gamma, how))
        return None if w is None else (w, rank_one)

    def _verdict(self, gamma):
        if self.phase_best is not None:
            # a verified point of the restriction settles the question cheaply
            try:
                self._margin(gamma, self.phase_best)
            except _PhaseFound as found:
                self.stats["accepted_phase"] += 1
                return found.w, False, "phase"
        res = self._relaxed(gamma)
        if res.status == "infeasible":
            self.stats["certified_infeasible"] += 1
            return None, False, "certified_infeasible"
        if res.status != "feasible":
            self.stats["inaccurate"] += 1
            return None, False, "inaccurate"
        w, rank_one = extract_beamformer(res, self.dq)
        self.stats["rank_one"] += int(rank_one)
        w = _fit_caps(w, self.dq, self.config, self.mode)
        if post_verify(w, self.dq, self.config, gamma, self.mode):
            self.stats["accepted_relaxed"] += 1
            inner = np.vdot(self.dq.k_s1s2, w)
            if abs(inner) > 0:
                self.phase_best = float(np.angle(inner))
            return w, rank_one, "relaxed"
        try:
            self._phase_search(gamma, w)
        except _PhaseFound as found:
            self.phase_best = found.phase
            self.stats["accepted_phase"] += 1
            return found.w, rank_one, "phase"
        self.stats["unverified"] += 1
        return None, rank_one, "unverified"


def _solution(w, gamma, dq, config, mode, rank_one, iterations, gamma_up, status, diag):
    s = _exact_sinrs(w, dq, config, mode)
    return BeamformingSolution(w=w, gamma=float(gamma), sinr_p=s[:2].copy(), sinr_s=s[2:].copy(),
                               relay_power=_powers(w, dq, mode), rank_one_ok=bool(rank_one),
                               iterations=int(iterations), gamma_up=float(gamma_up),
                               status=status, diagnostics=diag)


def bisect(feasible, lower: float, upper: float, tol: float, max_iters: int):
    """Halve [lower, upper] until it is at most ``tol`` wide.

    ``feasible(mid)`` returns a payload for a verified point or None.
    Returns (lower, upper, last payload or None, history) where history
    holds (lower, upper, mid, accepted) per step.
    """
    lo, hi = float(lower), float(upper)
    best = None
    history = []
    while hi - lo > tol and len(history) < max_iters:
        mid = 0.5 * (lo + hi)
        payload = feasible(mid)
        history.append((lo, hi, mid, payload is not None))
        if payload is not None:
            lo, best = mid, payload
        else:
            hi = mid
    return lo, hi, best, history


def optimize(dq: DerivedQuantities, config: NetworkConfig, mode="perfect",
             bc: BisectionConfig | None = None) -> BeamformingSolution:
    """Max-min SINR beamformer by bisection on the common target.

    ``mode`` is ``"perfect"`` or a ``RobustMode``.  The returned gamma is
    the largest target at which a verified point was found; the interval
    starts at [0, min(gamma_up, power-limited ceiling)].
    """
    bc = bc or BisectionConfig()
    robust = _is_robust(mode)
    n = dq.n_relays
    zero = np.zeros(n, dtype=complex)
    gamma_up = gamma_upper_bound(dq, config)
    if not gamma_up > 0:
        return _solution(zero, 0.0, dq, config, mode, False, 0, gamma_up, "degenerate",
                         {"reason": "gamma_up is zero"})
    coef = mode.constants.kappa_r if robust else None
    upper = min(gamma_up, power_limited_bound(dq, config, coef))
    tol = bc.tolerance(upper)
    needed = max(0, math.ceil(math.log2(upper / tol)))
    if bc.max_iters < needed:
        raise ValueError(f"max_iters={bc.max_iters} cannot reach tol_gamma={tol:g} "
                         f"from an interval of width {upper:g} (needs {needed})")

    oracle = _Oracle(dq, config, mode, bc)
    lo, hi, found, history = bisect(oracle, 0.0, upper, tol, bc.max_iters)
    it = len(history)

    diag = {"tol_gamma": tol, "upper_start": upper, "lower": lo, "upper": hi,
            "history": history, "verdicts": oracle.verdicts, **oracle.stats}
    if found is None:
        diag["reason"] = "no verified point at any probed target"
        return _solution(zero, 0.0, dq, config, mode, False, it, gamma_up, "no_feasible_point", diag)
    best_w, best_rank = found
    return _solution(best_w, lo, dq, config, mode, best_rank, it, gamma_up, "ok", diag)
