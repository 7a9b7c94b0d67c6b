"""Acceptance suite: one PASS/FAIL line per criterion, at the stated tolerances.

Each test records its verdict through ``acceptance_log.record`` and then
asserts it, so a failing criterion shows up both in the summary and as a
failed test.  The Monte Carlo trends (9-12) take most of the time.
"""
import time

import numpy as np
import pytest

from acceptance_log import record
from oracles import (ball_samples, batch_sinrs, crandn, random_feasible_w,
                     random_pd, random_search, ratio_target_eig_oracle)
from relaybf import cli
from relaybf.feasibility import ratio_target_feasible, sinr_bounds
from relaybf.metrics import empirical_sinr, objective, sinrs
from relaybf.model import NetworkConfig, Radii, UncertaintyModel, derive, generate_channels
from relaybf.optimizer import RobustMode, optimize
from relaybf.robust import (perturbation_sinrs, robust_constants, worst_case_linear,
                            worst_case_scaled, worst_case_scaled_bound)

pytestmark = pytest.mark.slow


def scenario(noise_dbm=-20.0, **kw):
    d = dict(n_relays=10, n_interferers=2, p_primary=1.0, p_secondary=1.0,
             p_interferer=cli.dbm_to_linear(-1.0), noise_var=cli.dbm_to_linear(noise_dbm), mu=3.0,
             p_relay_max=cli.dbm_to_linear(1.0))
    d.update(kw)
    return NetworkConfig(**d)


def db(x):
    return 10 * np.log10(x)


def test_01_ratio_target_oracle():
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    agree = total = 0
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        delta, a = random_pd(rng, n), crandn(rng, n)
        q = np.real(a.conj() @ np.linalg.solve(delta, a))
        t = q * rng.uniform(0.5, 1.5)
        if abs(q - t) <= 1e-8:
            continue
        total += 1
        agree += ratio_target_feasible(delta, a, t) == ratio_target_eig_oracle(delta, a, t)
    dt = time.perf_counter() - t0
    ok = agree == total and dt < 5
    assert record(1, "feasibility test agrees with eigenvalue oracle", ok,
                  f"{agree}/{total} agree, {dt:.2f} s")


def test_02_upper_bound_soundness():
    rng = np.random.default_rng(102)
    t0 = time.perf_counter()
    violations = 0
    for k in range(200):
        c = scenario(noise_dbm=float(rng.uniform(-20, 20)), mu=float(rng.uniform(1, 4)))
        dq = derive(c, generate_channels(c, 20_000 + k))
        W = random_feasible_w(rng, dq.xi_r, c.p_relay_max, 10_000)
        s = batch_sinrs(W, dq, c)
        b = sinr_bounds(dq, c)
        weighted = np.column_stack([s[:, :2], c.mu * s[:, 2:]])
        violations += int(np.sum(weighted > b * (1 + 1e-12)))
    dt = time.perf_counter() - t0
    ok = violations == 0 and dt < 120
    assert record(2, "no SINR exceeds its single-constraint bound", ok,
                  f"{violations} violations over 200 x 1e4 points, {dt:.1f} s")


def test_03_analytic_matches_empirical():
    rng = np.random.default_rng(103)
    t0 = time.perf_counter()
    within = total = 0
    for k in range(50):
        c = scenario(noise_dbm=float(rng.uniform(-20, 10)))
        ch = generate_channels(c, 30_000 + k)
        dq = derive(c, ch)
        w = random_feasible_w(rng, dq.xi_r, c.p_relay_max, 1)[0]
        emp = empirical_sinr(w, ch, c, n_symbols=10**6, seed=k)
        z = np.abs(emp.sinr - sinrs(w, dq, c)) / emp.sinr_stderr
        within += int(np.sum(z <= 3))
        total += z.size
    dt = time.perf_counter() - t0
    frac = within / total
    ok = frac >= 0.95 and dt < 300
    assert record(3, "analytic SINR within 3 SE of symbol-level simulation", ok,
                  f"{within}/{total} = {frac:.3f}, {dt:.1f} s")


def test_04_product_cone_equivalence():
    rng = np.random.default_rng(104)
    t0 = time.perf_counter()
    m = 100_000
    n = rng.integers(1, 7, size=m)
    agree = total = 0
    for size in range(1, 7):
        sel = n == size
        cnt = int(sel.sum())
        a = crandn(rng, (cnt, size))
        quad = np.sum(np.abs(a) ** 2, axis=1)
        # scale alpha * beta around quad so both outcomes are common
        alpha = rng.exponential(1.0, cnt)
        beta = quad * rng.uniform(0.3, 3.0, cnt) / alpha
        keep = np.abs(quad - alpha * beta) >= 1e-12
        lhs = quad <= alpha * beta
        soc = np.sqrt((alpha - beta) ** 2 + 4 * quad) <= alpha + beta
        agree += int(np.sum((lhs == soc)[keep]))
        total += int(keep.sum())
    dt = time.perf_counter() - t0
    ok = agree == total and dt < 10
    assert record(4, "quadratic and cone forms agree", ok, f"{agree}/{total}, {dt:.2f} s")


def test_05_worst_case_closed_forms():
    rng = np.random.default_rng(105)
    lin_ok = scaled_ok = scaled_total = sound_ok = 0
    for _ in range(1000):
        n = int(rng.integers(1, 7))
        c, a, eps = crandn(rng, n), crandn(rng, n), float(rng.uniform(0, 1.5))
        value, b_star = worst_case_linear(c, a, eps)
        b = ball_samples(rng, n, eps, 500)
        sampled = np.abs((a + b) @ c.conj()).max()
        hit = abs(abs(np.vdot(c, a + b_star)) - value) <= 1e-12 * max(1.0, value)
        lin_ok += int(sampled <= value * (1 + 1e-12) and hit and np.linalg.norm(b_star) <= eps + 1e-12)
        delta = crandn(rng, (n, n))
        closed = worst_case_scaled(a, eps, delta)
        sampled = np.linalg.norm((a + b).conj() @ delta, axis=1).max()
        scaled_total += 1
        scaled_ok += int(sampled <= closed * (1 + 1e-12))
        sound_ok += int(sampled <= worst_case_scaled_bound(a, eps, delta) * (1 + 1e-12))
    ok = lin_ok == 1000 and scaled_ok == scaled_total
    assert record(5, "worst-case closed forms tight (linear) and dominant (scaled)", ok,
                  f"linear {lin_ok}/1000, scaled {scaled_ok}/{scaled_total} with general delta"
                  f" (norm bound used by the optimizer: {sound_ok}/{scaled_total})")


def test_06_optimizer_soundness():
    t0 = time.perf_counter()
    c = scenario()
    bad = []
    for k in range(100):
        dq = derive(c, generate_channels(c, 60_000 + k))
        sol = optimize(dq, c)
        tol = sol.diagnostics["tol_gamma"]
        obj_ok = objective(sol.w, dq, c) >= sol.gamma * (1 - 1e-6)
        cap_ok = np.all(dq.xi_r * np.abs(sol.w) ** 2 <= c.p_relay_max * (1 + 1e-8))
        best = random_search(dq, c, np.random.default_rng(k), 10_000)
        if not (sol.status == "ok" and obj_ok and cap_ok and best <= sol.gamma + tol):
            bad.append((k, sol.status, sol.gamma, best))
    dt = time.perf_counter() - t0
    ok = not bad and dt < 1800
    assert record(6, "optimizer output verified and not beaten by random search", ok,
                  f"{100 - len(bad)}/100 ok, {dt / 60:.1f} min" + (f", first bad {bad[0]}" if bad else ""))


RHOS = (0.0, 0.02, 0.05, 0.10, 0.15)


def _robust_sweep(k):
    """Perfect and robust solutions on one instance with fixed estimates, radii scaled by rho."""
    c = scenario()
    est = generate_channels(c, 70_000 + k)
    dq = derive(c, est)
    perfect = optimize(dq, c)
    out = []
    for rho in RHOS:
        radii = Radii(rho * np.linalg.norm(est.h_p, axis=1), rho * np.linalg.norm(est.h_s, axis=1),
                      rho * np.linalg.norm(est.h_i, axis=1))
        um = UncertaintyModel(est, radii)
        cr = um.apply_to(c)
        dq_r = derive(cr, est)
        mode = RobustMode(robust_constants(um, cr, dq_r), est, seed=k)
        out.append((rho, cr, dq_r, optimize(dq_r, cr, mode)))
    return perfect, out, est


@pytest.fixture(scope="module")
def robust_sweeps():
    return [_robust_sweep(k) for k in range(20)]


def test_07_robust_collapse_and_monotone(robust_sweeps):
    collapse = mono = 0
    for perfect, sweep, _ in robust_sweeps:
        tol = perfect.diagnostics["tol_gamma"]
        collapse += int(abs(sweep[0][3].gamma - perfect.gamma) <= 2 * tol)
        g = [s[3].gamma for s in sweep]
        mono += int(all(b <= a + 2 * tol for a, b in zip(g, g[1:])))
    ok = collapse == 20 and mono == 20
    assert record(7, "robust collapses to perfect at zero error and decreases with error", ok,
                  f"collapse {collapse}/20, monotone {mono}/20")


def test_08_robust_certificate(robust_sweeps):
    violations = checked = 0
    for k, (_, sweep, est) in enumerate(robust_sweeps):
        for rho, cr, dq_r, sol in sweep[1:]:
            if sol.gamma <= 0:
                continue
            radii = (cr.eps_primary, cr.eps_secondary, cr.eps_interferer)
            s, p = perturbation_sinrs(sol.w, dq_r, est, cr, radii, 200,
                                      seed=90_000 + k)
            weighted = np.hstack([s[:, :2], cr.mu * s[:, 2:]])
            violations += int(np.sum(weighted < sol.gamma * (1 - 1e-6)))
            violations += int(np.sum(p > cr.p_relay_max * (1 + 1e-8)))
            checked += 1
    ok = violations == 0 and checked > 0
    assert record(8, "robust solutions hold under sampled channel errors", ok,
                  f"{violations} violations, {checked} solutions x 200 samples")


def trend(name, values, trials, seed, base=None, mode="perfect"):
    spec = cli.ExperimentSpec(base=dict(base or {}), sweep_name=name, sweep_values=list(values),
                              trials=trials, seed=seed, mode=mode)
    res = cli.run(spec, cli.resolve_threads(None))
    stats = {}
    for row in res["aggregates"]:
        stats.setdefault(row["sweep_value"], {})[row["trial"]] = row
    return res, stats


def test_09_noise_trend():
    t0 = time.perf_counter()
    noise = [-20.0, -10.0, 0.0, 10.0, 20.0]
    _, st = trend("noise_dbm", noise, 200, 9)
    mean = [st[v]["mean"]["rate_p_min"] for v in noise]
    se = [st[v]["stderr"]["rate_p_min"] for v in noise]
    steps = all(b < a + max(sa, sb) for a, b, sa, sb in zip(mean, mean[1:], se, se[1:]))
    dt = time.perf_counter() - t0
    ok = 1.4 <= mean[0] <= 2.6 and mean[-1] < 0.2 and steps
    assert record(9, "primary rate falls with noise", ok,
                  "mean R_P " + ", ".join(f"{m:.3f}" for m in mean) + f"; {dt / 60:.1f} min")


def test_10_interferer_power_trend():
    _, st = trend("interferer_power_dbm", [-2.0, 1.0], 200, 10, base={"mu": 1.0})
    gap = db(st[-2.0]["mean"]["gamma"] / st[1.0]["mean"]["gamma"])
    ok = 1.2 <= gap <= 3.5
    assert record(10, "stronger interferers cost SINR", ok, f"{gap:.2f} dB")


def test_11_relay_cap_trend():
    _, st = trend("relay_cap_dbm", [-2.0, 2.0], 200, 11)
    gain = db(st[2.0]["mean"]["gamma"] / st[-2.0]["mean"]["gamma"])
    ok = 1.5 <= gain <= 4.5
    assert record(11, "larger relay caps raise SINR", ok, f"{gain:.2f} dB")


def test_12_imperfection_trend():
    pcts = [2.0, 5.0, 10.0, 15.0]
    _, st = trend("imperfection_pct", pcts, 100, 12, base={"noise_dbm": 0.0}, mode="robust")
    g = [st[p]["mean"]["gamma"] for p in pcts]
    mono = all(b <= a for a, b in zip(g, g[1:]))
    loss = db(g[0] / g[2])
    _, st4 = trend("imperfection_pct", [5.0, 15.0], 100, 12,
                   base={"noise_dbm": 0.0, "relay_cap_dbm": 4.0}, mode="robust")
    drop = st4[5.0]["mean"]["rate_p_min"] - st4[15.0]["mean"]["rate_p_min"]
    ok = mono and 0.3 <= loss <= 2.0 and 0.05 <= drop <= 0.5
    assert record(12, "robust SINR and rate fall with CSI error", ok,
                  "mean gamma " + ", ".join(f"{x:.4f}" for x in g)
                  + f"; 2->10% {loss:.2f} dB; rate drop 5->15% at 4 dBm {drop:.3f} bit")


def test_13_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"sweep": {"noise_dbm": [-20, 0]}, "trials": 2, "seed": 13}')
    outs = []
    for fmt in ("csv", "json"):
        a, b = tmp_path / f"a.{fmt}", tmp_path / f"b.{fmt}"
        codes = [cli.main(["run", "--config", str(cfg), "--out", str(p), "--format", fmt])
                 for p in (a, b)]
        outs.append(codes == [0, 0] and a.read_bytes() == b.read_bytes())
    ok = all(outs)
    assert record(13, "identical spec and seed give identical files", ok, f"csv/json {outs}")
