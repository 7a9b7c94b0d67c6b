"""How each bisection step was settled on a few channel draws.

The relaxed conic problem either certifies infeasibility, hands back a
beamformer that passes the exact checks, or leaves the step to the
phase-restricted search.  This tallies the outcomes and the rank of the
relaxed matrix variable.
"""
from collections import Counter

from relaybf import NetworkConfig, derive, generate_channels, optimize
from relaybf.cli import dbm_to_linear

cfg = NetworkConfig(n_relays=10, n_interferers=2, p_interferer=dbm_to_linear(-1),
                    noise_var=dbm_to_linear(-20), mu=3.0, p_relay_max=dbm_to_linear(1))
total = Counter()
for seed in range(5):
    sol = optimize(derive(cfg, generate_channels(cfg, seed)), cfg)
    d = sol.diagnostics
    verdicts = Counter(how for _, how in d["verdicts"])
    total.update(verdicts)
    print(f"seed {seed}: gamma={sol.gamma:.4f} upper start={d['upper_start']:.3f} "
          f"gamma_up={sol.gamma_up:.1f} steps={sol.iterations} rank-one relaxed={d['rank_one']} "
          f"{dict(verdicts)}")
print("all draws:", dict(total))
