"""Worst-case design against interferer CSI errors on one channel draw.

The estimates stay fixed while the error radius grows as a fraction of
each estimated channel's norm.  For every radius the robust beamformer is
checked against 500 sampled channel errors inside the balls.
"""
import numpy as np

from relaybf import NetworkConfig, RobustMode, derive, generate_channels, optimize
from relaybf.cli import dbm_to_linear
from relaybf.model import Radii, UncertaintyModel
from relaybf.robust import perturbation_sinrs, robust_constants

cfg = NetworkConfig(n_relays=10, n_interferers=2, p_interferer=dbm_to_linear(-1),
                    noise_var=dbm_to_linear(-20), mu=3.0, p_relay_max=dbm_to_linear(1))
est = generate_channels(cfg, 7)
print("perfect-CSI gamma:", round(optimize(derive(cfg, est), cfg).gamma, 4))

print(f"{'rho':>5} {'gamma':>8} {'min sampled':>12} {'max power/cap':>14}")
for rho in (0.0, 0.02, 0.05, 0.10, 0.15):
    radii = Radii(*(rho * np.linalg.norm(h, axis=1) for h in (est.h_p, est.h_s, est.h_i)))
    um = UncertaintyModel(est, radii)
    c = um.apply_to(cfg)
    dq = derive(c, est)
    sol = optimize(dq, c, RobustMode(robust_constants(um, c, dq), est))
    s, p = perturbation_sinrs(sol.w, dq, est, c, (c.eps_primary, c.eps_secondary, c.eps_interferer),
                              500, seed=1)
    worst = np.hstack([s[:, :2], c.mu * s[:, 2:]]).min()
    print(f"{rho:>5.2f} {sol.gamma:>8.4f} {worst:>12.4f} {np.max(p / c.p_relay_max):>14.4f}")
