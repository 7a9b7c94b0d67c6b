"""Max-min SINR with perfect channel knowledge over a small noise sweep.

Prints the mean common SINR target and the mean primary/secondary rates
per noise level.  Run: python demos/perfect_csi_sweep.py [trials]
"""
import sys

import numpy as np

from relaybf import NetworkConfig, derive, generate_channels, optimize
from relaybf.cli import dbm_to_linear
from relaybf.metrics import rate

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 5

print(f"{'noise dBm':>9} {'gamma':>9} {'R_P':>7} {'R_S1':>7} {'R_S2':>7}")
for noise_dbm in (-20, -10, 0, 10, 20):
    cfg = NetworkConfig(n_relays=10, n_interferers=2, p_interferer=dbm_to_linear(-1),
                        noise_var=dbm_to_linear(noise_dbm), mu=3.0, p_relay_max=dbm_to_linear(1))
    rows = []
    for seed in range(trials):
        dq = derive(cfg, generate_channels(cfg, seed))
        sol = optimize(dq, cfg)
        rows.append([sol.gamma, rate(min(sol.sinr_p)), rate(sol.sinr_s[0]), rate(sol.sinr_s[1])])
    m = np.mean(rows, axis=0)
    print(f"{noise_dbm:>9} {m[0]:>9.4f} {m[1]:>7.3f} {m[2]:>7.3f} {m[3]:>7.3f}")
