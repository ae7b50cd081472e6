"""Record one uplink training sweep and rebuild receptions for arbitrary IRS weights.

The BTS only ever sees N+1 received blocks, one per codebook epoch.  From
those it recovers the direct-only block and one block per IRS element, and
from there the block any phase vector would have produced.  This script
checks that against a fresh noiseless simulation.
"""

import numpy as np

from irsdirect import SystemConfig, build_codebook, draw_realization, gen_pilots
from irsdirect import reconstruct_canonical, simulate_ul_training, synthesize_yw

cfg = SystemConfig(n_irs=8, pilot_len=16)
real = draw_realization(cfg, 7)
pilots = gen_pilots(cfg, 7)
g = np.ones((cfg.num_users, 1))

cb = build_codebook(cfg.n_irs, "dft")
print(f"codebook: {cb.thetas.shape[0]} epochs for {cfg.n_irs} elements")

# noiseless sweep at cell 0
rec = simulate_ul_training(real, cb, pilots, g, 0, 0, 0.0)
y0, y_can = reconstruct_canonical(rec.epochs, cb)

rng = np.random.default_rng(1)
for trial in range(3):
    w = np.exp(2j * np.pi * rng.random(cfg.n_irs))
    y_w = synthesize_yw(y0, y_can, w)
    probe = build_codebook(cfg.n_irs, "dft")
    probe.thetas[0] = w  # replay the sweep with w as the first epoch
    truth = simulate_ul_training(real, probe, pilots, g, 0, 0, 0.0).epochs[0]
    err = np.max(np.abs(y_w - truth)) / np.max(np.abs(truth))
    print(f"random phases #{trial}: relative reconstruction error {err:.1e}")
