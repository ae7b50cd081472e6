"""Run every scheme on one shared channel/noise draw and compare rates.

All schemes of a trial see the same realization, pilots and noise, so the
differences below come from the schemes alone.
"""

import time

from irsdirect import SCHEMES, SystemConfig, run_scheme
from irsdirect.schemes import prepare_trial

cfg = SystemConfig(pilot_len=64)
data = prepare_trial(cfg, 3)

print(f"{'scheme':18s} {'DL sum':>8s} {'UL sum':>8s} {'training':>9s} {'secs':>6s}")
for s in SCHEMES:
    t0 = time.perf_counter()
    res = run_scheme(s, None, cfg, None, data=data)
    dt = time.perf_counter() - t0
    print(f"{s:18s} {res.dl_sum_rate:8.2f} {res.ul_sum_rate:8.2f} "
          f"{res.training_symbols_used:9d} {dt:6.2f}")

# the MIMO variant adds bidirectional feedback rounds for the direct schemes
mimo = cfg.replace(ue_antennas=2, pilot_len=32)
data = prepare_trial(mimo, 3)
print("\nNT = 2, T = 32")
for s in ("perfect_csi", "partial_chan_est", "direct_decentral"):
    res = run_scheme(s, None, mimo, None, data=data)
    print(f"{s:18s} DL sum {res.dl_sum_rate:6.2f}  training {res.training_symbols_used}")
