"""A reduced version of the pilot-length sweep, small enough to run in a minute.

Full-size sweeps live in the packaged presets (``irsdirect run fig2``); this
one shrinks the trial count so the trend is visible quickly.
"""

import numpy as np

from irsdirect import ExperimentSpec, SystemConfig, emit_csv, run_experiment

spec = ExperimentSpec(
    base=SystemConfig(),
    sweep_variable="T",
    sweep_values=(4, 16, 64),
    schemes=("full_chan_est", "partial_chan_est", "direct_decentral", "random_theta"),
    n_trials=8,
    output_path="demo_sweep.csv",
)
table = run_experiment(spec)

print(f"{'T':>4s} " + " ".join(f"{s:>18s}" for s in table.schemes))
for i, v in enumerate(table.values):
    cells = [f"{m:10.2f} +-{e:5.2f}" for m, e in zip(table.mean[i], table.se[i])]
    print(f"{v:4d} " + " ".join(f"{c:>18s}" for c in cells))

emit_csv(table, spec.output_path)
print(f"\nwrote {spec.output_path}; failed trials: {table.total_failed}")
assert np.all(np.isfinite(table.mean))
