"""End to end: a small sweep showing the d^2/(kn) excess-risk scaling.

Runs in ~20 seconds.  The full acceptance-scale sweeps live in
tests/test_acceptance.py and persist their CSVs under results/.

Run:  python3 demos/04_scaling_experiment.py
"""

import numpy as np

from bitlogit.harness import ExperimentConfig, ThetaSource, run_sweep, write_results

config = ExperimentConfig(
    n_grid=(4000,),
    k_grid=(2, 3, 5, 7),
    d_grid=(6,),
    trials=10,
    seed=20260809,
    theta=ThetaSource(kind="random-ball", radius=1.5),
)

print("Sweeping k with d=6, n=4000, 10 trials per cell ...")
result = run_sweep(config)

print()
print(f"{'k':>4} {'mean excess':>14} {'stderr':>10} {'mean l2':>12}")
for s in result.summaries:
    print(f"{s.k:>4} {s.excess_mean:>14.5e} {s.excess_stderr:>10.1e} "
          f"{s.l2_mean:>12.5e}")

ks = np.array([s.k for s in result.summaries], dtype=float)
means = np.array([s.excess_mean for s in result.summaries])
slope = np.polyfit(np.log(ks), np.log(means), 1)[0]
print()
print(f"fitted log-log slope vs k: {slope:+.3f}   (budget-limited regime: ~ -1)")

out = "demo_sweep.csv"
write_results(result.records, out, result.summaries, config.seed)
print(f"records + per-cell summaries written to {out}")
print("render with the plotting package, e.g.:")
print(f"  bitlogit-plot --csv {out} --x k --y excess_risk --fix n=4000,d=6 "
      "--ref-slope -1 --out demo_sweep.png")
