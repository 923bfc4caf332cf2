"""Numerical rank of the expected information in the over- and underdetermined regimes.

Run: python3 demos/rank_sweep.py
"""

import numpy as np

from pcptensor import fim, numerical_rank
from pcptensor.harness import GenSpec, RankGrid, generate_model, run_rank_sweep

rows = run_rank_sweep(RankGrid(N=(10, 25), P=(2, 3), R=(1, 2, 3, 4)), reps=3, seed=0)
ratios = [row["value"] for row in rows if row["metric"] == "ratio"]
print(f"overdetermined grid: {len(ratios)} models, ratio numerical/conjectured = "
      f"{min(ratios)} .. {max(ratios)}")

# 8x8x8 tensors: the rank grows by 22 per component until it hits 512 entries.
rows = run_rank_sweep(RankGrid(N=(8,), P=(3,), R=tuple(range(20, 29))), reps=1, seed=0)
print("R:    ", [row["R"] for row in rows if row["metric"] == "numerical_rank"])
print("rank: ", [row["value"] for row in rows if row["metric"] == "numerical_rank"])

# Near the transition the smallest true eigenvalue sits close to the cut-off
# lambda_max * 2**-26, so the count depends on the particular model drawn.
counts = {}
for seed in range(30):
    v = numerical_rank(fim(generate_model(GenSpec(8, 3, 23, 4.0, seed=seed))))
    counts[v.numerical_rank] = counts.get(v.numerical_rank, 0) + 1
    gap = v.eigenvalues[-506] / v.eigenvalues[-1]
    if seed < 5:
        print(f"seed {seed}: rank {v.numerical_rank}, 506th eigenvalue / max = {gap:.1e}")
print(f"R=23 over 30 random models: rank counts {dict(sorted(counts.items()))} (threshold ratio {2**-26:.1e})")
