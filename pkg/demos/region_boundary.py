"""
Minimum rate for a binary source under perfect realism
======================================================

Sweeps distortion for a few common-randomness budgets and checks the
optimizer against the grid oracle, the convex program for unlimited
common randomness, and the classical rate-distortion function.
"""
import math

import numpy as np

from rdpcr import Distribution, DistortionMeasure
from rdpcr import region

src = Distribution([0.5, 0.5])
d = DistortionMeasure.hamming(2)
deltas = [0.05, 0.1, 0.2, 0.3, 0.4, 0.5]
budgets = [0.0, 0.25, 1.0, math.inf]

table = np.zeros((len(deltas), len(budgets)))
for a, delta in enumerate(deltas):
    for b, rc in enumerate(budgets):
        table[a, b] = region.min_rate(delta, rc, src, d, aux_size=2, n_starts=4)

print("delta  " + "  ".join(f"rc={rc:<5}" for rc in budgets) + "  classical")
for a, delta in enumerate(deltas):
    row = "  ".join(f"{v:8.4f}" for v in table[a])
    print(f"{delta:<5}  {row}  {region.blahut_arimoto_rd(delta, src, d):8.4f}")

# Unlimited common randomness reduces to a convex problem over P(y|x).
print("\nconvex cross-check at delta=0.2:", region.dp_rdf(0.2, src, d), "vs", table[2, -1])

# The grid oracle enumerates P(u|x) at resolution 1e-3.
print("grid oracle at delta=0.2, rc=0:", region.brute_force_oracle(0.2, 0.0, src, d, 2), "vs", table[2, 0])

# The witness carries the auxiliary channel and the reconstruction channel.
res = region.solve_min_rate(0.2, 0.0, src, d, aux_size=2)
print("\nwitness P(u|x):\n", np.round(res.witness.triple.forward.rows, 4))
print("witness P(y|u):\n", np.round(res.witness.triple.synthesis.rows, 4))
print(res.witness.achieved)
