"""Tree functionals versus their one-dimensional Hardy-average integrals.

Run: python3 demos/symmetrization_sweep.py
"""
import numpy as np

from dyadic_bellman import (FunctionalSpec, Identity, Power, PowerOfMax, ProbTree,
                            StepFunction, brute_force_sup, build_extremizer,
                            decreasing_rearrangement, lhs_functional, rhs_integral)
from dyadic_bellman.symmetrize import extremizer_sweep

g = StepFunction([0.5, 0.5], [2.0, 1.0])
spec = FunctionalSpec(Power(2))
print("right side for g = 2, 1 on halves:", rhs_integral(g, spec))

# Every placement of g's values on a fixed tree stays below the right side.
g8 = StepFunction(np.full(8, 1 / 8), [9, 7, 6, 4, 3, 2, 1.5, 1])
best, where = brute_force_sup(g8, ProbTree.uniform(2, 3), spec)
print(f"\n8 atoms, binary tree: best placement {where}")
print(f"  value {best:.6f} <= {rhs_integral(g8, spec):.6f}")

# Chain trees with smaller splitting parameter close the gap.
for name, sp in [("t^2", spec),
                 ("max(t,1.6)^2", FunctionalSpec(PowerOfMax(2, 1.6))),
                 ("max(t,1.6)*g", FunctionalSpec(PowerOfMax(1, 1.6), Identity()))]:
    print(f"\n{name}")
    for r in extremizer_sweep(g, sp, [0.2, 0.1, 0.05, 0.01]):
        print(f"  a={r.a:<5} levels={r.levels:5d}  lower={r.lower_bound:.6f}  "
              f"rhs={r.rhs:.6f}  gap={r.rel_gap:.4f}")

# The chain tree's own functional value sits between the bound and the integral.
ext, phi = build_extremizer(g, 0.1, 134)
print("\nchain tree with a=0.1:", ext.tree)
print("  functional on the tree:", lhs_functional(ext.tree, phi, spec))
print("  integral of its rearrangement:",
      rhs_integral(decreasing_rearrangement(phi), spec))
