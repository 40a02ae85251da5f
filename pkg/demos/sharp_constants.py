"""From the maximal operator to its sharp L^p bound.

Run: python3 demos/sharp_constants.py
"""
import numpy as np

from dyadic_bellman import (AtomFunction, ProbTree, bellman2, bellman3, doob_ratio,
                            maximal_operator, sharpness_sequence, solve_extremal_g,
                            vu_functionals)

# A small tree and a function on its leaves.
tree = ProbTree.uniform(2, 2)
phi = AtomFunction(tree, [4, 2, 1, 1])
m = maximal_operator(tree, phi).values
print("phi         ", phi.values)
print("M_T phi     ", m)
print("Doob ratio  ", round(doob_ratio(tree, phi, 2), 4), "(never above 1)")

# The Bellman function bounds int (M_T phi)^p given int phi and int phi^p.
p, f, F = 2, phi.integral(), phi.moment(2)
print(f"\nf = {f}, F = {F}")
print("int (M_T phi)^2 =", float(np.dot(tree.leaf_measure, m ** 2)))
print("bellman2(2, f, F) =", round(bellman2(p, f, F), 6))

# With the extra level L the bound has two regimes.  Below L0 = 2f a
# power-law g attains it exactly.
for L in (f, 1.5 * f, 1.9 * f):
    g = solve_extremal_g(p, f, F, L)
    v, _ = vu_functionals(g, p, L)
    print(f"L = {L:5.3f}: extremal gives {v:.10f}, bound is {bellman3(p, f, F, L):.10f}")

# Above L0 no single function attains it; a sequence approaches it.
seq = sharpness_sequence(2, 1.0, 2.0, 2.5, n_terms=20)
print("\nabove the threshold, target", seq.target)
for t in seq.terms[::4] + [seq.terms[-1]]:
    print(f"  n={t.n:2d}  L_n={t.L_n:.6f}  v={t.v_gn:.8f}  gap={t.rel_gap:.2e}")
