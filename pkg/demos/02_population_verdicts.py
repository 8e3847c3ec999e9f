"""
Population identifiability
==========================

A reference dictionary is locally identifiable when, for every atom, the dual
norm of its collinearities with the other atoms stays below a threshold that
only depends on the sparsity level. This script walks through verdicts and
phase boundaries for a few Gram families.
"""
import numpy as np

from l1ident.dictionary import constant_mu_gram, minimal_mu_gram
from l1ident.identifiability import (
    phase_boundary_constant_mu,
    phase_boundary_general,
    population_verdict,
)
from l1ident.models import BG, SG

# %%
# Two atoms at inner product 0.7 with sparse Bernoulli(0.2) coefficients.
v = population_verdict(constant_mu_gram(2, 0.7), BG(0.2))
print(v.status.value, "lhs", v.lhs, "rhs", v.rhs, "margin", round(v.margin, 6))

# %%
# Ten atoms at constant inner product 0.5 with eight active atoms per signal.
v = population_verdict(constant_mu_gram(10, 0.5), SG(8))
print(v.status.value, f"{v.lhs:.4f} > {v.rhs:.4f}")

# %%
# Dense coefficients are never identifiable, whatever the Gram matrix.
print(population_verdict(np.eye(4), SG(4)).condition.value)

# %%
# The bounds method only needs sorting and so scales to large K. It may
# return Indeterminate where the exact method decides.
g = constant_mu_gram(40, 0.03)
print("bounds verdict, K=40:", population_verdict(g, BG(0.2), method="bounds").status.value)

# %%
# Critical collinearity per sparsity level. For constant inner products the
# boundary has a closed form; other families are bisected on the exact margin.
# With one active atom per signal the boundary sits at mu = 1 for both.
print(" s   constant-mu   minimal-mu")
for s in range(2, 10):
    const = phase_boundary_constant_mu(10, SG(s))
    minimal = phase_boundary_general(lambda t: minimal_mu_gram(10, t), SG(s), (0.0, 1 - 1e-9))
    print(f"{s:2d}   {const:.6f}      {minimal:.6f}")

# %%
# Larger dictionaries tolerate less collinearity at the same p.
for K in (2, 5, 10, 20):
    print(K, [round(phase_boundary_constant_mu(K, BG(p)), 4) for p in (0.1, 0.3, 0.5, 0.7, 0.9)])
