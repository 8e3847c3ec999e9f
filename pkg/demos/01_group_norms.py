"""
Group norms and their duals
===========================

The identifiability condition is phrased through a family of norms that
average the l2 norms of coordinate subsets. This script evaluates them, the
cheap sandwich bounds on their duals, and the certified dual value.
"""
import numpy as np

from l1ident import norms
from l1ident.norms import Bernoulli, Subset

# %%
# The subset norm interpolates between l1 (k = 1) and l2 (k = m).
w = np.array([3.0, 4.0, 12.0])
for k in (1, 2, 3):
    print(f"|||w|||_{k} = {norms.group_norm(w, Subset(k)):.4f}")
print("l1 =", np.abs(w).sum(), " l2 =", np.linalg.norm(w))

# %%
# The Bernoulli norm is a binomial mixture of the subset norms.
print("Bernoulli(0.5) norm of (3, 4):", norms.group_norm([3, 4], Bernoulli(0.5)))

# %%
# Dual norms have no closed form in general. The bounds are instant, and the
# exact value comes with a primal and a dual witness whose values bracket it.
rng = np.random.default_rng(0)
z = rng.choice([-1.0, 1.0], 7) * rng.uniform(0.5, 1.5, 7)
for param in (Subset(3), Bernoulli(0.3)):
    lo, hi = norms.dual_norm_bounds(z, param)
    cert = norms.dual_norm_exact(z, param)
    print(f"{param}: {lo:.5f} <= {cert.value:.5f} <= {hi:.5f}   gap {cert.gap:.1e}   verified {cert.verify(z, 1e-8)}")

# %%
# Sparse and constant vectors are the equality cases of the sandwich.
print(norms.dual_norm_bounds([0, 0, -2.5, 0], Subset(2)), norms.dual_norm_exact([0, 0, -2.5, 0], Subset(2)).value)
print(norms.dual_norm_bounds(np.full(5, 0.3), Subset(4)), 0.3 * 2)

# %%
# Enumeration grows combinatorially, so the exact solver stops at m = 16
# (subset) and m = 12 (Bernoulli); the bounds keep working beyond that.
try:
    norms.dual_norm_exact(np.ones(20) + np.arange(20), Subset(3))
except Exception as exc:
    print(type(exc).__name__, "->", exc)
print(norms.dual_norm_bounds(np.ones(20) + np.arange(20), Subset(3)))
