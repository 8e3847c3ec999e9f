"""
How many signals are enough
===========================

With finitely many signals the population verdict carries over with a
probability that depends on the margin eps and the sample size N.
"""
from l1ident.dictionary import constant_mu_gram
from l1ident.finite_sample import finite_sample_report, p1, p2, p3, required_samples
from l1ident.models import BG, SG

# %%
# The three failure terms. The third one carries a large combinatorial factor
# and dominates until N is in the millions.
for N in (10**4, 10**6, 10**8):
    print(N, p1(0.1, N, 0.2, 10), p2(0.1, N, 0.2, 10), p3(0.1, N, 0.2, 10))

# %%
# Two atoms at inner product 0.7, Bernoulli(0.2) coefficients, margin 0.05.
g = constant_mu_gram(2, 0.7)
for N in (10**5, 2 * 10**7, 5 * 10**7):
    r = finite_sample_report(g, BG(0.2), 0.05, N)
    print(N, r.side.value, f"prob >= {r.prob_lower_bound:.6f}", "vacuous" if r.vacuous else "")

# %%
# Sample size for a 90% guarantee. Halving p roughly doubles it.
g = constant_mu_gram(8, 0.01)
for p in (0.4, 0.2, 0.1):
    n = required_samples(g, BG(p), 0.2, 0.9)
    print(f"p={p}: N={n}  p*N={p * n:.0f}")

# %%
print("SG(2), K=10:", required_samples(constant_mu_gram(10, 0.02), SG(2), 0.25, 0.9))
