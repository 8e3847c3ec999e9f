"""Subset-averaged group norms, their duals, and hypergeometric helpers.

For ``w`` in R^m the subset norm averages the l2 norms of all size-``k``
sub-vectors,

    |||w|||_k = sum_{|S|=k} ||w[S]||_2 / C(m-1, k-1),

and the Bernoulli norm mixes them with binomial weights,

    |||w|||_p = sum_{k=0}^{m-1} pbinom(k; m-1, p) |||w|||_{k+1}.

Both are overlapping group-lasso penalties. Their duals drive the local
identifiability conditions; they are evaluated either by cheap sandwich bounds
or exactly, with a primal/dual certificate, by a consensus ADMM on the
subset-variable cone program.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gammaln
from scipy.stats import binom

from .exceptions import ConvergenceError, InvalidParameterError, SizeCapError

EXACT_SUBSET_MAX_M = 16
EXACT_BERNOULLI_MAX_M = 12
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 200_000


@dataclass(frozen=True)
class Subset:
    """Average over all size-``k`` subsets."""

    k: int

    def validate(self, m):
        if not (isinstance(self.k, (int, np.integer)) and 1 <= self.k <= m):
            raise InvalidParameterError(f"subset size k={self.k} must be an integer in [1, {m}]")


@dataclass(frozen=True)
class Bernoulli:
    """Binomial mixture of subset norms with inclusion probability ``p``."""

    p: float

    def validate(self, m):
        if not (0.0 < self.p < 1.0):
            raise InvalidParameterError(f"Bernoulli parameter p={self.p} must lie in (0, 1)")


GroupNormParam = Subset | Bernoulli


def pbinom(k, n, p):
    """Binomial pmf ``C(n,k) p^k (1-p)^(n-k)`` (log-space internally)."""
    return binom.pmf(k, n, p)


@lru_cache(maxsize=256)
def _combinations(m, k):
    idx = np.array(list(itertools.combinations(range(m), k)), dtype=np.intp)
    idx.setflags(write=False)
    return idx


def _subset_norm_sum(w2, k):
    # sum over |S|=k of ||w[S]||_2, given squared entries w2
    idx = _combinations(w2.size, k)
    return float(np.sqrt(w2[idx].sum(axis=1)).sum())


def subset_norms(w) -> np.ndarray:
    """All subset norms ``[|||w|||_1, ..., |||w|||_m]``."""
    w = np.asarray(w, dtype=float).ravel()
    m = w.size
    w2 = w * w
    return np.array([_subset_norm_sum(w2, k) / math.comb(m - 1, k - 1) for k in range(1, m + 1)])


def group_norm(w, param: GroupNormParam) -> float:
    """Evaluate ``|||w|||_k`` or ``|||w|||_p``.

    Parameters
    ----------
    w : array_like, shape (m,)
    param : Subset or Bernoulli

    Returns
    -------
    float
    """
    w = np.asarray(w, dtype=float).ravel()
    m = w.size
    if m < 1:
        raise InvalidParameterError("group norms need m >= 1")
    param.validate(m)
    if m == 1:
        return float(abs(w[0]))
    if isinstance(param, Subset):
        return _subset_norm_sum(w * w, param.k) / math.comb(m - 1, param.k - 1)
    weights = pbinom(np.arange(m), m - 1, param.p)
    return float(weights @ subset_norms(w))


def _log_comb(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def hypergeom_sqrt_mean(m: int, d: int, k: int) -> float:
    """``E sqrt(L)`` where ``L`` counts ones among ``k`` draws without
    replacement from ``d`` ones and ``m - d`` zeros."""
    if not (m >= 1 and 0 <= d <= m and 0 <= k <= m):
        raise InvalidParameterError(f"need 0 <= d, k <= m with m >= 1; got m={m}, d={d}, k={k}")
    lo, hi = max(0, k + d - m), min(k, d)
    ell = np.arange(lo, hi + 1)
    logp = _log_comb(d, ell) + _log_comb(m - d, k - ell) - _log_comb(m, k)
    return float(np.exp(logp) @ np.sqrt(ell))


def hb(m: int, d: int, a: float) -> float:
    """Piecewise-linear interpolation of ``hypergeom_sqrt_mean(m, d, .)``.

    ``hb(m, d, 0) = 0``; on ``(k-1, k]`` it interpolates linearly between the
    integer nodes ``k-1`` and ``k``.
    """
    if not (0.0 <= a <= m):
        raise InvalidParameterError(f"hb argument a={a} must lie in [0, {m}]")
    if a == 0:
        return 0.0
    k = math.ceil(a)
    lo = hypergeom_sqrt_mean(m, d, k - 1)
    hi = hypergeom_sqrt_mean(m, d, k)
    return lo + (hi - lo) * (a - (k - 1))


def _sandwich_lower(zs, scale, a):
    # scale * max_d (prefix sum of sorted |z|) / hb(m, d, a); 0/0 = 0
    m = zs.size
    prefix = np.cumsum(zs)
    best = 0.0
    for d in range(1, m + 1):
        h = hb(m, d, a)
        if prefix[d - 1] == 0:
            continue
        best = max(best, prefix[d - 1] / h)
    return scale * best


def dual_norm_bounds(z, param: GroupNormParam) -> tuple[float, float]:
    """Lower and upper bounds on the dual norm ``|||z|||^*``.

    The lower bound scans prefix sets of ``|z|`` sorted in decreasing order
    against ``hb``; the upper bound is the largest l2 norm of a sub-vector of
    the appropriate size.

    Returns
    -------
    (lower, upper) : tuple of float
    """
    z = np.asarray(z, dtype=float).ravel()
    m = z.size
    param.validate(m)
    zs = np.sort(np.abs(z))[::-1]
    if isinstance(param, Subset):
        lower = _sandwich_lower(zs, param.k / m, param.k)
        k_up = param.k
    else:
        lower = _sandwich_lower(zs, param.p, param.p * m)
        k_up = math.ceil(param.p * (m - 1) + 1)
    upper = float(np.sqrt(np.sum(zs[:k_up] ** 2)))
    # both are exact on the extreme cases; keep the ordering when rounding bites
    return min(lower, upper), upper


def _bernoulli_constant_value(m, p):
    # m p / sum_{k=0}^{m} pbinom(k; m, p) sqrt(k)
    k = np.arange(m + 1)
    return m * p / float(pbinom(k, m, p) @ np.sqrt(k))


def dual_norm_closed_form_edges(z, param: GroupNormParam):
    """Closed-form dual norm where one is known, else ``None``.

    Covers ``k = 1`` (sup norm), ``k = m`` (l2 norm), vectors with at most one
    nonzero entry, and vectors whose entries share one magnitude.
    """
    z = np.asarray(z, dtype=float).ravel()
    m = z.size
    param.validate(m)
    a = np.abs(z)
    if m == 1 or np.count_nonzero(a) <= 1:
        return float(a.max()) if m else 0.0
    if isinstance(param, Subset):
        if param.k == 1:
            return float(a.max())
        if param.k == m:
            return float(np.linalg.norm(z))
    if np.all(a == a[0]):
        if isinstance(param, Subset):
            return math.sqrt(param.k) * float(a[0])
        return _bernoulli_constant_value(m, param.p) * float(a[0])
    return None


@dataclass
class _Groups:
    mask: np.ndarray  # (G, m) bool membership
    weight: np.ndarray  # (G,) norm weights c_S
    subsets: list = field(repr=False)


@lru_cache(maxsize=64)
def _group_structure(m, param):
    if isinstance(param, Subset):
        subsets = [tuple(S) for S in _combinations(m, param.k)]
        weight = np.full(len(subsets), 1.0 / math.comb(m - 1, param.k - 1))
    else:
        subsets = [S for k in range(1, m + 1) for S in itertools.combinations(range(m), k)]
        sizes = np.array([len(S) for S in subsets])
        weight = pbinom(sizes - 1, m - 1, param.p) / np.array([math.comb(m - 1, s - 1) for s in sizes])
    mask = np.zeros((len(subsets), m), dtype=bool)
    for g, S in enumerate(subsets):
        mask[g, list(S)] = True
    return _Groups(mask, weight, subsets)


@dataclass
class DualCertificate:
    """Certified value of a dual group norm.

    Attributes
    ----------
    value : float
        Midpoint of the certified interval ``[lower, upper]``.
    primal_witness : ndarray
        ``w`` with ``|||w||| = 1``; ``z @ w`` equals ``lower``.
    dual_witness : dict
        Map from subset (tuple of indices) to ``y_S``, with
        ``sum_S c_S E_S^T y_S = z``; ``max_S ||y_S||`` equals ``upper``.
    gap : float
        ``upper - lower``.
    """

    value: float
    primal_witness: np.ndarray
    dual_witness: dict
    gap: float
    lower: float
    upper: float
    param: GroupNormParam
    iterations: int = 0

    def verify(self, z, atol=1e-8):
        """Recheck every certificate invariant against ``z``; returns True or raises."""
        z = np.asarray(z, dtype=float).ravel()
        m = z.size
        nw = group_norm(self.primal_witness, self.param)
        if abs(nw - 1.0) > atol and np.any(z):
            raise AssertionError(f"primal witness norm {nw} != 1")
        g = _group_structure(m, self.param)
        recon = np.zeros(m)
        ymax = 0.0
        for c, S in zip(g.weight, g.subsets):
            y = self.dual_witness.get(S)
            if y is None:
                continue
            recon[list(S)] += c * y
            ymax = max(ymax, float(np.linalg.norm(y)))
        if np.max(np.abs(recon - z)) > atol:
            raise AssertionError("dual witness does not reconstruct z")
        lower = float(z @ self.primal_witness)
        if lower - atol > self.lower or ymax > self.upper + atol:
            raise AssertionError("certificate bounds do not match witnesses")
        if ymax - lower > self.gap + atol:
            raise AssertionError(f"certified gap {ymax - lower} exceeds reported {self.gap}")
        return True


def _check_cap(m, param):
    cap = EXACT_SUBSET_MAX_M if isinstance(param, Subset) else EXACT_BERNOULLI_MAX_M
    if m > cap:
        raise SizeCapError(
            f"exact dual norm enumerates all subsets and is capped at m <= {cap} "
            f"for {type(param).__name__}; got m={m}. Use dual_norm_bounds instead."
        )


def _closed_form_certificate(z, param, g):
    # analytic witnesses for the sparse / constant-magnitude / k in {1, m} cases
    m = z.size
    a = np.abs(z)
    sgn = np.where(z < 0, -1.0, 1.0)
    nnz = np.count_nonzero(a)
    if nnz == 0:
        w = np.zeros(m)
        w[0] = 1.0
        return 0.0, w, {S: np.zeros(len(S)) for S in g.subsets}
    # y_S = z[S] is always feasible because each index has total weight 1
    natural = {S: z[list(S)].copy() for S in g.subsets}
    if nnz == 1 or (isinstance(param, Subset) and param.k == 1):
        i = int(np.argmax(a))
        w = np.zeros(m)
        w[i] = sgn[i]
        return float(a[i]), w, natural
    if isinstance(param, Subset) and param.k == m:
        v = float(np.linalg.norm(z))
        return v, z / v, natural
    if np.all(a == a[0]):
        if isinstance(param, Subset):
            v = math.sqrt(param.k) * a[0]
            w = sgn / group_norm(np.ones(m), param)
            return float(v), w, natural
        v = _bernoulli_constant_value(m, param.p) * a[0]
        w = sgn / group_norm(np.ones(m), param)
        y = {S: sgn[list(S)] * (v / math.sqrt(len(S))) for S in g.subsets}
        return float(v), w, y
    return None


def _project_weighted_group_l1_ball(v, c):
    # project the rows of v onto {U : sum_g c_g ||U_g||_2 <= 1}
    r = np.linalg.norm(v, axis=1)
    if c @ r <= 1.0:
        return v
    ratio = r / c
    order = np.argsort(-ratio)
    tau_all = (np.cumsum((c * r)[order]) - 1.0) / np.cumsum((c * c)[order])
    j = np.nonzero(ratio[order] > tau_all)[0][-1]
    rp = np.maximum(r - tau_all[j] * c, 0.0)
    scale = np.divide(rp, r, out=np.zeros_like(r), where=r > 0)
    return v * scale[:, None]


def _admm_dual(z, g, tol, max_iter, check_every=10, relax=1.6, balance_until=500):
    """Consensus ADMM for ``max z^T w  s.t.  sum_S c_S ||w[S]|| <= 1``.

    Local copies ``U_S = w[S]`` carry the weighted ball constraint, which keeps
    the consensus step well scaled even when the weights ``c_S`` span many
    orders of magnitude. The scaled multipliers converge to ``c_S y_S``.
    Every ``check_every`` iterations both sides are turned into feasible
    witnesses and the best certified interval is kept. The penalty is
    rebalanced only during the first ``balance_until`` iterations; balancing
    for longer makes it oscillate and stalls the tail.
    """
    mask = g.mask
    c = g.weight
    count = mask.sum(axis=0)
    rho = 1.0 / max(float(np.max(np.abs(z))), 1e-300)
    U = np.zeros(mask.shape)
    Lam = np.zeros(mask.shape)
    lo, hi = -np.inf, np.inf
    best_w = None
    best_y = None
    it = 0
    for it in range(1, max_iter + 1):
        w = (z / rho + ((U - Lam) * mask).sum(axis=0)) / count
        W = mask * w
        Wr = relax * W + (1.0 - relax) * U
        U_old = U
        U = _project_weighted_group_l1_ball(Wr + Lam, c)
        Lam += Wr - U
        if it % check_every:
            continue
        nrm = float(c @ np.linalg.norm(W, axis=1))
        if nrm > 0:
            val = float(z @ w) / nrm
            if val > lo:
                lo, best_w = val, w / nrm
        y = rho * Lam / c[:, None]
        candidates = [y]
        if np.isfinite(lo):
            # groups with tiny c_S amplify multiplier noise; clip them first
            r = np.linalg.norm(y, axis=1)
            candidates.append(y * np.minimum(1.0, lo / np.maximum(r, 1e-300))[:, None])
        for cand in candidates:
            # sum_{S ni i} c_S = 1, so spreading the residual restores feasibility
            cand = cand + mask * (z - (cand * c[:, None]).sum(axis=0))
            ymax = float(np.linalg.norm(cand, axis=1).max())
            if ymax < hi:
                hi, best_y = ymax, cand
        if hi - lo <= tol:
            break
        if it > balance_until:
            continue
        # residual balancing keeps both residuals on the same scale
        r_pri = np.linalg.norm(W - U)
        r_dual = rho * np.linalg.norm(((U - U_old) * mask).sum(axis=0))
        if r_pri > 10 * r_dual:
            rho *= 2.0
            Lam /= 2.0
        elif r_dual > 10 * r_pri:
            rho /= 2.0
            Lam *= 2.0
    return lo, hi, best_w, best_y, it


def dual_norm_exact(z, param: GroupNormParam, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                    closed_form: bool = True) -> DualCertificate:
    """Dual norm with a certified duality gap.

    Parameters
    ----------
    z : array_like, shape (m,)
    param : Subset or Bernoulli
    tol : float
        Required gap between the primal and dual witness values.
    max_iter : int
        ADMM iteration cap.
    closed_form : bool
        Use analytic witnesses when a closed form applies. Set False to force
        the iterative solver.

    Raises
    ------
    SizeCapError
        ``m`` exceeds the subset-enumeration cap.
    ConvergenceError
        The gap did not fall below ``tol`` within ``max_iter`` iterations.
    """
    z = np.asarray(z, dtype=float).ravel()
    m = z.size
    param.validate(m)
    _check_cap(m, param)
    g = _group_structure(m, param)
    if closed_form or not np.any(z):
        found = _closed_form_certificate(z, param, g)
        if found is not None:
            v, w, y = found
            return DualCertificate(v, w, y, 0.0, v, v, param, 0)
    lo, hi, w, y, it = _admm_dual(z, g, tol, max_iter)
    if hi - lo > tol:
        raise ConvergenceError(f"dual norm gap {hi - lo:.3e} > tol {tol:.1e} after {it} iterations", hi - lo)
    dual = {S: y[i, g.mask[i]].copy() for i, S in enumerate(g.subsets)}
    return DualCertificate(0.5 * (lo + hi), w, dual, max(hi - lo, 0.0), lo, hi, param, it)


def dual_norm(z, param: GroupNormParam, tol: float = DEFAULT_TOL) -> float:
    """Value of ``dual_norm_exact`` (certified to ``tol``)."""
    return dual_norm_exact(z, param, tol=tol).value
