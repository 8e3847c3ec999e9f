"""Finite-sample identifiability guarantees and sample-size inversion."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .dictionary import GramMatrix
from .exceptions import InvalidParameterError
from .identifiability import (
    Method,
    Status,
    Verdict,
    cumulative_coherence,
    lower_functional,
    population_verdict,
    threshold,
)
from .models import BG, SG, SparsityModel

SQRT_HALF_PI = math.sqrt(math.pi / 2.0)
MAX_SAMPLES = 2**62


def _check(eps, N, K):
    if not (0.0 < eps <= 0.5):
        raise InvalidParameterError(f"eps={eps} must lie in (0, 1/2]")
    if N < 1:
        raise InvalidParameterError(f"N={N} must be at least 1")
    if K < 2:
        raise InvalidParameterError(f"K={K} must be at least 2")


def _check_p(p):
    if not (0.0 < p <= 1.0):
        raise InvalidParameterError(f"p={p} must lie in (0, 1]")


def log_p1(eps, N, mu, K):
    _check(eps, N, K)
    if mu < 0:
        raise InvalidParameterError(f"mu={mu} must be nonnegative")
    if mu == 0:
        return -math.inf
    return math.log(2.0) - N * eps**2 / (108.0 * K * mu)


def log_p2(eps, N, p, K):
    _check(eps, N, K)
    _check_p(p)
    return math.log(2.0) - p * N * eps**2 / (18.0 * p**2 * K + 9.0 * math.sqrt(2.0 * p * K))


def log_p3(eps, N, p, K):
    _check(eps, N, K)
    _check_p(p)
    return math.log(3.0) + K * math.log1p(24.0 / (eps * p)) - p * N * eps**2 / 360.0


def p1(eps, N, mu, K):
    """``2 exp(-N eps^2 / (108 K mu))``; zero when ``mu = 0``."""
    return math.exp(log_p1(eps, N, mu, K))


def p2(eps, N, p, K):
    """``2 exp(-p N eps^2 / (18 p^2 K + 9 sqrt(2 p K)))``."""
    return math.exp(log_p2(eps, N, p, K))


def p3(eps, N, p, K):
    """``3 (24/(eps p) + 1)^K exp(-p N eps^2 / 360)``; overflows to ``inf`` for tiny N."""
    try:
        return math.exp(log_p3(eps, N, p, K))
    except OverflowError:
        return math.inf


class Side(str, enum.Enum):
    SUFFICIENT_HOLDS = "SufficientHolds"
    NECESSARY_HOLDS = "NecessaryHolds"
    NEITHER_MARGIN_MET = "NeitherMarginMet"


@dataclass(frozen=True)
class FiniteSampleReport:
    """Finite-sample statement for ``N`` signals at margin parameter ``epsilon``.

    ``prob_lower_bound`` is the guaranteed probability of the claim on
    ``side`` (identifiable for SufficientHolds, not identifiable for
    NecessaryHolds). ``vacuous`` marks bounds that are at or below zero before
    clamping. NeitherMarginMet makes no claim and reports 0.
    """

    verdict: Verdict
    epsilon: float
    N: int
    prob_lower_bound: float
    side: Side
    vacuous: bool


def _failure_logs(M0: GramMatrix, model: SparsityModel, eps, N):
    K = M0.K
    mu1 = cumulative_coherence(M0, 1)
    if isinstance(model, SG):
        frac = model.s / K
        terms = [log_p1(eps, N, mu1, K), log_p2(eps, N, frac, K), log_p3(eps, N, frac, K)]
    else:
        kp = K + 2.0 / model.p
        terms = [log_p1(eps, N, mu1, kp), log_p2(eps, N, model.p, kp), log_p3(eps, N, model.p, K)]
    return float(logsumexp(terms))


def _side(M0, model, eps, method):
    K = M0.K
    band = SQRT_HALF_PI * eps
    rhs = threshold(model, K)
    if method is Method.EXACT:
        v = population_verdict(M0, model, Method.EXACT)
        lo, hi = v.lhs_bounds
        sufficient, necessary = hi <= rhs - band, lo >= rhs + band
        return v, sufficient, necessary
    if isinstance(model, SG):
        upper = cumulative_coherence(M0, model.s)
        lower = model.s / (K - 1) * lower_functional(M0, model.s)
    else:
        # the finite-sample corollary uses ceil(p(K-1)+1), capped at the column length
        upper = cumulative_coherence(M0, min(math.ceil(model.p * (K - 1) + 1), K - 1))
        lower = model.p * lower_functional(M0, model.p * (K - 1))
    v = population_verdict(M0, model, Method.BOUNDS)
    return v, upper <= rhs - band, lower >= rhs + band


def finite_sample_report(M0, model: SparsityModel, eps: float, N: int,
                         method: Method | str = Method.EXACT) -> FiniteSampleReport:
    """Probability that ``N`` signals preserve the population verdict.

    Parameters
    ----------
    M0 : GramMatrix or array_like
    model : SG with s < K, or BG with p < 1
    eps : float in (0, 1/2]
    N : int
    method : {"exact", "bounds"}
    """
    g = M0 if isinstance(M0, GramMatrix) else GramMatrix(M0)
    K = g.K
    _check(eps, N, K)
    model.validate(K)
    if model.is_dense(K):
        raise InvalidParameterError("finite-sample guarantees need a sparse model (s < K or p < 1)")
    verdict, sufficient, necessary = _side(g, model, eps, Method(method))
    if not (sufficient or necessary):
        return FiniteSampleReport(verdict, eps, int(N), 0.0, Side.NEITHER_MARGIN_MET, True)
    log_fail = _failure_logs(g, model, eps, N) + (2.0 if sufficient else 1.0) * math.log(K)
    vacuous = log_fail >= 0.0
    prob = 0.0 if vacuous else -math.expm1(log_fail)
    side = Side.SUFFICIENT_HOLDS if sufficient else Side.NECESSARY_HOLDS
    return FiniteSampleReport(verdict, eps, int(N), float(np.clip(prob, 0.0, 1.0)), side, vacuous)


def required_samples(M0, model: SparsityModel, eps: float, target_prob: float,
                     method: Method | str = Method.EXACT) -> int:
    """Smallest ``N`` whose finite-sample bound reaches ``target_prob``.

    Raises
    ------
    InvalidParameterError
        Neither margin condition holds at this ``eps``, so no ``N`` suffices.
    """
    if not (0.0 < target_prob < 1.0):
        raise InvalidParameterError(f"target probability {target_prob} must lie in (0, 1)")

    def prob(n):
        return finite_sample_report(M0, model, eps, n, method)

    first = prob(1)
    if first.side is Side.NEITHER_MARGIN_MET:
        raise InvalidParameterError(
            f"neither margin condition holds at eps={eps} "
            f"(population lhs={first.verdict.lhs:.6g}, rhs={first.verdict.rhs:.6g}); no sample size suffices"
        )
    if first.prob_lower_bound >= target_prob:
        return 1
    lo, hi = 1, 2
    while prob(hi).prob_lower_bound < target_prob:
        lo, hi = hi, hi * 2
        if hi > MAX_SAMPLES:
            raise InvalidParameterError("target probability unreachable within 2^62 samples")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if prob(mid).prob_lower_bound >= target_prob:
            hi = mid
        else:
            lo = mid
    return hi


__all__ = [
    "FiniteSampleReport",
    "Side",
    "Status",
    "finite_sample_report",
    "log_p1",
    "log_p2",
    "log_p3",
    "p1",
    "p2",
    "p3",
    "required_samples",
]
