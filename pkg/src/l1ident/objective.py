"""The l1 dictionary-learning objective and projected subgradient descent on
the oblique manifold.

For a complete dictionary the sparse code of ``x`` is ``D^{-1} x``, so the
empirical objective is ``(1/N) sum_i ||D^{-1} x_i||_1``. Its expectation under
the SG/BG laws has a closed form in terms of the group norms of the rows of
``H = D^{-1} D0``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import norms
from .dictionary import Dictionary, dictionary_distance
from .exceptions import InvalidParameterError, RankDeficientError
from .models import SG, SignalBatch, SparsityModel

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


def _mat(d) -> np.ndarray:
    return np.asarray(getattr(d, "entries", d), dtype=float)


def _inverse(d: np.ndarray) -> np.ndarray:
    try:
        w = np.linalg.inv(d)
    except np.linalg.LinAlgError as exc:
        raise RankDeficientError("dictionary is singular") from exc
    if not np.all(np.isfinite(w)):
        raise RankDeficientError("dictionary is singular")
    return w


def population_objective(D, D0, model: SparsityModel) -> float:
    """Expected ``||D^{-1} x||_1`` for ``x = D0 alpha`` with ``alpha`` drawn from ``model``."""
    d, d0 = _mat(D), _mat(D0)
    K = d.shape[0]
    model.validate(K)
    h = _inverse(d) @ d0
    if model.is_dense(K):
        return SQRT_2_OVER_PI * float(np.linalg.norm(h, axis=1).sum())
    if isinstance(model, SG):
        param, frac = norms.Subset(int(model.s)), model.s / K
    else:
        param, frac = norms.Bernoulli(float(model.p)), model.p
    return SQRT_2_OVER_PI * frac * sum(norms.group_norm(row, param) for row in h)


def _codes(d, batch):
    x = batch.signals if isinstance(batch, SignalBatch) else np.asarray(batch, dtype=float)
    w = _inverse(d)
    return w, w @ x.T


def empirical_objective(D, batch: SignalBatch) -> float:
    """``(1/N) sum_i ||D^{-1} x_i||_1``."""
    _, y = _codes(_mat(D), batch)
    return float(np.abs(y).sum() / y.shape[1])


def empirical_subgradient(D, batch: SignalBatch) -> np.ndarray:
    """Euclidean subgradient ``-(1/N) W^T sgn(W X) (W X)^T`` with ``W = D^{-1}``.

    ``sgn(0) = 0``, so at points where some code entry vanishes this picks the
    minimum-norm element along those coordinates.
    """
    w, y = _codes(_mat(D), batch)
    return -(w.T @ (np.sign(y) @ y.T)) / y.shape[1]


def tangent_project(D, G) -> np.ndarray:
    """Remove from each column of ``G`` its component along the matching atom."""
    d = _mat(D)
    return G - d * np.einsum("ik,ik->k", d, G)


@dataclass(frozen=True)
class DescentConfig:
    max_iters: int = 5000
    step0: float = 0.1
    step_decay: str = "inv_sqrt_t"
    stop_tol: float = 1e-8
    singular_guard: float = 1e-8

    def __post_init__(self):
        if self.max_iters < 0 or self.step0 < 0 or self.stop_tol <= 0 or self.singular_guard <= 0:
            raise InvalidParameterError(
                "descent config needs max_iters >= 0, step0 >= 0, stop_tol > 0, singular_guard > 0"
            )
        if self.step_decay != "inv_sqrt_t":
            raise InvalidParameterError(f"unsupported step decay {self.step_decay!r}")


@dataclass
class DescentTrace:
    """Result of ``manifold_descent``.

    ``objective_history`` is the best objective seen up to each iteration
    (entry 0 is the starting point), hence nonincreasing.
    """

    final_D: Dictionary
    final_error: float
    objective_history: list = field(repr=False)
    iterations: int
    converged: bool
    aborted_singular: bool


def manifold_descent(D_init, batch: SignalBatch, cfg: DescentConfig | None = None, D0=None) -> DescentTrace:
    """Projected subgradient descent with column-normalization retraction.

    Parameters
    ----------
    D_init : Dictionary
        Starting point.
    batch : SignalBatch
    cfg : DescentConfig, optional
    D0 : Dictionary, optional
        Reference for ``final_error``; defaults to ``D_init``.

    Returns
    -------
    DescentTrace
        Built from the best iterate by objective value.
    """
    cfg = cfg or DescentConfig()
    d = _mat(D_init).copy()
    d0 = _mat(D0) if D0 is not None else d.copy()
    x = batch.signals.T if isinstance(batch, SignalBatch) else np.asarray(batch, dtype=float).T
    n = x.shape[1]

    # preallocated buffers: sgn(Y) via two comparisons is several times
    # cheaper than np.sign at this size
    pos = np.empty((d.shape[0], n), dtype=bool)
    neg = np.empty_like(pos)
    sgn = np.empty((d.shape[0], n))

    def signs(y):
        np.greater(y, 0.0, out=pos)
        np.less(y, 0.0, out=neg)
        np.subtract(pos.view(np.int8), neg.view(np.int8), out=sgn, casting="unsafe")
        return sgn

    w = _inverse(d)
    y = w @ x
    s = signs(y)
    f = float(np.vdot(s, y)) / n
    best_f, best_d = f, d.copy()
    history = [best_f]
    converged = aborted = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        g = -(w.T @ (s @ y.T)) / n
        g -= d * np.einsum("ik,ik->k", d, g)
        d = d - (cfg.step0 / math.sqrt(it)) * g
        d /= np.linalg.norm(d, axis=0)
        try:
            w = np.linalg.inv(d)
        except np.linalg.LinAlgError:
            aborted = True
            break
        # sigma_min >= 1/||W||_F; fall back to the SVD only near the guard
        if not np.all(np.isfinite(w)) or (
            np.linalg.norm(w) * cfg.singular_guard > 1.0
            and np.linalg.svd(d, compute_uv=False)[-1] < cfg.singular_guard
        ):
            aborted = True
            break
        y = w @ x
        s = signs(y)
        f_new = float(np.vdot(s, y)) / n
        if f_new < best_f:
            best_f, best_d = f_new, d.copy()
        history.append(best_f)
        if abs(f - f_new) <= cfg.stop_tol * max(abs(f), 1e-300):
            converged = True
            break
        f = f_new
    final = Dictionary(best_d / np.linalg.norm(best_d, axis=0))
    return DescentTrace(final, dictionary_distance(final, d0), history, it, converged, aborted)
