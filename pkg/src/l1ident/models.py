"""Sparse coefficient laws and noiseless signal generation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dictionary import Dictionary
from .exceptions import InvalidParameterError


@dataclass(frozen=True)
class SG:
    """``s``-sparse Gaussian: a uniform size-``s`` support with N(0, 1) values."""

    s: int

    def validate(self, K: int) -> None:
        if not (isinstance(self.s, (int, np.integer)) and 1 <= self.s <= K):
            raise InvalidParameterError(f"SG sparsity s={self.s} must be an integer in [1, {K}]")

    def is_dense(self, K: int) -> bool:
        return self.s == K

    def fraction(self, K: int) -> float:
        return self.s / K

    def __str__(self):
        return f"sg:{self.s}"


@dataclass(frozen=True)
class BG:
    """Bernoulli(``p``)-Gaussian: each entry is N(0, 1) with probability ``p``, else 0."""

    p: float

    def validate(self, K: int) -> None:
        if not (0.0 < self.p <= 1.0):
            raise InvalidParameterError(f"BG probability p={self.p} must lie in (0, 1]")

    def is_dense(self, K: int) -> bool:
        return self.p == 1.0

    def fraction(self, K: int) -> float:
        return float(self.p)

    def __str__(self):
        return f"bg:{self.p:g}"


SparsityModel = SG | BG


def parse_model(text: str) -> SparsityModel:
    """Parse ``sg:<s>`` or ``bg:<p>``."""
    kind, _, value = text.strip().lower().partition(":")
    try:
        if kind == "sg":
            return SG(int(value))
        if kind == "bg":
            return BG(float(value))
    except ValueError as exc:
        raise InvalidParameterError(f"cannot parse model parameter in {text!r}") from exc
    raise InvalidParameterError(f"model must be sg:<s> or bg:<p>, got {text!r}")


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _uniform_supports(rng, n, K, s):
    # vectorized partial Fisher-Yates: the first s slots of each row
    perm = np.tile(np.arange(K), (n, 1))
    rows = np.arange(n)
    for i in range(s):
        j = i + rng.integers(0, K - i, size=n)
        tmp = perm[rows, i].copy()
        perm[rows, i] = perm[rows, j]
        perm[rows, j] = tmp
    return perm[:, :s]


def sample_coefficients(K: int, model: SparsityModel, n: int, seed) -> np.ndarray:
    """Draw ``n`` coefficient vectors (rows) from ``model``.

    Parameters
    ----------
    K : int
        Ambient dimension.
    model : SG or BG
    n : int
        Number of rows.
    seed : int, SeedSequence or numpy Generator

    Returns
    -------
    ndarray, shape (n, K)
    """
    if K < 1 or n < 1:
        raise InvalidParameterError(f"need K >= 1 and n >= 1, got K={K}, n={n}")
    model.validate(K)
    rng = _rng(seed)
    if isinstance(model, SG):
        support = _uniform_supports(rng, n, K, model.s)
        alpha = np.zeros((n, K))
        alpha[np.arange(n)[:, None], support] = rng.standard_normal((n, model.s))
        return alpha
    mask = rng.random((n, K)) < model.p
    return np.where(mask, rng.standard_normal((n, K)), 0.0)


@dataclass(frozen=True)
class SignalBatch:
    """``N`` noiseless signals ``x_i = D0 alpha_i``, stored as rows."""

    signals: np.ndarray
    model: SparsityModel
    seed: int | None = None

    def __post_init__(self):
        x = np.array(self.signals, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1:
            raise InvalidParameterError(f"signals must be an N x K matrix with N >= 1, got {x.shape}")
        x.setflags(write=False)
        object.__setattr__(self, "signals", x)

    @property
    def N(self) -> int:
        return self.signals.shape[0]

    @property
    def K(self) -> int:
        return self.signals.shape[1]


def generate_signals(D0: Dictionary, model: SparsityModel, n: int, seed) -> SignalBatch:
    """Sample coefficients and map them through ``D0``."""
    d = D0.entries if isinstance(D0, Dictionary) else Dictionary(D0).entries
    alpha = sample_coefficients(d.shape[0], model, n, seed)
    return SignalBatch(alpha @ d.T, model, seed if isinstance(seed, (int, np.integer)) else None)
