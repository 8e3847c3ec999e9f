"""Complete dictionaries on the oblique manifold and their Gram matrices.

A dictionary is a square matrix with unit-norm columns (atoms). Everything the
identifiability conditions need is carried by the Gram matrix ``D.T @ D``, so
the constructors here work from a target Gram and factor it when an explicit
dictionary is required.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import InvalidParameterError, RankDeficientError

UNIT_NORM_TOL = 1e-12
PSD_TOL = 1e-10
RANK_RTOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _check_full_rank(a, what="dictionary"):
    sv = np.linalg.svd(a, compute_uv=False)
    if sv.size == 0 or sv[-1] <= RANK_RTOL * sv[0]:
        raise RankDeficientError(
            f"{what} is rank deficient (sigma_min/sigma_max = "
            f"{(sv[-1] / sv[0]) if sv.size and sv[0] > 0 else 0.0:.3e}); "
            "complete dictionaries must be full rank"
        )


@dataclass(frozen=True)
class Dictionary:
    """Square full-rank matrix whose columns have unit Euclidean norm."""

    entries: np.ndarray

    def __post_init__(self):
        a = _frozen(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise InvalidParameterError(f"dictionary must be a non-empty square matrix, got shape {a.shape}")
        norms = np.linalg.norm(a, axis=0)
        if np.max(np.abs(norms - 1.0)) > UNIT_NORM_TOL:
            raise InvalidParameterError(
                f"dictionary columns must have unit norm (max deviation {np.max(np.abs(norms - 1.0)):.3e})"
            )
        _check_full_rank(a)
        object.__setattr__(self, "entries", a)

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def from_columns(cls, a) -> "Dictionary":
        """Normalize the columns of ``a`` and wrap the result."""
        a = np.asarray(a, dtype=float)
        return cls(a / np.linalg.norm(a, axis=0))


@dataclass(frozen=True)
class GramMatrix:
    """Atom collinearity matrix: unit diagonal, symmetric, PSD."""

    entries: np.ndarray

    def __post_init__(self):
        m = _frozen(self.entries)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise InvalidParameterError(f"Gram matrix must be square, got shape {m.shape}")
        if not np.allclose(m, m.T, atol=PSD_TOL, rtol=0):
            raise InvalidParameterError("Gram matrix must be symmetric")
        if np.max(np.abs(np.diag(m) - 1.0)) > PSD_TOL:
            raise InvalidParameterError("Gram matrix must have unit diagonal")
        off = m[~np.eye(m.shape[0], dtype=bool)]
        if off.size and np.max(np.abs(off)) >= 1.0:
            raise InvalidParameterError("off-diagonal Gram entries must satisfy |M[i,j]| < 1")
        if np.linalg.eigvalsh((m + m.T) / 2)[0] < -PSD_TOL:
            raise InvalidParameterError("Gram matrix is not positive semidefinite")
        object.__setattr__(self, "entries", m)

    @property
    def K(self) -> int:
        return self.entries.shape[0]

    def column_without_diagonal(self, j: int) -> np.ndarray:
        """``M[-j, j]``: column ``j`` with its diagonal entry removed."""
        return np.delete(self.entries[:, j], j)


@dataclass(frozen=True)
class SignedPermutation:
    """Column permutation followed by column sign flips.

    Applying it to ``D`` gives ``D[:, perm] * signs``, i.e. ``D @ P @ Lambda``.
    """

    perm: tuple
    signs: tuple

    def __post_init__(self):
        perm = tuple(int(i) for i in self.perm)
        signs = tuple(int(s) for s in self.signs)
        if sorted(perm) != list(range(len(perm))):
            raise InvalidParameterError(f"perm must be a bijection of range({len(perm)})")
        if len(signs) != len(perm) or any(s not in (-1, 1) for s in signs):
            raise InvalidParameterError("signs must be a +/-1 vector with one entry per column")
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "signs", signs)

    def apply(self, d) -> np.ndarray:
        d = np.asarray(getattr(d, "entries", d), dtype=float)
        return d[:, list(self.perm)] * np.asarray(self.signs, dtype=float)

    def matrix(self) -> np.ndarray:
        K = len(self.perm)
        return self.apply(np.eye(K))


def _entries(x) -> np.ndarray:
    return np.asarray(getattr(x, "entries", x), dtype=float)


def gram(d) -> GramMatrix:
    """Return ``D.T @ D`` for a full-rank dictionary.

    Raises
    ------
    RankDeficientError
        If ``d`` is numerically singular.
    """
    if not isinstance(d, Dictionary):
        d = Dictionary(d)
    a = d.entries
    m = a.T @ a
    m = (m + m.T) / 2
    np.fill_diagonal(m, 1.0)
    return GramMatrix(m)


def dictionary_from_gram(m) -> Dictionary:
    """Factor a Gram matrix by its symmetric square root.

    Any factor with unit columns has the same Gram; the symmetric root is the
    deterministic choice.
    """
    if not isinstance(m, GramMatrix):
        m = GramMatrix(m)
    m = m.entries
    evals, evecs = np.linalg.eigh((m + m.T) / 2)
    if evals[0] <= RANK_RTOL * evals[-1]:
        raise RankDeficientError("Gram matrix is singular; no complete dictionary realizes it")
    root = (evecs * np.sqrt(evals)) @ evecs.T
    return Dictionary(root / np.linalg.norm(root, axis=0))


def constant_mu_gram(K: int, mu: float) -> GramMatrix:
    """``mu * 11^T + (1 - mu) I``; positive definite iff ``-1/(K-1) < mu < 1``."""
    K = int(K)
    if K < 1:
        raise InvalidParameterError("K must be positive")
    lo = -1.0 / (K - 1) if K > 1 else -np.inf
    if not (lo < mu < 1.0):
        raise InvalidParameterError(f"constant inner product mu={mu} must lie in ({lo}, 1) for K={K}")
    return GramMatrix(mu * np.ones((K, K)) + (1.0 - mu) * np.eye(K))


def constant_mu_dictionary(K: int, mu: float) -> Dictionary:
    """Dictionary whose atoms all share the inner product ``mu``."""
    return dictionary_from_gram(constant_mu_gram(K, mu))


def minimal_mu_gram(K: int, mu: float) -> GramMatrix:
    """Identity Gram except ``M[0, 1] = M[1, 0] = mu``."""
    K = int(K)
    if K < 2:
        raise InvalidParameterError("minimal-mu Gram needs K >= 2")
    if not abs(mu) < 1.0:
        raise InvalidParameterError(f"|mu| must be < 1, got {mu}")
    m = np.eye(K)
    m[0, 1] = m[1, 0] = mu
    return GramMatrix(m)


def best_signed_permutation(da, db) -> SignedPermutation:
    """Signed permutation of ``db``'s columns that best matches ``da``.

    Solves the assignment problem on ``-|Da^T Db|``; for unit columns this
    minimizes the Frobenius distance exactly.
    """
    a, b = _entries(da), _entries(db)
    if a.shape != b.shape:
        raise InvalidParameterError(f"dimension mismatch: {a.shape} vs {b.shape}")
    corr = a.T @ b
    rows, cols = linear_sum_assignment(-np.abs(corr))
    perm = np.empty(a.shape[1], dtype=int)
    perm[rows] = cols
    signs = np.where(corr[np.arange(a.shape[1]), perm] < 0, -1, 1)
    return SignedPermutation(tuple(perm), tuple(signs))


def dictionary_distance(da, db) -> float:
    """Frobenius distance between ``da`` and ``db`` modulo sign-permutation."""
    sp = best_signed_permutation(da, db)
    return float(np.linalg.norm(_entries(da) - sp.apply(db)))

