import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_dictionary
from oracles import brute_force_distance
from l1ident.dictionary import (
    Dictionary,
    GramMatrix,
    SignedPermutation,
    best_signed_permutation,
    constant_mu_dictionary,
    constant_mu_gram,
    dictionary_distance,
    dictionary_from_gram,
    gram,
    minimal_mu_gram,
)
from l1ident.exceptions import InvalidParameterError, RankDeficientError


def test_identity_gram():
    np.testing.assert_array_equal(gram(np.eye(4)).entries, np.eye(4))


def test_two_atom_gram_inner_product():
    d = np.array([[1.0, 0.7], [0.0, np.sqrt(0.51)]])
    assert gram(d).entries[0, 1] == pytest.approx(0.7, abs=1e-15)


def test_gram_diagonal_is_one(rng):
    g = gram(random_dictionary(rng, 6))
    np.testing.assert_allclose(np.diag(g.entries), 1.0, atol=0)


def test_rank_deficient_dictionary_rejected():
    d = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])
    with pytest.raises(RankDeficientError):
        gram(d)


def test_dictionary_requires_unit_columns():
    with pytest.raises(InvalidParameterError):
        Dictionary(2 * np.eye(3))


def test_dictionary_is_immutable():
    d = Dictionary(np.eye(2))
    with pytest.raises(ValueError):
        d.entries[0, 0] = 3.0


@pytest.mark.parametrize("bad", [
    np.array([[1.0, 0.5], [0.4, 1.0]]),  # asymmetric
    np.array([[1.0, 1.0], [1.0, 1.0]]),  # |off| = 1
    np.array([[2.0, 0.0], [0.0, 1.0]]),  # diagonal
    np.array([[1, 0.9, 0.9], [0.9, 1, -0.9], [0.9, -0.9, 1]]),  # indefinite
])
def test_gram_invariants(bad):
    with pytest.raises(InvalidParameterError):
        GramMatrix(bad)


def test_constant_mu_orthonormal_case():
    np.testing.assert_allclose(gram(constant_mu_dictionary(3, 0.0)).entries, np.eye(3), atol=1e-12)


def test_constant_mu_two_atoms():
    assert gram(constant_mu_dictionary(2, 0.7)).entries[0, 1] == pytest.approx(0.7, abs=1e-10)


@pytest.mark.parametrize("K", [2, 5, 10, 17, 32])
@pytest.mark.parametrize("mu", [-0.02, 0.0, 0.3, 0.6, 0.95])
def test_constant_mu_gram_reproduced(K, mu):
    if mu <= -1 / (K - 1):
        pytest.skip("outside the positive-definite range")
    target = mu * np.ones((K, K)) + (1 - mu) * np.eye(K)
    np.testing.assert_allclose(gram(constant_mu_dictionary(K, mu)).entries, target, atol=1e-10)


@pytest.mark.parametrize("mu", [1.0, -0.5, 1.2])
def test_constant_mu_range(mu):
    with pytest.raises(InvalidParameterError):
        constant_mu_dictionary(3, mu)


def test_minimal_mu_gram():
    np.testing.assert_array_equal(minimal_mu_gram(2, 0.5).entries, [[1, 0.5], [0.5, 1]])
    np.testing.assert_array_equal(minimal_mu_gram(3, 0.0).entries, np.eye(3))
    ev = np.sort(np.linalg.eigvalsh(minimal_mu_gram(4, 0.9).entries))
    np.testing.assert_allclose(ev, [0.1, 1.0, 1.0, 1.9], atol=1e-12)
    off = minimal_mu_gram(5, -0.3).entries - np.eye(5)
    assert np.count_nonzero(off) == 2
    with pytest.raises(InvalidParameterError):
        minimal_mu_gram(3, 1.0)


def test_dictionary_from_gram_roundtrip(rng):
    d = random_dictionary(rng, 5)
    g = gram(d)
    np.testing.assert_allclose(gram(dictionary_from_gram(g)).entries, g.entries, atol=1e-10)


def test_distance_zero_on_ambiguity_class(rng):
    da = random_dictionary(rng, 4)
    assert dictionary_distance(da, da) == 0.0
    db = da[:, [1, 0, 2, 3]].copy()
    db[:, 0] *= -1
    assert dictionary_distance(da, db) == pytest.approx(0.0, abs=1e-14)


def test_distance_dimension_mismatch():
    with pytest.raises(InvalidParameterError):
        dictionary_distance(np.eye(2), np.eye(3))


def test_signed_permutation_matches_brute_force(rng):
    for K in (2, 3, 4, 5):
        for _ in range(4):
            da, db = random_dictionary(rng, K), random_dictionary(rng, K)
            assert dictionary_distance(da, db) == pytest.approx(brute_force_distance(da, db), abs=1e-12)


def test_signed_permutation_validation():
    with pytest.raises(InvalidParameterError):
        SignedPermutation((0, 0), (1, 1))
    with pytest.raises(InvalidParameterError):
        SignedPermutation((0, 1), (1, 0))
    sp = SignedPermutation((1, 0), (-1, 1))
    np.testing.assert_array_equal(sp.matrix(), [[0, 1], [-1, 0]])


def test_best_signed_permutation_recovers_truth(rng):
    d = random_dictionary(rng, 6, spread=0.2)
    perm, signs = (3, 1, 5, 0, 2, 4), (1, -1, -1, 1, 1, -1)
    truth = SignedPermutation(perm, signs)
    shuffled = truth.apply(d)
    found = best_signed_permutation(shuffled, d)
    np.testing.assert_allclose(found.apply(d), shuffled)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_distance_pseudometric(K, seed):
    r = np.random.default_rng(seed)
    a, b, c = (random_dictionary(r, K) for _ in range(3))
    dab, dba = dictionary_distance(a, b), dictionary_distance(b, a)
    assert dab == pytest.approx(dba, abs=1e-12)
    assert dab <= dictionary_distance(a, c) + dictionary_distance(c, b) + 1e-12
    for perm in itertools.islice(itertools.permutations(range(K)), 3):
        assert dictionary_distance(a, a[:, perm] * -1.0) == pytest.approx(0.0, abs=1e-12)
