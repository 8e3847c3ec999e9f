import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import random_dictionary
from l1ident.dictionary import Dictionary, SignedPermutation, constant_mu_dictionary
from l1ident.exceptions import InvalidParameterError, RankDeficientError
from l1ident.models import BG, SG, generate_signals, sample_coefficients
from l1ident.objective import (
    DescentConfig,
    empirical_objective,
    empirical_subgradient,
    manifold_descent,
    population_objective,
    tangent_project,
)

C = math.sqrt(2 / math.pi)


def test_population_objective_at_reference():
    d0 = constant_mu_dictionary(6, 0.3)
    for s in range(1, 6):
        assert population_objective(d0, d0, SG(s)) == pytest.approx(C * s)
    assert population_objective(d0, d0, SG(6)) == pytest.approx(C * 6)
    assert population_objective(d0, d0, BG(0.4)) == pytest.approx(C * 0.4 * 6)
    assert population_objective(d0, d0, BG(1.0)) == pytest.approx(C * 6)


def test_population_objective_singular():
    with pytest.raises(RankDeficientError):
        population_objective(np.ones((3, 3)) / math.sqrt(3), np.eye(3), SG(1))


@pytest.mark.parametrize("model", [SG(1), SG(3), SG(5), BG(0.15), BG(0.6), BG(1.0)])
def test_population_objective_monte_carlo(rng, model):
    K = 5
    d0 = random_dictionary(rng, K, 0.5)
    d = random_dictionary(rng, K, 0.5)
    x = generate_signals(d0, model, 100_000, int(rng.integers(2**31))).signals
    vals = np.abs(np.linalg.solve(d, x.T)).sum(axis=0)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(population_objective(d, d0, model) - vals.mean()) <= 4 * se


def test_empirical_objective_at_reference():
    d0 = constant_mu_dictionary(4, 0.2)
    batch = generate_signals(d0, BG(0.3), 500, 3)
    alpha = sample_coefficients(4, BG(0.3), 500, 3)
    assert empirical_objective(d0, batch) == pytest.approx(np.abs(alpha).sum(axis=1).mean(), rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31))
def test_objective_invariant_under_signed_permutation(K, seed):
    r = np.random.default_rng(seed)
    d = random_dictionary(r, K, 0.6)
    batch = generate_signals(random_dictionary(r, K, 0.6), SG(1), 200, seed)
    sp = SignedPermutation(tuple(r.permutation(K)), tuple(r.choice([-1, 1], size=K)))
    assert empirical_objective(sp.apply(d), batch) == pytest.approx(empirical_objective(d, batch), rel=1e-12)


def test_subgradient_matches_finite_differences(rng):
    K = 5
    d0 = random_dictionary(rng, K, 0.5)
    batch = generate_signals(d0, BG(0.5), 300, 1)
    d = random_dictionary(rng, K, 0.5)
    g = empirical_subgradient(d, batch)
    for _ in range(10):
        xi = rng.standard_normal((K, K))
        fd = oracles.central_difference(lambda m: empirical_objective(m, batch), d, xi, 1e-6)
        assert abs(np.vdot(g, xi) - fd) <= 1e-5


def test_subgradient_homogeneous_in_signals(rng):
    d0 = random_dictionary(rng, 4, 0.3)
    batch = generate_signals(d0, SG(2), 100, 2)
    d = random_dictionary(rng, 4, 0.3)
    np.testing.assert_allclose(empirical_subgradient(d, 3.0 * batch.signals), 3.0 * empirical_subgradient(d, batch))


def test_projected_subgradient_vanishes_at_orthogonal_reference():
    batch = generate_signals(np.eye(5), SG(1), 400, 5)
    g = tangent_project(np.eye(5), empirical_subgradient(np.eye(5), batch))
    np.testing.assert_allclose(g, 0.0, atol=1e-15)


def test_tangent_projection(rng):
    d = random_dictionary(rng, 6, 0.4)
    gp = tangent_project(d, rng.standard_normal((6, 6)))
    np.testing.assert_allclose(np.einsum("ik,ik->k", d, gp), 0.0, atol=1e-12)


# --- descent -------------------------------------------------------------------

def test_zero_step_returns_start():
    d0 = constant_mu_dictionary(5, 0.2)
    batch = generate_signals(d0, SG(2), 300, 0)
    tr = manifold_descent(d0, batch, DescentConfig(max_iters=50, step0=0.0), D0=d0)
    assert tr.final_error == 0.0
    np.testing.assert_array_equal(tr.final_D.entries, d0.entries)
    assert tr.converged and tr.iterations == 1


def test_descent_history_and_unit_columns(rng):
    d0 = constant_mu_dictionary(6, 0.4)
    batch = generate_signals(d0, SG(4), 500, 9)
    start = Dictionary(random_dictionary(rng, 6, 0.2))
    tr = manifold_descent(start, batch, DescentConfig(max_iters=300, step0=0.05), D0=d0)
    h = np.array(tr.objective_history)
    assert np.all(np.diff(h) <= 0)
    assert len(h) == tr.iterations + 1 or tr.aborted_singular
    np.testing.assert_allclose(np.linalg.norm(tr.final_D.entries, axis=0), 1.0, atol=1e-14)
    assert h[-1] <= empirical_objective(start, batch)
    assert empirical_objective(tr.final_D, batch) == pytest.approx(h[-1], rel=1e-12)


def test_descent_reduces_objective_from_perturbed_start(rng):
    d0 = constant_mu_dictionary(5, 0.1)
    batch = generate_signals(d0, SG(1), 1000, 4)
    start = d0.entries + 0.1 * rng.standard_normal((5, 5))
    start = Dictionary(start / np.linalg.norm(start, axis=0))
    tr = manifold_descent(start, batch, DescentConfig(max_iters=3000, step0=0.05), D0=d0)
    assert tr.final_error < 0.5 * manifold_descent(start, batch, DescentConfig(max_iters=0), D0=d0).final_error


def test_descent_singular_guard():
    d0 = np.eye(3)
    batch = generate_signals(d0, SG(1), 50, 0)
    start = np.array([[1.0, 1.0, 0.0], [0.0, 1e-9, 0.0], [0.0, 0.0, 1.0]])
    start /= np.linalg.norm(start, axis=0)
    tr = manifold_descent(start, batch, DescentConfig(max_iters=5, step0=0.0, singular_guard=1e-6), D0=d0)
    assert tr.aborted_singular


def test_descent_config_validation():
    for bad in (dict(max_iters=-1), dict(step0=-0.1), dict(stop_tol=0.0), dict(step_decay="const")):
        with pytest.raises(InvalidParameterError):
            DescentConfig(**bad)


@pytest.mark.slow
def test_deep_identifiable_cell_recovers():
    d0 = constant_mu_dictionary(10, 0.05)
    good = 0
    for b in range(10):
        batch = generate_signals(d0, SG(2), 2000, 1000 + b)
        good += manifold_descent(d0, batch, DescentConfig(), D0=d0).final_error < 1e-2
    assert good >= 9


@pytest.mark.slow
def test_deep_nonidentifiable_cell_drifts():
    d0 = constant_mu_dictionary(10, 0.6)
    bad = 0
    for b in range(10):
        batch = generate_signals(d0, SG(8), 2000, 2000 + b)
        bad += manifold_descent(d0, batch, DescentConfig(), D0=d0).final_error > 0.1
    assert bad >= 9
