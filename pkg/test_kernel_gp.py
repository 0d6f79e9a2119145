"""Kernel, Gram and exact GP regression checks."""
import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from errors import DimensionMismatchError, FactorizationError, NonFiniteInputError
from models.kernel import KernelSpec, as_points
from services.kernel_gp import GramMatrix, chol_factor, chol_solve, gp_regress, gram


def test_se_kernel_off_diagonal_is_exp_minus_one():
    kernel = KernelSpec(lengthscales=[1.0])
    value = kernel([[0.0]], [[np.sqrt(2.0)]])[0, 0]
    assert abs(value - np.exp(-1.0)) < 1e-12


def test_kernel_rejects_bad_lengthscales():
    with pytest.raises(ValueError):
        KernelSpec(lengthscales=[0.0])
    with pytest.raises(ValueError):
        KernelSpec(lengthscales=[1.0], variance=-1.0)


def test_as_points_shapes():
    assert as_points([1.0, 2.0, 3.0]).shape == (3, 1)
    assert as_points([1.0, 2.0], dim=2).shape == (1, 2)
    with pytest.raises(DimensionMismatchError):
        as_points([[1.0, 2.0, 3.0]], dim=2)
    with pytest.raises(NonFiniteInputError):
        as_points([[np.nan]])


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 8), st.just(2)), elements=st.floats(-3, 3)))
def test_gram_is_symmetric_and_psd(points):
    kernel = KernelSpec(lengthscales=[0.7, 1.3], variance=2.0)
    G = gram(kernel, points)
    assert np.array_equal(G.values, G.values.T)
    assert np.allclose(np.diag(G.values), 2.0)
    assert np.linalg.eigvalsh(G.values).min() >= -1e-8 * points.shape[0]


def test_chol_factor_escalates_jitter_on_duplicate_points(caplog):
    kernel = KernelSpec(lengthscales=[1.0])
    G = gram(kernel, [[0.0], [0.0], [1.0]])
    with caplog.at_level(logging.WARNING):
        factor = chol_factor(G)
    assert factor.jitter > 0
    assert "jitter escalated" in caplog.text
    rebuilt = factor.lower @ factor.lower.T
    assert np.allclose(rebuilt, G.values + factor.jitter * np.eye(3))


def test_chol_factor_gives_up_on_indefinite_matrix():
    with pytest.raises(FactorizationError):
        chol_factor(-np.eye(3))


def test_chol_factor_rejects_nan():
    with pytest.raises(NonFiniteInputError):
        chol_factor(np.array([[1.0, np.nan], [np.nan, 1.0]]))


def test_chol_solve_matches_numpy():
    kernel = KernelSpec(lengthscales=[0.5])
    G = gram(kernel, [[0.0], [1.0], [2.5]])
    G = GramMatrix(points=G.points, values=G.values, jitter=0.1)
    rhs = np.array([1.0, -2.0, 0.5])
    expected = np.linalg.solve(G.values + 0.1 * np.eye(3), rhs)
    assert np.allclose(chol_solve(G, rhs), expected, atol=1e-10)


def test_gp_regress_without_data_is_the_prior():
    kernel = KernelSpec(lengthscales=[0.3], variance=1.5)
    post = gp_regress(kernel, np.zeros((0, 1)), [], 0.1)
    grid = np.linspace(0, 1, 7).reshape(-1, 1)
    assert post.n_obs == 0
    assert np.allclose(post.mean(grid), 0.0)
    assert np.allclose(post.var(grid), 1.5)


def test_gp_regress_interpolates_with_tiny_noise():
    kernel = KernelSpec(lengthscales=[0.5])
    X = np.array([[0.0], [1.0], [2.0]])
    y = np.array([0.3, -1.0, 2.0])
    post = gp_regress(kernel, X, y, 1e-10)
    assert np.allclose(post.mean(X), y, atol=1e-5)
    assert np.all(post.var(X) >= 1e-12)
    assert np.all(post.var(X) < 1e-6)


def test_gp_regress_length_mismatch():
    kernel = KernelSpec(lengthscales=[0.5])
    with pytest.raises(DimensionMismatchError):
        gp_regress(kernel, [[0.0], [1.0]], [1.0], 0.1)


def test_gp_posterior_cov_diagonal_matches_var(rng):
    kernel = KernelSpec(lengthscales=[0.4, 0.4])
    X = rng.uniform(size=(6, 2))
    post = gp_regress(kernel, X, rng.standard_normal(6), 0.05)
    grid = rng.uniform(size=(10, 2))
    assert np.allclose(np.diag(post.cov(grid, grid)), post.raw_var(grid), atol=1e-10)


def test_chol_solve_recovers_the_vector_without_jitter(rng):
    kernel = KernelSpec(lengthscales=[0.5])
    G = gram(kernel, [[0.0], [1.0], [2.5], [4.0]])
    v = rng.standard_normal(4)
    assert G.jitter == 0.0
    assert np.max(np.abs(chol_solve(G, G.values @ v) - v)) < 1e-8


def test_gp_regress_variance_never_grows_with_more_data(rng):
    kernel = KernelSpec(lengthscales=[0.25])
    X = rng.uniform(size=(8, 1))
    y = rng.standard_normal(8)
    grid = np.linspace(0, 1, 41).reshape(-1, 1)
    previous = kernel.diag(grid)
    for t in range(1, 9):
        current = gp_regress(kernel, X[:t], y[:t], 0.05).raw_var(grid)
        assert np.all(current <= previous + 1e-10)
        previous = current


def test_gp_regress_with_huge_noise_is_the_prior(rng):
    kernel = KernelSpec(lengthscales=[0.3], variance=1.5)
    X = rng.uniform(size=(6, 1))
    post = gp_regress(kernel, X, rng.standard_normal(6), 1e12)
    grid = np.linspace(0, 1, 25).reshape(-1, 1)
    assert np.max(np.abs(post.mean(grid))) < 1e-4
    assert np.allclose(post.var(grid), 1.5, atol=1e-6)
