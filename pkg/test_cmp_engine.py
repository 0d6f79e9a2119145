"""Deconditional and aggregate posteriors."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from errors import DimensionMismatchError
from models.datasets import MatchedDataset, QueryLog
from models.kernel import KernelSpec
from services.cmp_engine import (
    aggregate_posterior,
    aggregate_prior,
    decondition,
    fit_cmo,
    information_gain,
    sequential_information_gain,
)
from services.kernel_gp import gp_regress


def _identity_instance(rng, dim):
    """Matched points with a_j = x_j, spread out enough for the ridge to vanish."""
    if dim == 1:
        n = int(rng.integers(3, 9))
        points = np.linspace(0.0, 1.0, n) + rng.uniform(-0.01, 0.01, size=n)
        points = points.reshape(-1, 1)
        kernel = KernelSpec(lengthscales=[0.15])
        grid = np.linspace(0.0, 1.0, 50).reshape(-1, 1)
    else:
        axis = np.array([0.0, 0.5, 1.0])
        points = np.array([[u, v] for u in axis for v in axis]) + rng.uniform(-0.01, 0.01, size=(9, 2))
        kernel = KernelSpec(lengthscales=[0.2, 0.2])
        grid = rng.uniform(size=(50, 2))
    t = int(rng.integers(1, 11))
    idx = rng.integers(points.shape[0], size=t)
    log = QueryLog(a_queries=points[idx], z_obs=rng.standard_normal(t), noise_vars=np.full(t, 0.1))
    d1 = MatchedDataset(x_points=points, a_points=points, ridge_lambda=1e-8)
    return d1, kernel, log, grid


@pytest.mark.parametrize("dim", [1, 2])
def test_identity_conditional_reduces_to_gp_regression(dim):
    rng = np.random.default_rng(dim)
    for _ in range(10):
        d1, kernel, log, grid = _identity_instance(rng, dim)
        cache = fit_cmo(d1, kernel, kernel)
        post_f = decondition(cache, log)
        gp = gp_regress(kernel, log.a_queries, log.z_obs, log.noise_vars)
        assert np.max(np.abs(post_f.mean(grid) - gp.mean(grid))) < 1e-4
        assert np.max(np.abs(post_f.raw_var(grid) - gp.raw_var(grid))) < 1e-4


def test_empty_log_returns_the_prior(rng):
    kernel = KernelSpec(lengthscales=[0.3])
    d1 = MatchedDataset(x_points=rng.uniform(size=(12, 1)), a_points=rng.uniform(size=(12, 1)))
    cache = fit_cmo(d1, kernel, kernel)
    post_f = decondition(cache, QueryLog.empty(1))
    grid = np.linspace(0, 1, 9).reshape(-1, 1)
    assert post_f.n_obs == 0
    assert np.array_equal(post_f.mean(grid), np.zeros(9))
    assert np.array_equal(post_f.cov(grid, grid), kernel(grid, grid))


def test_singleton_dataset_is_accepted():
    kernel = KernelSpec(lengthscales=[0.3])
    d1 = MatchedDataset(x_points=[[0.2]], a_points=[[0.4]])
    cache = fit_cmo(d1, kernel, kernel)
    assert cache.size == 1
    assert cache.weights([[0.4], [0.9]]).shape == (1, 2)


def test_fit_cmo_checks_dimensions(rng):
    d1 = MatchedDataset(x_points=rng.uniform(size=(5, 2)), a_points=rng.uniform(size=(5, 1)))
    with pytest.raises(DimensionMismatchError):
        fit_cmo(d1, KernelSpec(lengthscales=[0.3]), KernelSpec(lengthscales=[0.3]))


def test_matched_dataset_length_mismatch():
    # Raised inside validation, so pydantic reports it as a ValidationError
    with pytest.raises(ValueError, match="x_points"):
        MatchedDataset(x_points=[[0.0], [1.0]], a_points=[[0.0]])


def test_query_log_rejects_nonpositive_noise():
    with pytest.raises(ValueError):
        QueryLog(a_queries=[[0.1]], z_obs=[1.0], noise_vars=[0.0])


def _cache(seed):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, size=(15, 2))
    a = rng.uniform(size=(15, 1))
    return fit_cmo(MatchedDataset(x_points=x, a_points=a), KernelSpec(lengthscales=[0.5, 0.5]), KernelSpec(lengthscales=[0.2]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 1), st.floats(0, 1))
def test_aggregate_covariance_is_symmetric(seed, a, b):
    cache = _cache(seed % 7)
    assert abs(cache.aggregate_cov([[a]], [[b]])[0, 0] - cache.aggregate_cov([[b]], [[a]])[0, 0]) < 1e-10


def test_aggregate_prior_matches_embedding():
    cache = _cache(0)
    prior = aggregate_prior(cache)
    points = np.linspace(0, 1, 6).reshape(-1, 1)
    W = cache.weights(points)
    assert np.allclose(prior.cov(points, points), W.T @ cache.K_xx @ W)
    assert np.allclose(prior.raw_var(points), np.diag(W.T @ cache.K_xx @ W))
    assert np.allclose(prior.mean(points), 0.0)


def test_aggregate_posterior_shrinks_variance_at_queries():
    cache = _cache(1)
    log = QueryLog(a_queries=[[0.3], [0.8]], z_obs=[1.0, -0.5], noise_vars=[0.01, 0.01])
    prior = aggregate_prior(cache)
    post = aggregate_posterior(cache, log)
    assert post.n_obs == 2
    assert np.all(post.raw_var(log.a_queries) < prior.raw_var(log.a_queries))


def test_deconditional_cov_diagonal_matches_var():
    cache = _cache(2)
    log = QueryLog(a_queries=[[0.1], [0.5], [0.9]], z_obs=[0.2, 0.4, -0.1], noise_vars=[0.1, 0.1, 0.1])
    post_f = decondition(cache, log)
    grid = np.random.default_rng(0).uniform(-1, 1, size=(20, 2))
    assert np.allclose(np.diag(post_f.cov(grid, grid)), post_f.raw_var(grid), atol=1e-10)
    assert np.all(post_f.var(grid) > 0)


def test_telescoped_information_gain_matches_log_det():
    rng = np.random.default_rng(7)
    prior = aggregate_prior(_cache(3))
    for _ in range(20):
        T = int(rng.integers(1, 9))
        sequence = rng.uniform(size=(T, 1))
        noise_var = float(rng.uniform(0.05, 1.0))
        telescoped = sequential_information_gain(prior, sequence, noise_var)
        direct = information_gain(prior, sequence, noise_var)
        assert abs(telescoped - direct) < 1e-8


def test_huge_ridge_gives_the_prior(rng):
    kernel = KernelSpec(lengthscales=[0.3])
    d1 = MatchedDataset(x_points=rng.uniform(size=(12, 1)), a_points=rng.uniform(size=(12, 1)), ridge_lambda=1e12)
    log = QueryLog(a_queries=[[0.2], [0.6]], z_obs=[1.0, -2.0], noise_vars=[0.1, 0.1])
    post_f = decondition(fit_cmo(d1, kernel, kernel), log)
    grid = np.linspace(0, 1, 21).reshape(-1, 1)
    assert np.max(np.abs(post_f.mean(grid))) < 1e-4
    assert np.max(np.abs(post_f.raw_var(grid) - kernel.diag(grid))) < 1e-6


def test_huge_observation_noise_gives_the_prior():
    cache = _cache(4)
    log = QueryLog(a_queries=[[0.2], [0.5], [0.7]], z_obs=[1.0, 2.0, -1.5], noise_vars=[1e12] * 3)
    post_f = decondition(cache, log)
    grid = np.random.default_rng(1).uniform(-1, 1, size=(30, 2))
    assert np.max(np.abs(post_f.mean(grid))) < 1e-4
    assert np.max(np.abs(post_f.raw_var(grid) - cache.kernel_x.diag(grid))) < 1e-6


def test_deconditional_variance_shrinks_with_every_query():
    cache = _cache(5)
    rng = np.random.default_rng(3)
    grid = rng.uniform(-1, 1, size=(40, 2))
    prior = cache.kernel_x.diag(grid)
    log = QueryLog.empty(1)
    previous = prior
    for a in rng.uniform(size=8):
        log = log.append([a], float(rng.standard_normal()), 0.1)
        current = decondition(cache, log).raw_var(grid)
        assert np.all(current <= previous + 1e-8)
        assert np.all(current <= prior + 1e-8)
        previous = current


def test_aggregate_posterior_is_gaussian_conditioning_on_the_embedded_gram():
    cache = _cache(6)
    log = QueryLog(a_queries=[[0.1], [0.45], [0.8]], z_obs=[0.5, -0.3, 1.2], noise_vars=[0.1, 0.05, 0.2])
    post = aggregate_posterior(cache, log)
    points = np.linspace(0, 1, 11).reshape(-1, 1)
    A = log.a_queries
    gram_tt = cache.aggregate_cov(A, A) + np.diag(log.noise_vars)
    cross = cache.aggregate_cov(points, A)
    mean = cross @ np.linalg.solve(gram_tt, log.z_obs)
    cov = cache.aggregate_cov(points, points) - cross @ np.linalg.solve(gram_tt, cross.T)
    assert np.max(np.abs(post.mean(points) - mean)) < 1e-8
    assert np.max(np.abs(post.cov(points, points) - cov)) < 1e-8


def test_aggregate_posterior_pins_nearly_noiseless_queries():
    cache = _cache(7)
    queries = [[0.1], [0.5], [0.9]]
    log = QueryLog(a_queries=queries, z_obs=[0.3, -0.2, 0.8], noise_vars=[1e-10] * 3)
    post = aggregate_posterior(cache, log)
    assert np.all(post.raw_var(queries) <= 1e-6)
    assert np.allclose(post.mean(queries), [0.3, -0.2, 0.8], atol=1e-3)


def test_identity_embedding_keeps_the_kernel_at_matched_points():
    points = np.linspace(0, 1, 5).reshape(-1, 1)
    kernel = KernelSpec(lengthscales=[0.15], variance=1.3)
    cache = fit_cmo(MatchedDataset(x_points=points, a_points=points, ridge_lambda=1e-8), kernel, kernel)
    prior = aggregate_prior(cache)
    assert np.max(np.abs(prior.raw_var(points) - 1.3)) < 1e-6
    assert np.max(np.abs(prior.cov(points, points) - kernel(points, points))) < 1e-6
