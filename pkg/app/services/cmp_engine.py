"""Conditional Mean Process posteriors.

The conditional mean operator is estimated by kernel ridge regression on the
matched dataset D1. Its weights W = (L_aa + N lambda I)^{-1} L_{a a_t} feed
two posteriors:

* the deconditional posterior of f over X, conditioned on the aggregate
  observations in D2;
* the aggregate posterior of g over A, i.e. plain Gaussian conditioning of
  the induced prior (nu, q) on the same observations.
"""
import logging
from dataclasses import dataclass
from typing import Sequence
import numpy as np

from config import Config
from errors import DimensionMismatchError
from models.datasets import MatchedDataset, QueryLog
from models.kernel import KernelSpec, as_points
from services.kernel_gp import (
    CholeskyFactor,
    GpPosterior,
    MeanFunction,
    chol_factor,
    gram,
    zero_mean,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CmoCache:
    """Fitted conditional mean operator for one matched dataset."""

    dataset: MatchedDataset
    kernel_x: KernelSpec
    kernel_a: KernelSpec
    ridge_factor: CholeskyFactor
    K_xx: np.ndarray

    @property
    def size(self) -> int:
        return self.dataset.size

    def weights(self, a_points) -> np.ndarray:
        """W = (L_aa + N lambda I)^{-1} L_{a, a_points}, shape N x len(a_points)."""
        a_points = as_points(a_points, self.kernel_a.dim)
        return self.ridge_factor.solve(self.kernel_a(self.dataset.a_points, a_points))

    def embedded_mean(self, a_points, prior_mean: MeanFunction) -> np.ndarray:
        """nu-hat(a) = W(a)^T m(x)."""
        return self.weights(a_points).T @ prior_mean(self.dataset.x_points)

    def aggregate_cov(self, left, right) -> np.ndarray:
        """q-hat(a, a') = W(a)^T K_xx W(a')."""
        w_left = self.weights(left)
        w_right = w_left if right is left else self.weights(right)
        return w_left.T @ self.K_xx @ w_right

    def aggregate_var(self, points) -> np.ndarray:
        w = self.weights(points)
        return np.sum(w * (self.K_xx @ w), axis=0)


def fit_cmo(d1: MatchedDataset, kernel_x: KernelSpec, kernel_a: KernelSpec) -> CmoCache:
    """Factorize (L_aa + N lambda I) once for a matched dataset."""
    if d1.x_points.shape[1] != kernel_x.dim:
        raise DimensionMismatchError(
            f"x_points have dimension {d1.x_points.shape[1]}, kernel_x expects {kernel_x.dim}"
        )
    if d1.a_points.shape[1] != kernel_a.dim:
        raise DimensionMismatchError(
            f"a_points have dimension {d1.a_points.shape[1]}, kernel_a expects {kernel_a.dim}"
        )
    n = d1.size
    L_aa = gram(kernel_a, d1.a_points).values
    ridge_factor = chol_factor(L_aa + n * d1.ridge_lambda * np.eye(n))
    K_xx = gram(kernel_x, d1.x_points).values
    logger.debug("CMO: fitted on N=%d pairs (N*lambda=%.3e)", n, n * d1.ridge_lambda)
    return CmoCache(dataset=d1, kernel_x=kernel_x, kernel_a=kernel_a, ridge_factor=ridge_factor, K_xx=K_xx)


class AggregatePosterior:
    """Posterior of g over A: prior (nu-hat, q-hat) conditioned on a query log."""

    def __init__(self, prior_mean: MeanFunction, prior_cov, prior_var, log: QueryLog = None):
        self.prior_mean = prior_mean
        self.prior_cov = prior_cov
        self.prior_var = prior_var
        self.log = log
        observed = log is not None and len(log) > 0
        self._gp = GpPosterior(
            prior_mean=prior_mean,
            prior_cov=prior_cov,
            prior_var=prior_var,
            X=log.a_queries if observed else None,
            y=log.z_obs if observed else None,
            noise_vars=log.noise_vars if observed else None,
        )

    @property
    def n_obs(self) -> int:
        return self._gp.n_obs

    def condition(self, log: QueryLog) -> "AggregatePosterior":
        """Condition the prior (not this posterior) on a full query log."""
        return AggregatePosterior(self.prior_mean, self.prior_cov, self.prior_var, log)

    def mean(self, points) -> np.ndarray:
        return self._gp.mean(np.asarray(points, dtype=float))

    def cov(self, left, right) -> np.ndarray:
        return self._gp.cov(np.asarray(left, dtype=float), np.asarray(right, dtype=float))

    def raw_var(self, points) -> np.ndarray:
        return self._gp.raw_var(np.asarray(points, dtype=float))

    def var(self, points) -> np.ndarray:
        return self._gp.var(np.asarray(points, dtype=float))

    def sd(self, points) -> np.ndarray:
        return self._gp.sd(np.asarray(points, dtype=float))


def aggregate_prior(cache: CmoCache, prior_mean: MeanFunction = zero_mean) -> AggregatePosterior:
    """Induced prior of g: nu-hat(a) and q-hat(a, a')."""

    def mean(points):
        return cache.embedded_mean(points, prior_mean)

    def cov(left, right):
        return cache.aggregate_cov(left, right)

    return AggregatePosterior(mean, cov, cache.aggregate_var)


def aggregate_posterior(cache: CmoCache, log: QueryLog, prior_mean: MeanFunction = zero_mean) -> AggregatePosterior:
    """Posterior of g given D1 (through the CMO) and D2."""
    return aggregate_prior(cache, prior_mean).condition(log)


class DeconditionalPosterior:
    """Empirical deconditional posterior (m-hat_t, k-hat_t) of f over X."""

    def __init__(self, cache: CmoCache, log: QueryLog, prior_mean: MeanFunction = zero_mean):
        self.cache = cache
        self.log = log
        self.prior_mean = prior_mean
        self.W = None
        self._beta = None
        self._V = None
        if log is None or len(log) == 0:
            return

        x_train = cache.dataset.x_points
        self.W = cache.weights(log.a_queries)
        Q = self.W.T @ cache.K_xx @ self.W
        Q = 0.5 * (Q + Q.T)
        factor = chol_factor(Q + np.diag(log.noise_vars))
        residual = log.z_obs - self.W.T @ prior_mean(x_train)
        self._beta = self.W @ factor.solve(residual)
        self._V = factor.half_solve(self.W.T)

    @property
    def n_obs(self) -> int:
        return 0 if self.W is None else self.W.shape[1]

    def _k_train(self, points) -> np.ndarray:
        return self.cache.kernel_x(points, self.cache.dataset.x_points)

    def mean(self, points) -> np.ndarray:
        points = as_points(points, self.cache.kernel_x.dim)
        mu = self.prior_mean(points)
        if self.W is None:
            return mu
        return mu + self._k_train(points) @ self._beta

    def cov(self, left, right) -> np.ndarray:
        left = as_points(left, self.cache.kernel_x.dim)
        right = as_points(right, self.cache.kernel_x.dim)
        prior = self.cache.kernel_x(left, right)
        if self.W is None:
            return prior
        a = self._k_train(left) @ self._V.T
        b = self._k_train(right) @ self._V.T
        return prior - a @ b.T

    def raw_var(self, points) -> np.ndarray:
        points = as_points(points, self.cache.kernel_x.dim)
        prior = self.cache.kernel_x.diag(points)
        if self.W is None:
            return prior
        a = self._k_train(points) @ self._V.T
        return prior - np.sum(a * a, axis=1)

    def var(self, points) -> np.ndarray:
        return np.maximum(self.raw_var(points), Config.VARIANCE_FLOOR)

    def sd(self, points) -> np.ndarray:
        return np.sqrt(self.var(points))


def decondition(cache: CmoCache, log: QueryLog, prior_mean: MeanFunction = zero_mean) -> DeconditionalPosterior:
    """Deconditional posterior of f; an empty log returns the prior exactly."""
    return DeconditionalPosterior(cache, log, prior_mean)


def sequential_information_gain(prior: AggregatePosterior, a_sequence: Sequence, noise_var: float) -> float:
    """Sum over t of 0.5 log(1 + q_{t-1}(a_t, a_t) / noise_var)."""
    a_sequence = np.asarray(a_sequence, dtype=float)
    total = 0.0
    dim = a_sequence.shape[1]
    log = QueryLog.empty(dim)
    for a in a_sequence:
        posterior = prior.condition(log)
        q = float(posterior.raw_var(a.reshape(1, -1))[0])
        total += 0.5 * np.log1p(q / noise_var)
        # Variances do not depend on the observed values
        log = log.append(a, 0.0, noise_var)
    return total


def information_gain(prior: AggregatePosterior, a_sequence: Sequence, noise_var: float) -> float:
    """0.5 log det(I + Q_aa / noise_var) for the prior aggregate covariance Q_aa."""
    a_sequence = np.asarray(a_sequence, dtype=float)
    Q = prior.cov(a_sequence, a_sequence)
    Q = 0.5 * (Q + Q.T)
    sign, logdet = np.linalg.slogdet(np.eye(Q.shape[0]) + Q / noise_var)
    return 0.5 * logdet
