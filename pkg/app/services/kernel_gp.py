"""Kernel Gram matrices, robust symmetric solves and exact GP regression."""
import logging
from dataclasses import dataclass
from typing import Callable, Optional
import numpy as np
from scipy import linalg

from config import Config
from errors import DimensionMismatchError, FactorizationError, NonFiniteInputError
from models.kernel import KernelSpec, as_points

logger = logging.getLogger(__name__)

MeanFunction = Callable[[np.ndarray], np.ndarray]
CovFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]
VarFunction = Callable[[np.ndarray], np.ndarray]


def zero_mean(points: np.ndarray) -> np.ndarray:
    return np.zeros(np.asarray(points).shape[0])


def constant_mean(value: float) -> MeanFunction:
    """Prior mean returning the same constant everywhere."""
    if value == 0.0:
        return zero_mean

    def mean(points: np.ndarray) -> np.ndarray:
        return np.full(np.asarray(points).shape[0], float(value))

    return mean


@dataclass(frozen=True)
class GramMatrix:
    """Kernel evaluations on a finite point set plus diagonal jitter."""

    points: np.ndarray
    values: np.ndarray
    jitter: float = 0.0

    @property
    def size(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower Cholesky factor of (matrix + jitter * I)."""

    lower: np.ndarray
    jitter: float

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return linalg.cho_solve((self.lower, True), rhs, check_finite=False)

    def half_solve(self, rhs: np.ndarray) -> np.ndarray:
        """L^{-1} rhs."""
        return linalg.solve_triangular(self.lower, rhs, lower=True, check_finite=False)


def gram(kernel: KernelSpec, points) -> GramMatrix:
    """Symmetric Gram matrix of the kernel on a point set."""
    points = as_points(points, kernel.dim)
    values = kernel(points, points)
    # Bitwise symmetric
    values = 0.5 * (values + values.T)
    np.fill_diagonal(values, kernel.diag(points))
    return GramMatrix(points=points, values=values)


def chol_factor(matrix, jitter: float = 0.0) -> CholeskyFactor:
    """Cholesky factorization with jitter escalation.

    The first attempt uses the given jitter; later attempts add
    Config.jitter_schedule() multiples of the mean diagonal.
    """
    values = matrix.values if isinstance(matrix, GramMatrix) else np.asarray(matrix, dtype=float)
    if isinstance(matrix, GramMatrix):
        jitter = max(jitter, matrix.jitter)
    if not np.all(np.isfinite(values)):
        raise NonFiniteInputError("Matrix to factorize contains non-finite entries")
    n = values.shape[0]
    if n == 0:
        return CholeskyFactor(lower=np.zeros((0, 0)), jitter=jitter)

    mean_diag = float(np.mean(np.diag(values)))
    scale = mean_diag if mean_diag > 0 else 1.0
    attempts = [jitter] + [max(jitter, level * scale) for level in Config.jitter_schedule()]

    eye = np.eye(n)
    for idx, level in enumerate(attempts):
        try:
            lower = linalg.cholesky(values + level * eye, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        if idx > 0:
            logger.warning("Cholesky: jitter escalated to %.3e (n=%d)", level, n)
        return CholeskyFactor(lower=lower, jitter=level)

    raise FactorizationError(
        f"Cholesky failed for a {n}x{n} matrix after jitter up to {attempts[-1]:.3e}"
    )


def chol_solve(G, B) -> np.ndarray:
    """Solve (G.values + jitter * I) X = B through a symmetric factorization."""
    rhs = np.asarray(B, dtype=float)
    factor = chol_factor(G)
    return factor.solve(rhs)


class GpPosterior:
    """Gaussian conditioning of a prior (mean, covariance) on noisy observations.

    Serves as plain GP regression, as the posterior of g over A and as the
    bandit posterior; all three only differ in the prior functions passed in.
    """

    def __init__(
        self,
        prior_mean: MeanFunction,
        prior_cov: CovFunction,
        X=None,
        y=None,
        noise_vars=None,
        prior_var: Optional[VarFunction] = None,
    ):
        self.prior_mean = prior_mean
        self.prior_cov = prior_cov
        self.prior_var = prior_var or (lambda pts: np.diag(prior_cov(pts, pts)).copy())

        if X is None or len(np.asarray(X)) == 0:
            self.X = None
            self.factor = None
            self.alpha = None
            self.noise_vars = np.zeros(0)
            return

        self.X = np.asarray(X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X.reshape(-1, 1)
        y = np.asarray(y, dtype=float).reshape(-1)
        self.noise_vars = np.broadcast_to(np.asarray(noise_vars, dtype=float), y.shape).copy()
        cov = prior_cov(self.X, self.X)
        cov = 0.5 * (cov + cov.T) + np.diag(self.noise_vars)
        self.factor = chol_factor(cov)
        self.alpha = self.factor.solve(y - prior_mean(self.X))

    @property
    def n_obs(self) -> int:
        return 0 if self.X is None else self.X.shape[0]

    def mean(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        mu = self.prior_mean(points)
        if self.X is None:
            return mu
        return mu + self.prior_cov(points, self.X) @ self.alpha

    def cov(self, left, right) -> np.ndarray:
        prior = self.prior_cov(left, right)
        if self.X is None:
            return prior
        v_left = self.factor.half_solve(self.prior_cov(self.X, left))
        v_right = self.factor.half_solve(self.prior_cov(self.X, right))
        return prior - v_left.T @ v_right

    def raw_var(self, points) -> np.ndarray:
        """Pointwise posterior variance without the floor."""
        prior = self.prior_var(points)
        if self.X is None:
            return prior
        v = self.factor.half_solve(self.prior_cov(self.X, points))
        return prior - np.sum(v * v, axis=0)

    def var(self, points) -> np.ndarray:
        return np.maximum(self.raw_var(points), Config.VARIANCE_FLOOR)

    def sd(self, points) -> np.ndarray:
        return np.sqrt(self.var(points))


def gp_regress(
    kernel: KernelSpec,
    X,
    y,
    noise_var,
    prior_mean: MeanFunction = zero_mean,
) -> GpPosterior:
    """Exact GP posterior; empty data returns the prior."""
    X = as_points(X, kernel.dim) if len(np.asarray(X)) else None
    if X is not None and X.shape[0] != len(np.asarray(y).reshape(-1)):
        raise DimensionMismatchError("X and y must have the same length")
    return GpPosterior(
        prior_mean=prior_mean,
        prior_cov=kernel,
        X=X,
        y=y,
        noise_vars=noise_var,
        prior_var=kernel.diag,
    )
