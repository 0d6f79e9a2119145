"""Indirect-query bandit: agents with known policies pull arms, we see the mean reward."""
from typing import Callable, Optional
import numpy as np
from scipy.special import softmax

from envs.base import BaseEnvironment
from errors import DimensionMismatchError, NotPositiveSemidefiniteError
from models.experiment import EnvSpec
from models.trace import OracleOptimum
from services.cmp_engine import AggregatePosterior

PolicyMap = Callable[[np.ndarray], np.ndarray]


def bandit_posterior(mu, Sigma, policy_map: PolicyMap, log=None) -> AggregatePosterior:
    """Exact aggregate prior nu(a) = mu^T p(a), q(a, a') = p(a)^T Sigma p(a'), optionally conditioned."""
    mu = np.asarray(mu, dtype=float).reshape(-1)
    Sigma = np.asarray(Sigma, dtype=float)
    if Sigma.shape != (mu.shape[0], mu.shape[0]):
        raise DimensionMismatchError(f"Sigma has shape {Sigma.shape}, expected {(mu.shape[0],) * 2}")
    if not np.allclose(Sigma, Sigma.T, atol=1e-10):
        raise NotPositiveSemidefiniteError("Sigma is not symmetric")
    eigvals = np.linalg.eigvalsh(0.5 * (Sigma + Sigma.T))
    if eigvals[0] < -1e-10 * max(1.0, abs(eigvals[-1])):
        raise NotPositiveSemidefiniteError(f"Sigma has a negative eigenvalue {eigvals[0]:.3e}")

    def mean(points):
        return policy_map(points) @ mu

    def cov(left, right):
        return policy_map(left) @ Sigma @ policy_map(right).T

    def var(points):
        p = policy_map(points)
        return np.sum((p @ Sigma) * p, axis=1)

    prior = AggregatePosterior(mean, cov, var)
    return prior if log is None else prior.condition(log)


class BanditEnvironment(BaseEnvironment):
    """K arms with rewards f_i; agent a follows the softmax policy p(a) = softmax(W a + b).

    X holds the arm index as a 1-D point; f and the policy weights are drawn
    once from the environment seed.
    """

    def __init__(self, spec: EnvSpec):
        super().__init__(spec)
        rng = np.random.default_rng(spec.seed)
        self.n_arms = spec.n_arms
        self.rewards = rng.standard_normal(self.n_arms)
        self.weights = 3.0 * rng.standard_normal((self.n_arms, spec.agent_dim))
        self.bias = rng.standard_normal(self.n_arms)

    def policy(self, a) -> np.ndarray:
        """Arm probabilities per row of a; each row lies in the simplex."""
        a = np.asarray(a, dtype=float).reshape(-1, self.dim_a)
        return softmax(a @ self.weights.T + self.bias, axis=1)

    def arm_index(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        return np.clip(np.rint(x), 0, self.n_arms - 1).astype(int)

    def objective(self, x) -> np.ndarray:
        return self.rewards[self.arm_index(x)]

    def sample_x(self, a, rng, level=None, iteration=None) -> np.ndarray:
        probs = self.policy(a)
        cumulative = np.cumsum(probs, axis=1)
        draws = rng.uniform(size=(probs.shape[0], 1))
        arms = np.minimum((draws > cumulative).sum(axis=1), self.n_arms - 1)
        return arms.astype(float).reshape(-1, 1)

    def true_g(self, a, level: Optional[int] = None, iteration: Optional[int] = None) -> float:
        return float(self.policy(a)[0] @ self.rewards)

    def x_grid(self, per_axis: int, max_points: Optional[int] = None) -> np.ndarray:
        return np.arange(self.n_arms, dtype=float).reshape(-1, 1)

    def optimum(self) -> OracleOptimum:
        best = int(np.argmax(self.rewards))
        return OracleOptimum(x=[float(best)], value=float(self.rewards[best]), grid_points=self.n_arms, refinements=0)

    def aggregate_prior(self, prior_var: float = 1.0) -> AggregatePosterior:
        """Exact prior of g for independent N(0, prior_var) arm rewards."""
        return bandit_posterior(np.zeros(self.n_arms), prior_var * np.eye(self.n_arms), self.policy)
