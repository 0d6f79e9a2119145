"""Base class for synthetic ground-truth environments."""
import itertools
import logging
from abc import ABC, abstractmethod
from typing import Optional
import numpy as np
from scipy import special

from errors import DomainError
from models.datasets import MatchedDataset
from models.experiment import CostScheduleSpec, EnvSpec
from models.trace import OracleOptimum

logger = logging.getLogger(__name__)

ORACLE_POINTS = 160_000
ORACLE_REFINEMENTS = 3
ORACLE_LOCAL = 41
QUADRATURE_TOL = 1e-5


def box_grid(domain, per_axis: int, max_points: Optional[int] = None) -> np.ndarray:
    """Row-major tensor grid over an axis-aligned box, capped at max_points."""
    domain = np.asarray(domain, dtype=float)
    dim = domain.shape[0]
    if max_points is not None and per_axis ** dim > max_points:
        per_axis = max(int(np.floor(max_points ** (1.0 / dim) + 1e-9)), 1)
    if per_axis == 1:
        axes = [np.array([0.5 * (lo + hi)]) for lo, hi in domain]
    else:
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in domain]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def tensor_rule(nodes: np.ndarray, weights: np.ndarray, dim: int):
    """Tensor-product quadrature rule from a 1-D rule."""
    points = np.array(list(itertools.product(nodes, repeat=dim)))
    w = np.prod(np.array(list(itertools.product(weights, repeat=dim))), axis=1)
    return points, w


class BaseEnvironment(ABC):
    """Abstract base class for environments exposing f over X and feedback over A."""

    def __init__(self, spec: EnvSpec):
        self.spec = spec
        self.env_name = self.__class__.__name__.replace("Environment", "").lower()
        self.x_domain = np.asarray(spec.x_domain, dtype=float)
        self.a_domain = np.asarray(spec.a_domain, dtype=float)
        self._optimum: Optional[OracleOptimum] = None

    @property
    def dim_x(self) -> int:
        return self.x_domain.shape[0]

    @property
    def dim_a(self) -> int:
        return self.a_domain.shape[0]

    @abstractmethod
    def objective(self, x) -> np.ndarray:
        """
        Evaluate the target function.

        Args:
            x: Points in X, one per row

        Returns:
            f at every row of x
        """

    @abstractmethod
    def sample_x(self, a, rng: np.random.Generator, level: Optional[int] = None, iteration: Optional[int] = None) -> np.ndarray:
        """
        Draw from the conditional distribution of x given a query.

        Args:
            a: Queries in A, one per row
            rng: Generator the draws come from
            level: Tree depth for multi-resolution conditionals; None for the base conditional
            iteration: Step index for time-varying conditionals

        Returns:
            One draw x ~ p(x | a) per row of a
        """

    @abstractmethod
    def true_g(self, a, level: Optional[int] = None, iteration: Optional[int] = None) -> float:
        """
        Exact conditional expectation of f at a single query.

        Args:
            a: One query in A
            level: Tree depth, as in sample_x
            iteration: Step index, as in sample_x

        Returns:
            g(a) = E[f(x) | a]
        """

    def noise_sd(self, level: Optional[int] = None) -> float:
        return self.spec.noise_sd

    def check_a(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=float).reshape(-1, self.dim_a)
        if np.any(a < self.a_domain[:, 0] - 1e-12) or np.any(a > self.a_domain[:, 1] + 1e-12):
            raise DomainError(f"{self.env_name}: query outside the A domain")
        return a

    def check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.dim_x)
        if np.any(x < self.x_domain[:, 0] - 1e-9) or np.any(x > self.x_domain[:, 1] + 1e-9):
            raise DomainError(f"{self.env_name}: point outside the X domain")
        return x

    def observe(
        self,
        a,
        rng: np.random.Generator,
        level: Optional[int] = None,
        iteration: Optional[int] = None,
    ) -> float:
        """One noisy aggregate observation z at a.

        Sample mode draws x ~ p(x | a) and returns f(x) plus noise, which has
        mean g(a). Quadrature mode returns the exact g(a) plus noise.
        """
        a = self.check_a(a)[:1]
        if self.spec.observation_mode == "quadrature":
            value = self.true_g(a[0], level=level, iteration=iteration)
        else:
            x = self.sample_x(a, rng, level=level, iteration=iteration)
            value = float(self.objective(x)[0])
        return value + self.noise_sd(level) * float(rng.standard_normal())

    def generate_d1(self, n: int, seed, ridge_lambda: float = 1e-3) -> MatchedDataset:
        """N matched pairs: a uniform on A, x ~ p(x | a)."""
        if n < 1:
            raise ValueError("generate_d1 needs n >= 1")
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        lo, hi = self.a_domain[:, 0], self.a_domain[:, 1]
        a_points = lo + (hi - lo) * rng.uniform(size=(n, self.dim_a))
        x_points = self.sample_x(a_points, rng)
        return MatchedDataset(x_points=x_points, a_points=a_points, ridge_lambda=ridge_lambda)

    def x_grid(self, per_axis: int, max_points: Optional[int] = None) -> np.ndarray:
        return box_grid(self.x_domain, per_axis, max_points)

    def a_grid(self, per_axis: int, max_points: Optional[int] = None) -> np.ndarray:
        return box_grid(self.a_domain, per_axis, max_points)

    def optimum(self) -> OracleOptimum:
        """Dense-grid maximum of f refined by shrinking local grids; cached."""
        if self._optimum is not None:
            return self._optimum
        per_axis = int(np.floor(ORACLE_POINTS ** (1.0 / self.dim_x) + 1e-9))
        grid = self.x_grid(per_axis)
        values = self.objective(grid)
        best = int(np.argmax(values))
        x_best, f_best = grid[best], float(values[best])
        step = (self.x_domain[:, 1] - self.x_domain[:, 0]) / max(per_axis - 1, 1)
        for _ in range(ORACLE_REFINEMENTS):
            local = np.stack([x_best - step, x_best + step], axis=1)
            local[:, 0] = np.maximum(local[:, 0], self.x_domain[:, 0])
            local[:, 1] = np.minimum(local[:, 1], self.x_domain[:, 1])
            candidates = box_grid(local, ORACLE_LOCAL)
            values = self.objective(candidates)
            idx = int(np.argmax(values))
            if values[idx] > f_best:
                x_best, f_best = candidates[idx], float(values[idx])
            step = 2.0 * step / (ORACLE_LOCAL - 1)
        self._optimum = OracleOptimum(
            x=x_best.tolist(), value=f_best, grid_points=grid.shape[0], refinements=ORACLE_REFINEMENTS
        )
        logger.info("Oracle: %s optimum %.6f at %s", self.env_name, f_best, np.round(x_best, 6).tolist())
        return self._optimum


class TransformEnvironment(BaseEnvironment):
    """Environments where x is a map h of a perturbed query.

    Without a level, x = h(a) + eps with eps ~ N(0, tau^2 I) in X. At tree
    depth l the query itself is perturbed inside A: uniformly over the depth-l
    cell around a, or with a Gaussian of sd tau_l; then x = h(u).
    """

    def __init__(self, spec: EnvSpec, cost_schedule: Optional[CostScheduleSpec] = None, max_depth: int = 6):
        super().__init__(spec)
        self.cost_schedule = cost_schedule or CostScheduleSpec()
        self.max_depth = max_depth
        self.half_width = 0.5 * (self.a_domain[:, 1] - self.a_domain[:, 0])

    @abstractmethod
    def transform(self, a) -> np.ndarray:
        """h(a) for every row of a, before perturbation and clamping."""

    def tau2(self, iteration: Optional[int] = None) -> float:
        return self.spec.tau2

    def clamp(self, x: np.ndarray) -> np.ndarray:
        if not self.spec.clamp:
            return x
        return np.clip(x, self.x_domain[:, 0], self.x_domain[:, 1])

    def objective_clamped(self, x) -> np.ndarray:
        return self.objective(self.clamp(np.asarray(x, dtype=float)))

    def noise_sd(self, level: Optional[int] = None) -> float:
        if level is None:
            return self.spec.noise_sd
        return self.cost_schedule.noise_sd(level)

    def check_level(self, level: Optional[int]) -> Optional[int]:
        if level is not None and not 0 <= level <= self.max_depth:
            raise DomainError(f"{self.env_name}: level {level} outside [0, {self.max_depth}]")
        return level

    def cell_half_width(self, level: int) -> np.ndarray:
        return self.half_width / 2.0 ** level

    def sample_x(self, a, rng, level=None, iteration=None) -> np.ndarray:
        a = np.asarray(a, dtype=float).reshape(-1, self.dim_a)
        level = self.check_level(level)
        if level is None:
            eps = np.sqrt(self.tau2(iteration)) * rng.standard_normal((a.shape[0], self.dim_x))
            return self.clamp(self.transform(a) + eps)
        if self.spec.conditional == "uniform-cell":
            r = self.cell_half_width(level)
            u = a + rng.uniform(-1.0, 1.0, size=a.shape) * r
        else:
            u = a + self.cost_schedule.tau(level, 1.0) * self.half_width * rng.standard_normal(a.shape)
        return self.clamp(self.transform(u))

    def _g_rule(self, a: np.ndarray, level, iteration, order: int) -> float:
        if level is None:
            nodes, weights = special.roots_hermitenorm(order)
            points, w = tensor_rule(nodes, weights, self.dim_x)
            x = self.transform(a.reshape(1, -1)) + np.sqrt(self.tau2(iteration)) * points
            return float(np.sum(w * self.objective_clamped(x)) / np.sqrt(2.0 * np.pi) ** self.dim_x)
        if self.spec.conditional == "uniform-cell":
            nodes, weights = special.roots_legendre(order)
            points, w = tensor_rule(nodes, weights, self.dim_a)
            u = a + points * self.cell_half_width(level)
            return float(np.sum(w * self.objective_clamped(self.transform(u))) / 2.0 ** self.dim_a)
        nodes, weights = special.roots_hermitenorm(order)
        points, w = tensor_rule(nodes, weights, self.dim_a)
        u = a + points * self.cost_schedule.tau(level, 1.0) * self.half_width
        return float(np.sum(w * self.objective_clamped(self.transform(u))) / np.sqrt(2.0 * np.pi) ** self.dim_a)

    def true_g(self, a, level=None, iteration=None) -> float:
        """Quadrature value of E[f(x) | a]; Hermite for Gaussian, Legendre for cells."""
        a = np.asarray(a, dtype=float).reshape(-1)
        level = self.check_level(level)
        order = self.spec.quadrature_order
        value = self._g_rule(a, level, iteration, order)
        refined = self._g_rule(a, level, iteration, 2 * order)
        if abs(refined - value) > QUADRATURE_TOL * max(1.0, abs(refined)):
            logger.debug("Quadrature: order %d changed g by %.2e at a=%s", order, abs(refined - value), a.tolist())
        return refined
