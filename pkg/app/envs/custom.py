"""One-dimensional test functions with an identity query map."""
import math
from typing import Optional
import numpy as np

from envs.base import TransformEnvironment
from models.experiment import EnvSpec


def tau2_schedule(t: int, dim: int = 1, scale: float = 1.0) -> float:
    """Shrinking conditional variance scale * t^-1/2 * (log t)^(dim/2); scale at t = 1."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if t == 1:
        return scale
    return scale * t ** -0.5 * math.log(t) ** (dim / 2.0)


class CustomEnvironment(TransformEnvironment):
    """f on [0, 1] with x = a + eps; no truncation to the domain."""

    def __init__(self, spec: EnvSpec, **kwargs):
        super().__init__(spec, **kwargs)
        value = spec.objective_value
        self._functions = {
            "quadratic": lambda x: -((x - value) ** 2),
            "linear": lambda x: value * x,
            "square": lambda x: x ** 2,
            "sine": lambda x: np.sin(2.0 * np.pi * x),
            "constant": lambda x: np.full_like(x, value),
        }

    def objective(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.dim_x)
        return self._functions[self.spec.objective](x[:, 0])

    def transform(self, a) -> np.ndarray:
        return np.asarray(a, dtype=float).reshape(-1, self.dim_a)

    def tau2(self, iteration: Optional[int] = None) -> float:
        if self.spec.resolution_schedule == "decreasing" and iteration is not None:
            return tau2_schedule(iteration, self.dim_a, self.spec.schedule_scale)
        return self.spec.tau2
