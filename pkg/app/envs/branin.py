"""Branin with linear and non-linear query transforms."""
import numpy as np

from envs.base import TransformEnvironment
from errors import DomainError
from models.experiment import BRANIN_X_DOMAIN, EnvSpec

BRANIN_A = 1.0
BRANIN_B = 5.1 / (4.0 * np.pi ** 2)
BRANIN_C = 5.0 / np.pi
BRANIN_R = 6.0
BRANIN_S = 10.0
BRANIN_T = 1.0 / (8.0 * np.pi)

_LOWER = np.array([lo for lo, _ in BRANIN_X_DOMAIN])
_UPPER = np.array([hi for _, hi in BRANIN_X_DOMAIN])


def branin_min(x) -> np.ndarray:
    """Standard Branin-Hoo, minimized at three points with value 0.397887."""
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    x1, x2 = x[:, 0], x[:, 1]
    return (
        BRANIN_A * (x2 - BRANIN_B * x1 ** 2 + BRANIN_C * x1 - BRANIN_R) ** 2
        + BRANIN_S * (1.0 - BRANIN_T) * np.cos(x1)
        + BRANIN_S
    )


def branin(x) -> np.ndarray:
    """Negated Branin, the maximization target; rejects points outside [-5, 10] x [0, 15]."""
    x = np.asarray(x, dtype=float).reshape(-1, 2)
    if np.any(x < _LOWER - 1e-9) or np.any(x > _UPPER + 1e-9):
        raise DomainError("Branin is defined on [-5, 10] x [0, 15]")
    return -branin_min(x)


def _clamp(x: np.ndarray, clamp: bool) -> np.ndarray:
    return np.clip(x, _LOWER, _UPPER) if clamp else x


def transform_lt(a, eps=0.0, clamp: bool = True) -> np.ndarray:
    """(15 a0 - 5, 15 a1) + eps, truncated to the Branin domain."""
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    x = np.stack([15.0 * a[:, 0] - 5.0, 15.0 * a[:, 1]], axis=1) + eps
    return _clamp(x, clamp)


def transform_nlt(a, eps=0.0, clamp: bool = True) -> np.ndarray:
    """(15 cos(pi a0 / 2) - 5, 15 cos(pi a1 / 2)) + eps, truncated to the Branin domain."""
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    x = np.stack([15.0 * np.cos(np.pi * a[:, 0] / 2.0) - 5.0, 15.0 * np.cos(np.pi * a[:, 1] / 2.0)], axis=1) + eps
    return _clamp(x, clamp)


class BraninEnvironment(TransformEnvironment):
    """Negated Branin on [-5, 10] x [0, 15], queried through a transform of [0, 1]^2."""

    def __init__(self, spec: EnvSpec, **kwargs):
        super().__init__(spec, **kwargs)
        self._transform = transform_nlt if spec.kind == "branin-nlt" else transform_lt

    def objective(self, x) -> np.ndarray:
        return branin(x)

    def transform(self, a) -> np.ndarray:
        return self._transform(a, clamp=False)
