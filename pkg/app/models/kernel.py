"""Kernel specification shared by the spaces X and A."""
from typing import List, Literal
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.spatial.distance import cdist

from errors import DimensionMismatchError, NonFiniteInputError


def as_points(points, dim: int = None) -> np.ndarray:
    """Coerce a point list to a 2-D float array, checking dims and finiteness."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        # A flat list is a set of 1-D points unless the dim says otherwise
        arr = arr.reshape(1, -1) if dim is not None and dim > 1 and arr.size == dim else arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise DimensionMismatchError(f"Expected a list of vectors, got array of shape {arr.shape}")
    if dim is not None and arr.shape[0] > 0 and arr.shape[1] != dim:
        raise DimensionMismatchError(f"Points have dimension {arr.shape[1]}, kernel expects {dim}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInputError("Points contain non-finite coordinates")
    return arr


class KernelSpec(BaseModel):
    """Squared-exponential kernel with per-dimension lengthscales."""

    model_config = ConfigDict(frozen=True)

    family: Literal["squared-exponential"] = "squared-exponential"
    lengthscales: List[float] = Field(..., min_length=1, description="One positive lengthscale per input dimension")
    variance: float = Field(1.0, gt=0, description="Signal amplitude squared")

    @field_validator("lengthscales")
    @classmethod
    def _positive_lengthscales(cls, value: List[float]) -> List[float]:
        if any(not np.isfinite(v) or v <= 0 for v in value):
            raise ValueError("lengthscales must be finite and > 0")
        return value

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    def __call__(self, left, right) -> np.ndarray:
        """Cross-covariance matrix k(left_i, right_j)."""
        left = as_points(left, self.dim)
        right = as_points(right, self.dim)
        if left.shape[0] == 0 or right.shape[0] == 0:
            return np.zeros((left.shape[0], right.shape[0]))
        scale = np.asarray(self.lengthscales)
        sq = cdist(left / scale, right / scale, "sqeuclidean")
        return self.variance * np.exp(-0.5 * sq)

    def diag(self, points) -> np.ndarray:
        """k(p, p) for every point; constant for a stationary kernel."""
        points = as_points(points, self.dim)
        return np.full(points.shape[0], self.variance)
