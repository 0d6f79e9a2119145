"""Matched dataset D1 and the sequential query log D2."""
from typing import Any
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from errors import DimensionMismatchError
from models.kernel import as_points


class MatchedDataset(BaseModel):
    """Paired samples (x_j, a_j) that define the unknown conditional p(x|a)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    x_points: Any = Field(..., description="N x dim_x array of points in X")
    a_points: Any = Field(..., description="N x dim_a array of points in A")
    ridge_lambda: float = Field(1e-3, gt=0, description="CMO regularizer; the ridge term is N * lambda")

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, data: Any) -> Any:
        if isinstance(data, dict):
            data = dict(data)
            data["x_points"] = as_points(data.get("x_points"))
            data["a_points"] = as_points(data.get("a_points"))
            if data["x_points"].shape[0] != data["a_points"].shape[0]:
                raise DimensionMismatchError(
                    f"|x_points| = {data['x_points'].shape[0]} but |a_points| = {data['a_points'].shape[0]}"
                )
            if data["x_points"].shape[0] < 1:
                raise DimensionMismatchError("MatchedDataset needs at least one pair")
        return data

    @property
    def size(self) -> int:
        return self.x_points.shape[0]


class QueryLog(BaseModel):
    """Indirect queries a_t with aggregate feedback z_t and per-observation noise."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    a_queries: Any = Field(..., description="t x dim_a array of queried points")
    z_obs: Any = Field(..., description="length-t observations")
    noise_vars: Any = Field(..., description="length-t strictly positive noise variances")

    @model_validator(mode="before")
    @classmethod
    def _coerce(cls, data: Any) -> Any:
        if isinstance(data, dict):
            data = dict(data)
            a = np.asarray(data.get("a_queries"), dtype=float)
            if a.ndim == 1 and a.size == 0:
                a = a.reshape(0, 1)
            data["a_queries"] = a if a.ndim == 2 and a.shape[0] == 0 else as_points(a)
            data["z_obs"] = np.asarray(data.get("z_obs"), dtype=float).reshape(-1)
            data["noise_vars"] = np.asarray(data.get("noise_vars"), dtype=float).reshape(-1)
            t = data["a_queries"].shape[0]
            if data["z_obs"].shape[0] != t or data["noise_vars"].shape[0] != t:
                raise DimensionMismatchError("a_queries, z_obs and noise_vars must share one length")
            if np.any(~(data["noise_vars"] > 0)):
                raise ValueError("noise_vars must be strictly positive")
        return data

    @classmethod
    def empty(cls, dim_a: int) -> "QueryLog":
        return cls(a_queries=np.zeros((0, dim_a)), z_obs=[], noise_vars=[])

    def __len__(self) -> int:
        return self.a_queries.shape[0]

    def append(self, a, z: float, noise_var: float) -> "QueryLog":
        """Return a new log with one more observation."""
        a = np.asarray(a, dtype=float).reshape(1, -1)
        if len(self) and a.shape[1] != self.a_queries.shape[1]:
            raise DimensionMismatchError(
                f"Query has dimension {a.shape[1]}, log holds dimension {self.a_queries.shape[1]}"
            )
        return QueryLog(
            a_queries=np.vstack([self.a_queries.reshape(-1, a.shape[1]), a]),
            z_obs=np.append(self.z_obs, float(z)),
            noise_vars=np.append(self.noise_vars, float(noise_var)),
        )
