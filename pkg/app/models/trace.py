"""Regret traces and run artifacts."""
from datetime import datetime
from typing import Any, Dict, List, Literal, Optional
from pydantic import BaseModel, ConfigDict, Field

from models.experiment import ExperimentConfig


class RegretRecord(BaseModel):
    """One iteration of a run."""

    model_config = ConfigDict(frozen=True)

    iteration: int = Field(..., ge=1)
    cumulative_cost: float
    a_query: List[float]
    level: Optional[int] = None
    z_obs: Optional[float] = None
    x_recommend: List[float]
    simple_regret: float
    instant_regret: float


class RegretTrace(BaseModel):
    """Per-iteration records plus the running maxima the regrets are taken against."""

    model_config = ConfigDict(frozen=True)

    optimum_value: float
    records: List[RegretRecord] = Field(default_factory=list)
    best_f: Optional[float] = None
    best_g: Optional[float] = None

    def __len__(self) -> int:
        return len(self.records)

    @property
    def simple_regrets(self) -> List[float]:
        return [r.simple_regret for r in self.records]

    @property
    def instant_regrets(self) -> List[float]:
        return [r.instant_regret for r in self.records]


class OracleOptimum(BaseModel):
    """Reference optimum of f, found on a dense grid and refined locally."""

    x: List[float]
    value: float
    grid_points: int
    refinements: int


class SeedResult(BaseModel):
    """Outcome of one (policy, seed) job."""

    policy: str
    seed: int
    status: Literal["ok", "failed", "exhausted"] = "ok"
    error: Optional[str] = None
    trace: Optional[RegretTrace] = None
    final_recommendation: Optional[List[float]] = None
    spent: float = 0.0
    diagnostics: Dict[str, Any] = Field(default_factory=dict)
    elapsed_seconds: float = 0.0


class RunArtifact(BaseModel):
    """Everything one `run` produces: config snapshot, per-seed traces and the oracle."""

    config: ExperimentConfig
    oracle: OracleOptimum
    results: List[SeedResult] = Field(default_factory=list)
    started_at: datetime = Field(default_factory=datetime.now)
    finished_at: Optional[datetime] = None

    @property
    def failed(self) -> List[SeedResult]:
        return [r for r in self.results if r.status == "failed"]

    def for_policy(self, policy: str) -> List[SeedResult]:
        return [r for r in self.results if r.policy == policy]
