"""Experiment configuration: environments, cost schedules, policies."""
import math
from enum import Enum
from typing import List, Literal, Optional, Tuple
import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from models.kernel import KernelSpec

Box = List[Tuple[float, float]]

BRANIN_X_DOMAIN: Box = [(-5.0, 10.0), (0.0, 15.0)]
UNIT_SQUARE: Box = [(0.0, 1.0), (0.0, 1.0)]
UNIT_INTERVAL: Box = [(0.0, 1.0)]

MIN_NOISE_VAR = 1e-10


class PolicyKind(str, Enum):
    """Query-selection policies over A."""

    CMES = "CMES"
    CMES_NOISY = "CMES-noisy"
    MES_ON_G = "MES-on-g"
    UCB_ON_G = "UCB-on-g"
    EI_ON_G = "EI-on-g"
    EST = "EST-equivalent"
    RANDOM = "random"

    @property
    def uses_matched_data(self) -> bool:
        """CMES-family policies select with the CMP model; baselines only see D2."""
        return self in (PolicyKind.CMES, PolicyKind.CMES_NOISY, PolicyKind.EST)


CMETS = "CMETS"


def seed_streams(seed: int) -> Tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """Independent generators for one seed: matched data, policy randomness, observations."""
    d1, policy, observe = np.random.SeedSequence(seed).spawn(3)
    return np.random.default_rng(d1), np.random.default_rng(policy), np.random.default_rng(observe)


class EnvSpec(BaseModel):
    """Synthetic ground-truth environment."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["branin-lt", "branin-nlt", "multires-tree", "bandit", "custom-1d"] = "branin-lt"
    x_domain: Optional[Box] = None
    a_domain: Optional[Box] = None
    tau2: float = Field(0.5, ge=0, description="Conditional variance of x around h(a)")
    noise_sd: float = Field(0.1, ge=0, description="Observation noise sd for fixed-resolution envs")
    seed: int = 0
    observation_mode: Optional[Literal["sample", "quadrature"]] = None
    conditional: Literal["gaussian", "uniform-cell"] = "uniform-cell"
    quadrature_order: int = Field(32, ge=2)
    clamp: Optional[bool] = None

    # custom-1d
    objective: Literal["quadratic", "linear", "square", "sine", "constant"] = "quadratic"
    objective_value: float = Field(0.7, description="Peak of quadratic, slope of linear, value of constant")
    resolution_schedule: Optional[Literal["decreasing"]] = None
    schedule_scale: float = Field(1.0, gt=0)

    # bandit
    n_arms: int = Field(5, ge=2)
    agent_dim: int = Field(2, ge=1)

    @model_validator(mode="after")
    def _fill_domains(self) -> "EnvSpec":
        defaults = {
            "branin-lt": (BRANIN_X_DOMAIN, UNIT_SQUARE, "sample", True),
            "branin-nlt": (BRANIN_X_DOMAIN, UNIT_SQUARE, "sample", True),
            "multires-tree": (BRANIN_X_DOMAIN, UNIT_SQUARE, "quadrature", True),
            "bandit": (None, None, "quadrature", False),
            "custom-1d": (UNIT_INTERVAL, UNIT_INTERVAL, "sample", False),
        }
        x_dom, a_dom, mode, clamp = defaults[self.kind]
        if self.kind == "bandit":
            x_dom = [(0.0, float(self.n_arms - 1))]
            a_dom = [(0.0, 1.0)] * self.agent_dim
        if self.kind.startswith("branin") or self.kind == "multires-tree":
            if self.x_domain is not None and [tuple(b) for b in self.x_domain] != BRANIN_X_DOMAIN:
                raise ValueError("Branin environments use x_domain [-5,10] x [0,15]")
            if self.a_domain is not None and [tuple(b) for b in self.a_domain] != UNIT_SQUARE:
                raise ValueError("Branin environments use a_domain [0,1]^2")
        object.__setattr__(self, "x_domain", self.x_domain or x_dom)
        object.__setattr__(self, "a_domain", self.a_domain or a_dom)
        if self.observation_mode is None:
            object.__setattr__(self, "observation_mode", mode)
        if self.clamp is None:
            object.__setattr__(self, "clamp", clamp)
        for lo, hi in list(self.x_domain) + list(self.a_domain):
            if not hi > lo:
                raise ValueError(f"Degenerate domain interval ({lo}, {hi})")
        return self


class CostScheduleSpec(BaseModel):
    """Per-depth cost, noise and resolution for the partition tree.

    With the normalized radius d(l) = 2^-(l+1):
    cost(l) = cost_scale * log2(1 / d(l)), noise_sd(l) = noise_scale / cost(l).
    """

    model_config = ConfigDict(frozen=True)

    cost_scale: float = Field(0.5, gt=0)
    noise_scale: float = Field(0.5, gt=0)
    tau_scale: float = Field(1.0, gt=0, description="Gaussian-mode tau_l as a multiple of the cell half-width")

    @staticmethod
    def radius(level: int) -> float:
        return 2.0 ** -(level + 1)

    def cost(self, level: int) -> float:
        return self.cost_scale * math.log2(1.0 / self.radius(level))

    def noise_sd(self, level: int) -> float:
        return self.noise_scale / self.cost(level)

    def tau(self, level: int, half_width: float = 1.0) -> float:
        """Conditional sd at a depth, for a domain of the given half-width."""
        return self.tau_scale * half_width * 2.0 * self.radius(level)


class ExperimentConfig(BaseModel):
    """One experiment: environment, policies, seeds and model hyperparameters."""

    model_config = ConfigDict(frozen=True)

    experiment_id: str = "iqbo"
    env: EnvSpec = Field(default_factory=EnvSpec)
    policies: List[str] = Field(
        default_factory=lambda: [p.value for p in PolicyKind if p is not PolicyKind.CMES_NOISY]
    )
    iterations: Optional[int] = Field(None, ge=0)
    budget: Optional[float] = Field(None, gt=0)
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], min_length=1)

    x_grid_per_axis: int = Field(50, ge=1)
    a_grid_per_axis: int = Field(50, ge=1)
    max_grid_points: int = Field(2500, ge=1)

    kernel_x: Optional[KernelSpec] = None
    kernel_a: Optional[KernelSpec] = None
    ridge_lambda: float = Field(1e-3, gt=0)
    n_matched: int = Field(200, ge=1)
    prior_mean: float = 0.0
    noise_var: float = Field(
        0.0, ge=0, description="Extra model noise variance on every standardized observation, for sample-mode spread"
    )
    target_shift: Optional[float] = None
    target_scale: Optional[float] = Field(None, gt=0)

    max_value_samples: int = Field(10, ge=1)
    max_value_method: Literal["gumbel", "thompson-grid"] = "gumbel"
    quad_points: int = Field(64, ge=64)
    ucb_delta: float = Field(0.1, gt=0, lt=1)

    max_depth: int = Field(6, ge=1)
    cost_schedule: CostScheduleSpec = Field(default_factory=CostScheduleSpec)

    output_dir: Optional[str] = None

    @field_validator("policies")
    @classmethod
    def _known_policies(cls, value: List[str]) -> List[str]:
        known = {p.value for p in PolicyKind} | {CMETS}
        unknown = [p for p in value if p not in known]
        if unknown:
            raise ValueError(f"Unknown policies {unknown}; expected a subset of {sorted(known)}")
        if not value:
            raise ValueError("At least one policy is required")
        return value

    @field_validator("seeds")
    @classmethod
    def _distinct_seeds(cls, value: List[int]) -> List[int]:
        if len(set(value)) != len(value):
            raise ValueError("seeds must be distinct")
        return value

    @model_validator(mode="after")
    def _one_mode(self) -> "ExperimentConfig":
        if self.iterations is not None and self.budget is not None:
            raise ValueError("Set exactly one of iterations or budget")
        if self.iterations is None and self.budget is None:
            object.__setattr__(self, "iterations", 100)
        if CMETS in self.policies and self.budget is None:
            raise ValueError("CMETS runs in budget mode; set budget")
        branin = self.env.kind.startswith("branin") or self.env.kind == "multires-tree"
        if self.target_shift is None:
            object.__setattr__(self, "target_shift", -54.0 if branin else 0.0)
        if self.target_scale is None:
            object.__setattr__(self, "target_scale", 51.0 if branin else 1.0)
        if self.kernel_x is None:
            dim = len(self.env.x_domain)
            scale = 3.0 if branin else (0.1 if self.env.kind == "bandit" else 0.2)
            object.__setattr__(self, "kernel_x", KernelSpec(lengthscales=[scale] * dim, variance=1.0))
        if self.kernel_a is None:
            dim = len(self.env.a_domain)
            object.__setattr__(self, "kernel_a", KernelSpec(lengthscales=[0.2] * dim, variance=1.0))
        return self

    @property
    def mode(self) -> str:
        return "budget" if self.budget is not None else "fixed"

    def standardize(self, z: float) -> float:
        """Observation on the scale the models see."""
        return (z - self.target_shift) / self.target_scale

    def model_noise_var(self, noise_sd: float) -> float:
        """Model noise for one observation: (sigma / target_scale)^2 plus the optional extra term.

        Floored at MIN_NOISE_VAR so noiseless environments still give a valid query log.
        """
        return max(self.noise_var + (noise_sd / self.target_scale) ** 2, MIN_NOISE_VAR)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        """Re-validated copy with some fields replaced."""
        data = self.model_dump()
        data.update(changes)
        if "budget" in changes and changes["budget"] is not None:
            data["iterations"] = None
        return ExperimentConfig.model_validate(data)
