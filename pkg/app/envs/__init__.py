"""Synthetic environments."""
from typing import Optional

from envs.bandit import BanditEnvironment
from envs.base import BaseEnvironment
from envs.branin import BraninEnvironment
from envs.custom import CustomEnvironment
from envs.multires import MultiResEnvironment
from models.experiment import CostScheduleSpec, EnvSpec


def make_environment(
    spec: EnvSpec,
    cost_schedule: Optional[CostScheduleSpec] = None,
    max_depth: int = 6,
) -> BaseEnvironment:
    """Instantiate the environment an EnvSpec names."""
    if spec.kind == "bandit":
        return BanditEnvironment(spec)
    kwargs = {"cost_schedule": cost_schedule, "max_depth": max_depth}
    if spec.kind == "multires-tree":
        return MultiResEnvironment(spec, **kwargs)
    if spec.kind == "custom-1d":
        return CustomEnvironment(spec, **kwargs)
    return BraninEnvironment(spec, **kwargs)
