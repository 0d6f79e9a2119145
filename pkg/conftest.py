"""Shared fixtures; puts app/ on the import path like the CLI does."""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent / "app"))

from models.experiment import EnvSpec, ExperimentConfig  # noqa: E402
from models.kernel import KernelSpec  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def se_kernel_1d():
    return KernelSpec(lengthscales=[0.15], variance=1.0)


@pytest.fixture
def small_custom_config():
    """A tiny 1-D experiment that runs in well under a second per job."""
    return ExperimentConfig(
        experiment_id="tiny",
        env=EnvSpec(kind="custom-1d", tau2=0.01, noise_sd=0.05),
        policies=["CMES", "random"],
        iterations=3,
        seeds=[0, 1],
        n_matched=20,
        x_grid_per_axis=15,
        a_grid_per_axis=15,
        max_value_samples=3,
    )
