"""Experiment configuration, process settings and the command line."""
import json

import numpy as np
import pytest
from pydantic import ValidationError

from config import Config
from envs import make_environment
from main import main
from models.experiment import CostScheduleSpec, EnvSpec, ExperimentConfig, PolicyKind, seed_streams


def test_defaults():
    config = ExperimentConfig()
    assert config.iterations == 100
    assert config.mode == "fixed"
    assert config.env.kind == "branin-lt"
    assert config.kernel_x.lengthscales == [3.0, 3.0]
    assert config.kernel_a.lengthscales == [0.2, 0.2]
    assert PolicyKind.CMES_NOISY.value not in config.policies
    assert config.standardize(-54.0 + 51.0) == pytest.approx(1.0)
    assert config.noise_var == 0.0
    assert config.model_noise_var(0.51) == pytest.approx(1e-4)


def test_custom_env_defaults():
    config = ExperimentConfig(env=EnvSpec(kind="custom-1d"))
    assert config.env.x_domain == [(0.0, 1.0)]
    assert config.env.observation_mode == "sample"
    assert config.env.clamp is False
    assert config.target_shift == 0.0 and config.target_scale == 1.0
    assert config.kernel_x.lengthscales == [0.2]


def test_model_noise_follows_the_tree_depth():
    config = ExperimentConfig(env=EnvSpec(kind="multires-tree"), policies=["CMETS"], budget=10.0)
    env = make_environment(config.env, config.cost_schedule, config.max_depth)
    coarse = config.model_noise_var(env.noise_sd(0))
    fine = config.model_noise_var(env.noise_sd(6))
    assert coarse == pytest.approx((1.0 / 51.0) ** 2)
    # sigma_0 / sigma_6 = 7
    assert coarse / fine == pytest.approx(49.0, rel=1e-12)


def test_model_noise_extra_term_and_floor():
    config = ExperimentConfig(env=EnvSpec(kind="custom-1d"), noise_var=0.1)
    assert config.model_noise_var(0.2) == pytest.approx(0.14)
    assert ExperimentConfig(env=EnvSpec(kind="custom-1d")).model_noise_var(0.0) == pytest.approx(1e-10)
    with pytest.raises(ValidationError):
        ExperimentConfig(noise_var=-0.1)


def test_env_mode_defaults():
    assert EnvSpec(kind="multires-tree").observation_mode == "quadrature"
    assert EnvSpec(kind="branin-nlt").clamp is True
    bandit = EnvSpec(kind="bandit", n_arms=6, agent_dim=3)
    assert bandit.x_domain == [(0.0, 5.0)]
    assert len(bandit.a_domain) == 3


@pytest.mark.parametrize(
    "kwargs",
    [
        {"iterations": 5, "budget": 5.0},
        {"policies": ["CMETS"], "iterations": 5},
        {"policies": ["nope"]},
        {"policies": []},
        {"seeds": [1, 1]},
        {"quad_points": 32},
        {"ucb_delta": 1.0},
    ],
)
def test_invalid_configs(kwargs):
    with pytest.raises(ValidationError):
        ExperimentConfig(**kwargs)


def test_budget_override_switches_mode():
    config = ExperimentConfig(iterations=10).with_overrides(budget=30.0)
    assert config.mode == "budget"
    assert config.iterations is None


def test_cost_schedule():
    schedule = CostScheduleSpec()
    assert schedule.radius(0) == 0.5
    assert schedule.cost(5) == pytest.approx(3.0)
    assert schedule.noise_sd(0) == pytest.approx(1.0)
    assert schedule.tau(1, 2.0) == pytest.approx(1.0)


def test_seed_streams_are_reproducible_and_distinct():
    first = [g.uniform() for g in seed_streams(4)]
    again = [g.uniform() for g in seed_streams(4)]
    assert first == again
    assert len(set(first)) == 3


def test_jitter_schedule():
    levels = Config.jitter_schedule()
    assert levels[0] == pytest.approx(Config.JITTER_START)
    assert levels[-1] <= Config.JITTER_MAX * (1 + 1e-9)
    assert np.all(np.diff(levels) > 0)


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps({
        "experiment_id": "cli",
        "env": {"kind": "custom-1d", "tau2": 0.01, "noise_sd": 0.05},
        "policies": ["CMES", "random"],
        "iterations": 2,
        "seeds": [0, 1],
        "n_matched": 15,
        "x_grid_per_axis": 10,
        "a_grid_per_axis": 10,
        "max_value_samples": 2,
    }))
    return path


def test_cli_run_and_aggregate(config_file, tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(config_file), "--out", str(out), "--seeds", "3"]) == 0
    for name in ("traces.csv", "summary.csv", "artifact.json"):
        assert (out / name).exists()
    assert json.loads((out / "artifact.json").read_text())["config"]["seeds"] == [3]

    merged = tmp_path / "merged"
    assert main(["aggregate", str(out / "artifact.json"), "--out", str(merged)]) == 0
    assert (merged / "summary.csv").read_text().startswith("policy,axis_value,mean_simple")


def test_cli_policy_filter(config_file, tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", str(config_file), "--out", str(out), "--policy", "random"]) == 0
    artifact = json.loads((out / "artifact.json").read_text())
    assert {r["policy"] for r in artifact["results"]} == {"random"}


def test_cli_oracle(config_file, capsys):
    assert main(["oracle", "--config", str(config_file), "--samples", "2"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["env"] == "custom-1d"
    assert payload["optimum"]["value"] == pytest.approx(0.0, abs=1e-9)
    assert len(payload["g_samples"]) == 2


def test_cli_reports_bad_configs(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"iterations": 3, "budget": 3.0}))
    assert main(["run", "--config", str(bad)]) == 1
