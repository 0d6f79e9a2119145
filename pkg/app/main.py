"""Command-line entry point: run experiments, merge artifacts, inspect environments."""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from config import Config
from envs import make_environment
from errors import ConfigError, IqboError
from models.experiment import ExperimentConfig
from services.aggregator import aggregate
from services.artifact_store import ArtifactStore
from services.runner import run_experiment

logger = logging.getLogger("iqbo")


def load_config(path: str, **overrides) -> ExperimentConfig:
    """Validate an experiment config from a JSON file, applying CLI overrides."""
    try:
        text = Path(path).read_text(encoding="utf-8")
        config = ExperimentConfig.model_validate_json(text)
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return config.with_overrides(**overrides) if overrides else config
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}:\n{e}") from e


def _parse_seeds(text: str):
    return [int(s) for s in text.split(",") if s.strip()]


def cmd_run(args) -> int:
    config = load_config(
        args.config,
        seeds=_parse_seeds(args.seeds) if args.seeds else None,
        policies=args.policy or None,
        output_dir=args.out,
    )
    artifact = run_experiment(config, jobs=args.jobs)
    store = ArtifactStore(args.out or config.output_dir)
    store.emit(artifact)
    failed = artifact.failed
    for result in failed:
        logger.error("Run: %s seed %d failed: %s", result.policy, result.seed, result.error)
    return 1 if failed else 0


def cmd_aggregate(args) -> int:
    artifacts = [ArtifactStore.load(path) for path in args.artifacts]
    summary = aggregate(artifacts)
    ArtifactStore(args.out).write_summary(summary)
    print(summary.to_string(index=False))
    return 0


def cmd_oracle(args) -> int:
    config = load_config(args.config)
    env = make_environment(config.env, config.cost_schedule, config.max_depth)
    optimum = env.optimum()
    rng = np.random.default_rng(config.env.seed)
    lo, hi = env.a_domain[:, 0], env.a_domain[:, 1]
    samples = []
    for a in lo + (hi - lo) * rng.uniform(size=(args.samples, env.dim_a)):
        level = config.max_depth if config.env.kind == "multires-tree" else None
        samples.append({"a": a.round(6).tolist(), "g": env.true_g(a, level=level)})
    print(json.dumps({"env": config.env.kind, "optimum": optimum.model_dump(), "g_samples": samples}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iqbo", description="Indirect-query Bayesian optimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run an experiment config")
    run.add_argument("--config", required=True, help="Path to an experiment JSON file")
    run.add_argument("--out", help="Output directory (default: config output_dir or IQBO_OUTPUT_DIR)")
    run.add_argument("--seeds", help="Comma-separated seeds overriding the config")
    run.add_argument("--policy", action="append", help="Restrict to a policy; repeatable")
    run.add_argument("--jobs", type=int, default=None, help="Parallel (policy, seed) jobs")
    run.set_defaults(func=cmd_run)

    agg = sub.add_parser("aggregate", help="Merge artifact.json files into one summary")
    agg.add_argument("artifacts", nargs="+", help="artifact.json files")
    agg.add_argument("--out", default=None, help="Directory for summary.csv")
    agg.set_defaults(func=cmd_aggregate)

    oracle = sub.add_parser("oracle", help="Print the environment optimum and samples of g")
    oracle.add_argument("--config", required=True)
    oracle.add_argument("--samples", type=int, default=5)
    oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=Config.LOG_LEVEL, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IqboError as e:
        logger.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
