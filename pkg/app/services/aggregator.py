"""Aggregate regret traces across seeds."""
import logging
from typing import Iterable, List
import numpy as np
import pandas as pd

from errors import ConfigError
from models.trace import RunArtifact

logger = logging.getLogger(__name__)

TRACE_COLUMNS = [
    "experiment_id",
    "policy",
    "seed",
    "iteration",
    "cumulative_cost",
    "a_query",
    "z_obs",
    "x_recommend",
    "simple_regret",
    "instant_regret",
]

SUMMARY_COLUMNS = ["policy", "axis_value", "mean_simple", "se_simple", "mean_instant", "se_instant"]

# Fields that may differ between artifacts that are merged
MERGEABLE_FIELDS = {"experiment_id", "seeds", "policies", "output_dir"}


def trace_frame(artifact: RunArtifact) -> pd.DataFrame:
    """One row per (policy, seed, iteration) over successful jobs."""
    rows = []
    for result in artifact.results:
        if result.status == "failed" or result.trace is None:
            continue
        for record in result.trace.records:
            rows.append({
                "experiment_id": artifact.config.experiment_id,
                "policy": result.policy,
                "seed": result.seed,
                "iteration": record.iteration,
                "cumulative_cost": record.cumulative_cost,
                "a_query": record.a_query,
                "z_obs": record.z_obs,
                "x_recommend": record.x_recommend,
                "simple_regret": record.simple_regret,
                "instant_regret": record.instant_regret,
            })
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def _standard_error(values: pd.Series) -> float:
    if len(values) < 2:
        return 0.0
    return float(values.std(ddof=1) / np.sqrt(len(values)))


class RegretAggregator:
    """Merge run artifacts of one experiment and summarize regrets per policy."""

    def __init__(self, artifacts: Iterable[RunArtifact]):
        """
        Collect artifacts that share one configuration.

        Args:
            artifacts: Run artifacts; only experiment_id, seeds, policies and output_dir may differ

        Raises:
            ConfigError: If there is nothing to merge or the configurations differ
        """
        self.artifacts: List[RunArtifact] = list(artifacts)
        if not self.artifacts:
            raise ConfigError("Nothing to aggregate")
        self._check_compatible()
        self.mode = self.artifacts[0].config.mode

    def _check_compatible(self):
        reference = self.artifacts[0].config.model_dump(exclude=MERGEABLE_FIELDS)
        for artifact in self.artifacts[1:]:
            if artifact.config.model_dump(exclude=MERGEABLE_FIELDS) != reference:
                raise ConfigError(
                    f"Artifact {artifact.config.experiment_id!r} was run with a different configuration"
                )

    def traces(self) -> pd.DataFrame:
        frames = [trace_frame(a) for a in self.artifacts]
        return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=TRACE_COLUMNS)

    def _aligned(self, traces: pd.DataFrame) -> pd.DataFrame:
        """(policy, seed, axis_value, simple, instant) on one axis shared by every policy."""
        if self.mode == "fixed":
            aligned = traces.rename(columns={"iteration": "axis_value"})
            return aligned[["policy", "seed", "axis_value", "simple_regret", "instant_regret"]]

        # Budget mode: step functions evaluated at the union of cost breakpoints over all policies
        axis = np.unique(traces["cumulative_cost"].to_numpy())
        parts = []
        for policy, group in traces.groupby("policy", sort=False):
            for seed, seed_rows in group.groupby("seed", sort=False):
                seed_rows = seed_rows.sort_values("cumulative_cost")
                costs = seed_rows["cumulative_cost"].to_numpy()
                idx = np.searchsorted(costs, axis, side="right") - 1
                idx = np.maximum(idx, 0)
                parts.append(pd.DataFrame({
                    "policy": policy,
                    "seed": seed,
                    "axis_value": axis,
                    "simple_regret": seed_rows["simple_regret"].to_numpy()[idx],
                    "instant_regret": seed_rows["instant_regret"].to_numpy()[idx],
                }))
        if not parts:
            return pd.DataFrame(columns=["policy", "seed", "axis_value", "simple_regret", "instant_regret"])
        return pd.concat(parts, ignore_index=True)

    def summary(self) -> pd.DataFrame:
        """
        Mean and standard error of both regrets per policy.

        Returns:
            DataFrame with SUMMARY_COLUMNS; the axis is the iteration in fixed mode and the
            cumulative cost in budget mode
        """
        traces = self.traces()
        if traces.empty:
            return pd.DataFrame(columns=SUMMARY_COLUMNS)
        aligned = self._aligned(traces)
        grouped = aligned.groupby(["policy", "axis_value"], sort=False)
        summary = grouped.agg(
            mean_simple=("simple_regret", "mean"),
            se_simple=("simple_regret", _standard_error),
            mean_instant=("instant_regret", "mean"),
            se_instant=("instant_regret", _standard_error),
        ).reset_index()
        summary = summary.sort_values(["policy", "axis_value"], kind="mergesort").reset_index(drop=True)
        logger.info("Aggregator: %d policies, %d rows", summary["policy"].nunique(), len(summary))
        return summary[SUMMARY_COLUMNS]


def aggregate(artifacts: Iterable[RunArtifact]) -> pd.DataFrame:
    """Per-policy mean and standard error of both regrets on a common axis."""
    return RegretAggregator(artifacts).summary()
