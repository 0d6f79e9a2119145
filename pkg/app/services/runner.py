"""Seeded experiment execution for every (policy, seed) job."""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime
from typing import List, Optional
import numpy as np

from config import Config
from envs import make_environment
from envs.base import BaseEnvironment
from envs.regret import regret_update, start_trace
from models.datasets import QueryLog
from models.experiment import CMETS, ExperimentConfig, PolicyKind, seed_streams
from models.trace import RunArtifact, SeedResult
from services.acquisition import (
    PolicyState,
    concentration_width,
    recommend_x,
    sample_max_values,
    select_index,
)
from services.cmets_tree import run_cmets
from services.cmp_engine import aggregate_posterior, decondition, fit_cmo
from services.kernel_gp import constant_mean, gp_regress

logger = logging.getLogger(__name__)


def leaf_centers(domain, depth: int) -> np.ndarray:
    """Centers of the 2^(d * depth) cells at a tree depth, row-major."""
    domain = np.asarray(domain, dtype=float)
    cells = 2 ** depth
    width = (domain[:, 1] - domain[:, 0]) / cells
    axes = [lo + (np.arange(cells) + 0.5) * w for (lo, _), w in zip(domain, width)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.reshape(-1) for m in mesh], axis=1)


def _policy_state(kind: PolicyKind, config, cache, log, post_f, x_grid, candidates, t, rng, prior_mean, noise_var):
    if kind is PolicyKind.RANDOM:
        return PolicyState(post_g=None, rng=rng)
    if kind.uses_matched_data:
        post_g = aggregate_posterior(cache, log, prior_mean)
        maxes = sample_max_values(post_f, x_grid, config.max_value_samples, config.max_value_method, rng)
        return PolicyState(post_g=post_g, maxes=maxes, noise_var=noise_var, quad_points=config.quad_points, rng=rng)

    # Baselines ignore D1: g is regressed on the aggregate observations alone
    post_g = gp_regress(config.kernel_a, log.a_queries, log.z_obs, log.noise_vars, prior_mean)
    state = PolicyState(post_g=post_g, noise_var=noise_var, rng=rng)
    if kind is PolicyKind.MES_ON_G:
        state.maxes = sample_max_values(post_g, candidates, config.max_value_samples, config.max_value_method, rng)
    elif kind is PolicyKind.UCB_ON_G:
        state.beta = concentration_width(t, candidates.shape[0], config.ucb_delta) ** 2
    elif kind is PolicyKind.EI_ON_G:
        state.incumbent = float(np.max(log.z_obs)) if len(log) else None
    return state


def run_sequential(
    config: ExperimentConfig,
    env: BaseEnvironment,
    policy: str,
    seed: int,
    candidates: np.ndarray,
    level: Optional[int] = None,
    query_cost: float = 1.0,
    max_queries: Optional[int] = None,
    budget: Optional[float] = None,
) -> SeedResult:
    """Query a fixed candidate set until the iteration count or the budget runs out."""
    started = time.time()
    kind = PolicyKind(policy)
    d1_rng, policy_rng, observe_rng = seed_streams(seed)
    d1 = env.generate_d1(config.n_matched, d1_rng, config.ridge_lambda)
    prior_mean = constant_mean(config.prior_mean)
    cache = fit_cmo(d1, config.kernel_x, config.kernel_a)
    x_grid = env.x_grid(config.x_grid_per_axis, config.max_grid_points)
    noise_var = config.model_noise_var(env.noise_sd(level))

    log = QueryLog.empty(env.dim_a)
    post_f = decondition(cache, log, prior_mean)
    trace = start_trace(env)
    remaining = budget
    t = 0
    while True:
        if max_queries is not None and t >= max_queries:
            break
        if remaining is not None and (remaining <= 0 or query_cost > remaining):
            break
        t += 1
        state = _policy_state(kind, config, cache, log, post_f, x_grid, candidates, t, policy_rng, prior_mean, noise_var)
        a_t = candidates[select_index(kind, candidates, state)]
        z = env.observe(a_t, observe_rng, level=level, iteration=t)
        log = log.append(a_t, config.standardize(z), noise_var)
        post_f = decondition(cache, log, prior_mean)
        x_rec = recommend_x(post_f, x_grid)
        if remaining is not None:
            remaining -= query_cost
        trace = regret_update(
            trace, env, x_rec, a_t, level=level, z_t=z, cumulative_cost=t * query_cost, iteration=t
        )
        logger.debug("Runner: %s seed %d t=%d simple regret %.4f", policy, seed, t, trace.records[-1].simple_regret)

    final = recommend_x(post_f, x_grid)
    return SeedResult(
        policy=policy,
        seed=seed,
        trace=trace,
        final_recommendation=final.tolist(),
        spent=t * query_cost,
        elapsed_seconds=time.time() - started,
    )


def run_seed(config: ExperimentConfig, policy: str, seed: int, env: Optional[BaseEnvironment] = None) -> SeedResult:
    """One (policy, seed) job; failures are recorded, never raised."""
    env = env or make_environment(config.env, config.cost_schedule, config.max_depth)
    try:
        if policy == CMETS:
            d1_rng, _, _ = seed_streams(seed)
            d1 = env.generate_d1(config.n_matched, d1_rng, config.ridge_lambda)
            result = run_cmets(config, env, d1, seed)
        elif config.mode == "budget":
            # Flat policies spend the budget on the finest cells
            result = run_sequential(
                config,
                env,
                policy,
                seed,
                candidates=leaf_centers(env.a_domain, config.max_depth),
                level=config.max_depth,
                query_cost=config.cost_schedule.cost(config.max_depth),
                budget=config.budget,
            )
        else:
            result = run_sequential(
                config,
                env,
                policy,
                seed,
                candidates=env.a_grid(config.a_grid_per_axis, config.max_grid_points),
                max_queries=config.iterations,
            )
    except Exception as e:
        logger.error("Runner: seed %d policy %s failed: %s", seed, policy, e)
        return SeedResult(policy=policy, seed=seed, status="failed", error=f"{type(e).__name__}: {e}")

    logger.info("Runner: seed %d policy %s finished %d iterations", seed, policy, len(result.trace))
    return result


def _run_job(args) -> SeedResult:
    config, policy, seed = args
    return run_seed(config, policy, seed)


def run_experiment(config: ExperimentConfig, jobs: Optional[int] = None) -> RunArtifact:
    """
    Run every policy on every seed.

    Args:
        config: Validated experiment config
        jobs: Worker processes; defaults to Config.JOBS. Results do not depend on it

    Returns:
        RunArtifact with one SeedResult per (policy, seed), failed jobs included
    """
    env = make_environment(config.env, config.cost_schedule, config.max_depth)
    artifact = RunArtifact(config=config, oracle=env.optimum())
    work = [(config, policy, seed) for policy in config.policies for seed in config.seeds]
    jobs = jobs or Config.JOBS
    logger.info("Runner: %d jobs (%s mode) on %s with %d workers", len(work), config.mode, config.env.kind, jobs)

    results: List[SeedResult]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_job, work))
    else:
        results = [run_seed(config, policy, seed, env=env) for _, policy, seed in work]

    failed = [r for r in results if r.status == "failed"]
    if failed:
        logger.warning("Runner: %d of %d jobs failed", len(failed), len(results))
    return artifact.model_copy(update={"results": results, "finished_at": datetime.now()})
