"""Budgeted multi-resolution search over a K-ary partition of A.

The tree bisects every axis of a cell, so K = 2^d. Leaves tile the domain;
the frontier holds the children of the leaves. Candidates are scored with
CMES divided by the cost of their depth, and the budget is debited per query.
"""
import itertools
import logging
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple
import numpy as np

from envs.base import BaseEnvironment
from envs.regret import regret_update, start_trace
from errors import CandidateSetExhausted, DomainError
from models.datasets import MatchedDataset, QueryLog
from models.experiment import CostScheduleSpec, ExperimentConfig, seed_streams
from models.trace import SeedResult
from services.acquisition import MaxValueSamples, cmes_scores, recommend_x, sample_max_values
from services.cmp_engine import aggregate_posterior, decondition, fit_cmo
from services.kernel_gp import constant_mean

logger = logging.getLogger(__name__)


@dataclass
class TreeNode:
    id: int
    depth: int
    center: np.ndarray
    radius: np.ndarray
    parent: Optional[int] = None
    children: List[int] = field(default_factory=list)

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.radius

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.radius


class PartitionTree:
    """Nodes are created on demand with sequential ids; children are ordered row-major."""

    def __init__(self, domain, max_depth: int):
        domain = np.asarray(domain, dtype=float)
        if domain.ndim != 2 or domain.shape[1] != 2 or np.any(domain[:, 1] <= domain[:, 0]):
            raise DomainError("Tree domain must be a non-degenerate box")
        if max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        self.domain = domain
        self.dim = domain.shape[0]
        self.branching = 2 ** self.dim
        self.max_depth = max_depth
        self.nodes: Dict[int, TreeNode] = {}
        self._offsets = np.array(list(itertools.product((-1.0, 1.0), repeat=self.dim)))
        self._add(0, 0.5 * (domain[:, 0] + domain[:, 1]), 0.5 * (domain[:, 1] - domain[:, 0]), None)

    def _add(self, depth: int, center: np.ndarray, radius: np.ndarray, parent: Optional[int]) -> TreeNode:
        node = TreeNode(id=len(self.nodes), depth=depth, center=center, radius=radius, parent=parent)
        self.nodes[node.id] = node
        return node

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def children(self, node_id: int) -> List[int]:
        """Child ids, created on first access; empty at max depth."""
        node = self.nodes[node_id]
        if node.depth >= self.max_depth:
            return []
        if not node.children:
            half = 0.5 * node.radius
            for offset in self._offsets:
                child = self._add(node.depth + 1, node.center + offset * half, half.copy(), node.id)
                node.children.append(child.id)
        return list(node.children)

    def volume(self, node_id: int) -> float:
        return float(np.prod(2.0 * self.nodes[node_id].radius))


@dataclass(frozen=True)
class ActiveSet:
    leaves: Tuple[int, ...]
    frontier: Tuple[int, ...]

    @property
    def candidates(self) -> Tuple[int, ...]:
        return tuple(sorted(set(self.leaves) | set(self.frontier)))


@dataclass(frozen=True)
class BudgetState:
    initial: float
    remaining: float
    spent: float = 0.0
    ledger: Tuple[Tuple[int, float], ...] = ()

    @classmethod
    def start(cls, budget: float) -> "BudgetState":
        return cls(initial=float(budget), remaining=float(budget))

    def debit(self, node_id: int, cost: float) -> "BudgetState":
        return BudgetState(
            initial=self.initial,
            remaining=self.remaining - cost,
            spent=self.spent + cost,
            ledger=self.ledger + ((node_id, cost),),
        )


@dataclass(frozen=True)
class CmetsState:
    tree: PartitionTree
    active: ActiveSet
    budget: BudgetState
    schedule: CostScheduleSpec


def frontier_of(tree: PartitionTree, leaves) -> Tuple[int, ...]:
    frontier = set()
    for leaf in leaves:
        frontier.update(tree.children(leaf))
    return tuple(sorted(frontier))


def init_tree(domain, K: int, max_depth: int) -> Tuple[PartitionTree, ActiveSet]:
    """Root spanning the domain as the only leaf, its K children as the frontier."""
    tree = PartitionTree(domain, max_depth)
    if K != tree.branching:
        raise ValueError(f"K must be 2^d = {tree.branching} for a {tree.dim}-D domain, got {K}")
    leaves = (tree.root.id,)
    return tree, ActiveSet(leaves=leaves, frontier=frontier_of(tree, leaves))


def update_active_set(tree: PartitionTree, active: ActiveSet, selected: int) -> ActiveSet:
    """Split the selected leaf, or the parent of the selected frontier node, then rebuild the frontier."""
    leaves = set(active.leaves)
    if selected in leaves:
        children = tree.children(selected)
        if children:
            leaves.discard(selected)
            leaves.update(children)
    elif selected in active.frontier:
        parent = tree.nodes[selected].parent
        leaves.discard(parent)
        leaves.update(tree.children(parent))
    else:
        raise ValueError(f"Node {selected} is not in the active set")
    ordered = tuple(sorted(leaves))
    return ActiveSet(leaves=ordered, frontier=frontier_of(tree, ordered))


def affordable_candidates(state: CmetsState) -> List[int]:
    return [
        node_id
        for node_id in state.active.candidates
        if state.schedule.cost(state.tree.nodes[node_id].depth) <= state.budget.remaining
    ]


def cmets_step(
    state: CmetsState,
    post_g=None,
    maxes: Optional[MaxValueSamples] = None,
    scores=None,
) -> Tuple[TreeNode, CmetsState]:
    """Pick the affordable candidate with the best score per unit cost and update sets and budget.

    Scores default to CMES at node centers; ties go to the shallower node, then the lower id.
    """
    if state.budget.remaining <= 0:
        raise CandidateSetExhausted("Budget exhausted")
    candidates = affordable_candidates(state)
    if not candidates:
        raise CandidateSetExhausted("No affordable candidate left")
    nodes = [state.tree.nodes[i] for i in candidates]
    if scores is None:
        centers = np.array([n.center for n in nodes])
        scores = cmes_scores(centers, post_g, maxes)
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (len(candidates),):
        raise ValueError(f"Expected {len(candidates)} scores, got shape {scores.shape}")
    costs = np.array([state.schedule.cost(n.depth) for n in nodes])
    depths = np.array([n.depth for n in nodes])
    ids = np.array(candidates)
    best = int(np.lexsort((ids, depths, -(scores / costs)))[0])
    chosen = nodes[best]
    active = update_active_set(state.tree, state.active, chosen.id)
    budget = state.budget.debit(chosen.id, float(costs[best]))
    return chosen, replace(state, active=active, budget=budget)


def run_cmets(config: ExperimentConfig, env: BaseEnvironment, d1: MatchedDataset, seed: int) -> SeedResult:
    """The full budgeted loop for one seed."""
    started = time.time()
    _, policy_rng, observe_rng = seed_streams(seed)
    prior_mean = constant_mean(config.prior_mean)
    cache = fit_cmo(d1, config.kernel_x, config.kernel_a)
    x_grid = env.x_grid(config.x_grid_per_axis, config.max_grid_points)

    tree, active = init_tree(env.a_domain, 2 ** env.dim_a, config.max_depth)
    state = CmetsState(tree=tree, active=active, budget=BudgetState.start(config.budget), schedule=config.cost_schedule)
    log = QueryLog.empty(env.dim_a)
    trace = start_trace(env)
    post_f = decondition(cache, log, prior_mean)
    status = "ok"

    while state.budget.remaining > 0 and affordable_candidates(state):
        post_g = aggregate_posterior(cache, log, prior_mean)
        maxes = sample_max_values(post_f, x_grid, config.max_value_samples, config.max_value_method, policy_rng)
        try:
            node, state = cmets_step(state, post_g, maxes)
        except CandidateSetExhausted as e:
            logger.info("CMETS: seed %d stopped early: %s", seed, e)
            status = "exhausted"
            break
        z = env.observe(node.center, observe_rng, level=node.depth)
        log = log.append(node.center, config.standardize(z), config.model_noise_var(env.noise_sd(node.depth)))
        post_f = decondition(cache, log, prior_mean)
        x_rec = recommend_x(post_f, x_grid)
        trace = regret_update(
            trace, env, x_rec, node.center, level=node.depth, z_t=z, cumulative_cost=state.budget.spent
        )
        logger.debug(
            "CMETS: seed %d step %d node %d depth %d remaining %.3f", seed, len(trace), node.id, node.depth,
            state.budget.remaining,
        )

    final = recommend_x(post_f, x_grid)
    logger.info("CMETS: seed %d finished %d queries, spent %.3f", seed, len(trace), state.budget.spent)
    return SeedResult(
        policy="CMETS",
        seed=seed,
        status=status,
        trace=trace,
        final_recommendation=final.tolist(),
        spent=state.budget.spent,
        diagnostics={"nodes": len(tree.nodes), "leaves": len(state.active.leaves)},
        elapsed_seconds=time.time() - started,
    )
