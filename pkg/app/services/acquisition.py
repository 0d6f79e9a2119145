"""Query selection over A.

Max-value entropy scores for the indirect setting (CMES, noiseless and
noise-aware), plus the baselines UCB, EI, MES and EST on the aggregate
function g. All scores are vectorized over a candidate set and maximized
with ties broken towards the lowest index.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional
import numpy as np
from scipy import optimize, special
from scipy.stats import norm

from config import Config
from errors import CandidateSetExhausted
from models.experiment import PolicyKind
from services.kernel_gp import chol_factor

logger = logging.getLogger(__name__)

GUMBEL_QUANTILES = (0.25, 0.5, 0.75)
CHUNK_SIZE = 256
CONVERGENCE_TOL = 1e-4


@dataclass(frozen=True)
class MaxValueSamples:
    """Draws of max_x f(x) under the current posterior of f."""

    values: np.ndarray
    method: str
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def count(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class AcquisitionScore:
    candidate: np.ndarray
    score: float
    diagnostics: Dict[str, Any] = field(default_factory=dict)


@dataclass
class PolicyState:
    """Everything a policy needs to score a candidate set at one iteration.

    post_g is any posterior over A exposing mean/sd (the CMP aggregate
    posterior for CMES-family policies, a plain GP on D2 for baselines).
    """

    post_g: Any
    maxes: Optional[MaxValueSamples] = None
    incumbent: Optional[float] = None
    beta: Optional[float] = None
    noise_var: float = 0.1
    quad_points: int = 64
    rng: Optional[np.random.Generator] = None
    costs: Optional[np.ndarray] = None


def _as_rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _gumbel_fit(mean: np.ndarray, sd: np.ndarray):
    """Location/scale of a Gumbel matching three quantiles of prod Psi((y - m) / s)."""

    def log_cdf(y: float) -> float:
        return float(np.sum(special.log_ndtr((y - mean) / sd)))

    lo = float(np.min(mean - 5.0 * sd))
    hi = float(np.max(mean + 5.0 * sd))
    quantiles = []
    for q in GUMBEL_QUANTILES:
        target = math.log(q)
        left, right = lo, hi
        while log_cdf(left) > target:
            left -= right - left
        while log_cdf(right) < target:
            right += right - left
        quantiles.append(optimize.bisect(lambda y: log_cdf(y) - target, left, right, xtol=1e-6))
    y25, y50, y75 = quantiles
    b = (y75 - y25) / (math.log(-math.log(0.25)) - math.log(-math.log(0.75)))
    a = y50 + b * math.log(-math.log(0.5))
    return a, b


def sample_max_values(post_f, grid, count: int, method: str = "gumbel", rng=None) -> MaxValueSamples:
    """Draw `count` samples of max f over a finite grid of X."""
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 2 or grid.shape[0] == 0:
        raise CandidateSetExhausted("Max-value sampling needs a non-empty grid")
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = _as_rng(rng)
    mean = post_f.mean(grid)
    raw_var = post_f.raw_var(grid)

    if np.all(raw_var <= Config.VARIANCE_FLOOR):
        values = np.full(count, float(np.max(mean)))
        return MaxValueSamples(values=values, method=method, diagnostics={"degenerate": True})

    if method == "thompson-grid":
        cov = post_f.cov(grid, grid)
        cov = 0.5 * (cov + cov.T)
        start = Config.JITTER_START * max(float(np.mean(np.diag(cov))), Config.VARIANCE_FLOOR)
        factor = chol_factor(cov, jitter=start)
        draws = mean[:, None] + factor.lower @ rng.standard_normal((grid.shape[0], count))
        values = draws.max(axis=0)
        return MaxValueSamples(values=values, method=method, diagnostics={"jitter": factor.jitter})

    if method == "gumbel":
        sd = np.sqrt(np.maximum(raw_var, Config.VARIANCE_FLOOR))
        a, b = _gumbel_fit(mean, sd)
        uniform = rng.uniform(size=count)
        # Keep log(-log u) finite
        uniform = np.clip(uniform, 1e-300, 1.0 - 1e-16)
        values = a - b * np.log(-np.log(uniform))
        return MaxValueSamples(values=values, method=method, diagnostics={"location": a, "scale": b})

    raise ValueError(f"Unknown max-value method {method!r}")


def cmes_from_gamma(gamma) -> np.ndarray:
    """gamma psi(gamma) / (2 Psi(gamma)) - log Psi(gamma), clamped at zero.

    log_ndtr keeps log Psi finite for very negative gamma.
    """
    gamma = np.asarray(gamma, dtype=float)
    log_cdf = special.log_ndtr(gamma)
    ratio = np.exp(norm.logpdf(gamma) - log_cdf)
    return np.maximum(0.5 * gamma * ratio - log_cdf, 0.0)


def _standardized_gap(candidates, post_g, maxes: MaxValueSamples):
    nu = post_g.mean(candidates)
    sd = post_g.sd(candidates)
    gamma = (maxes.values[None, :] - nu[:, None]) / sd[:, None]
    return nu, sd, gamma


def cmes_scores(candidates, post_g, maxes: MaxValueSamples) -> np.ndarray:
    """Noiseless CMES for every candidate, averaged over the max-value samples."""
    candidates = np.asarray(candidates, dtype=float)
    _, _, gamma = _standardized_gap(candidates, post_g, maxes)
    return cmes_from_gamma(gamma).mean(axis=1)


def cmes_score(a, post_g, maxes: MaxValueSamples) -> AcquisitionScore:
    a = np.asarray(a, dtype=float).reshape(1, -1)
    _, _, gamma = _standardized_gap(a, post_g, maxes)
    score = float(cmes_from_gamma(gamma).mean())
    return AcquisitionScore(candidate=a[0], score=score, diagnostics={"gamma": gamma[0].tolist()})


def _truncated_entropy(nu, sd_g, noise_sd, f_star, nodes, weights) -> np.ndarray:
    """Differential entropy of z = g + eps given g <= f_star, by composite Gauss-Legendre.

    The density is Psi(gamma'(z)) phi((z - nu) / s_z) / (s_z Psi(gamma)); it
    falls off around the edge z_e where u(z) crosses f_star, over a width of
    order noise_sd * s_z / sd_g. Panels are split at z_e +- 8 widths and at
    the truncated mean +- 8 sd, so both the edge and the bulk get nodes.
    """
    s2 = sd_g ** 2
    n2 = noise_sd ** 2
    sz2 = s2 + n2
    sz = np.sqrt(sz2)
    s_post = np.sqrt(s2 * n2 / sz2)
    gamma = (f_star - nu) / sd_g
    log_cdf = special.log_ndtr(gamma)
    edge = nu + (f_star - nu) * sz2 / s2
    width = noise_sd * sz / sd_g

    mills = np.exp(norm.logpdf(gamma) - log_cdf)
    bulk_mean = nu - sd_g * mills
    bulk_sd = np.sqrt(np.maximum(s2 * (1.0 - gamma * mills - mills ** 2), 0.0) + n2)

    # g <= f_star, so z beyond f_star + 8 sigma carries no mass
    lo = np.minimum(nu, f_star) - 8.0 * sz
    hi = np.minimum(nu + 8.0 * sz, f_star + 8.0 * noise_sd)
    inner = np.stack(
        [edge - 8.0 * width, edge + 8.0 * width, bulk_mean - 8.0 * bulk_sd, bulk_mean + 8.0 * bulk_sd], axis=-1
    )
    inner = np.sort(np.clip(inner, lo[..., None], hi[..., None]), axis=-1)
    cuts = [lo] + [inner[..., k] for k in range(inner.shape[-1])] + [hi]
    log_norm = -np.log(sz) - log_cdf

    total = np.zeros(gamma.shape)
    for left, right in zip(cuts[:-1], cuts[1:]):
        half = 0.5 * (right - left)
        mid = 0.5 * (right + left)
        z = mid[..., None] + half[..., None] * nodes
        u = nu[..., None] + s2[..., None] * (z - nu[..., None]) / sz2[..., None]
        log_p = (
            special.log_ndtr((f_star[..., None] - u) / s_post[..., None])
            + norm.logpdf((z - nu[..., None]) / sz[..., None])
            + log_norm[..., None]
        )
        p = np.exp(log_p)
        total += half * np.sum(weights * (-p * log_p), axis=-1)
    return total


def truncated_observation_entropy(nu, sd_g, noise_sd: float, f_star, quad_points: int = 64):
    """Entropy of the truncated observation and a flag for quadrature convergence.

    Convergence is judged by repeating with twice the nodes.
    """
    nu, sd_g, f_star = (np.asarray(v, dtype=float) for v in np.broadcast_arrays(nu, sd_g, f_star))
    if noise_sd <= 0:
        raise ValueError("noise_sd must be > 0 for the noise-aware entropy")
    nodes, weights = special.roots_legendre(quad_points)
    coarse = _truncated_entropy(nu, sd_g, noise_sd, f_star, nodes, weights)
    nodes2, weights2 = special.roots_legendre(2 * quad_points)
    fine = _truncated_entropy(nu, sd_g, noise_sd, f_star, nodes2, weights2)
    change = np.abs(fine - coarse) / np.maximum(np.abs(fine), 1e-8)
    return fine, bool(np.all(change <= CONVERGENCE_TOL))


def cmes_noisy_scores(candidates, post_g, maxes: MaxValueSamples, noise_var: float, quad_points: int = 64):
    """Noise-aware CMES: H[z] minus the mean over f* of H[z | g <= f*].

    Returns the scores and whether every quadrature converged.
    """
    candidates = np.asarray(candidates, dtype=float)
    noise_sd = math.sqrt(noise_var)
    scores = np.empty(candidates.shape[0])
    converged = True
    for start in range(0, candidates.shape[0], CHUNK_SIZE):
        chunk = candidates[start:start + CHUNK_SIZE]
        nu = post_g.mean(chunk)
        sd = post_g.sd(chunk)
        f_star = maxes.values[None, :]
        entropy, ok = truncated_observation_entropy(nu[:, None], sd[:, None], noise_sd, f_star, quad_points)
        converged = converged and ok
        prior_entropy = 0.5 * np.log(2.0 * np.pi * np.e * (sd ** 2 + noise_var))
        scores[start:start + chunk.shape[0]] = np.maximum(prior_entropy - entropy.mean(axis=1), 0.0)
    if not converged:
        logger.warning("CMES-noisy: quadrature did not converge at %d nodes", quad_points)
    return scores, converged


def cmes_noisy_score(a, post_g, maxes: MaxValueSamples, noise_var: float, quad_points: int = 64) -> AcquisitionScore:
    a = np.asarray(a, dtype=float).reshape(1, -1)
    scores, converged = cmes_noisy_scores(a, post_g, maxes, noise_var, quad_points)
    return AcquisitionScore(candidate=a[0], score=float(scores[0]), diagnostics={"converged": converged})


def ucb_value(nu, sd, beta: float) -> np.ndarray:
    return np.asarray(nu, dtype=float) + math.sqrt(beta) * np.asarray(sd, dtype=float)


def ucb_score(candidates, post_g, beta: float) -> np.ndarray:
    """nu(a) + sqrt(beta) sigma(a)."""
    if beta < 0:
        raise ValueError("beta must be >= 0")
    candidates = np.asarray(candidates, dtype=float)
    return ucb_value(post_g.mean(candidates), post_g.sd(candidates), beta)


def ei_value(nu, sd, incumbent: Optional[float]) -> np.ndarray:
    nu = np.asarray(nu, dtype=float)
    if incumbent is None:
        return nu.copy()
    sd = np.asarray(sd, dtype=float)
    u = (nu - incumbent) / sd
    return (nu - incumbent) * norm.cdf(u) + sd * norm.pdf(u)


def ei_score(candidates, post_g, incumbent: Optional[float]) -> np.ndarray:
    """Expected improvement over the best aggregate observation; without one, the mean."""
    candidates = np.asarray(candidates, dtype=float)
    return ei_value(post_g.mean(candidates), post_g.sd(candidates), incumbent)


def est_scores(candidates, post_g, maxes: MaxValueSamples) -> np.ndarray:
    """-gamma at the mean of the max-value samples; argmax matches CMES for one sample."""
    candidates = np.asarray(candidates, dtype=float)
    f_star = float(np.mean(maxes.values))
    return -(f_star - post_g.mean(candidates)) / post_g.sd(candidates)


def concentration_width(t: int, n_candidates: int, delta: float) -> float:
    """zeta_t = sqrt(2 log(|A| pi^2 t^2 / (6 delta)))."""
    if t < 1 or n_candidates < 1:
        raise ValueError("t and n_candidates must be >= 1")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    return math.sqrt(2.0 * math.log(n_candidates * math.pi ** 2 * t ** 2 / (6.0 * delta)))


def policy_scores(policy: PolicyKind, candidates, state: PolicyState) -> np.ndarray:
    """Raw acquisition values for a deterministic policy."""
    policy = PolicyKind(policy)
    if policy in (PolicyKind.CMES, PolicyKind.MES_ON_G):
        return cmes_scores(candidates, state.post_g, _require(state.maxes, policy))
    if policy is PolicyKind.CMES_NOISY:
        scores, _ = cmes_noisy_scores(
            candidates, state.post_g, _require(state.maxes, policy), state.noise_var, state.quad_points
        )
        return scores
    if policy is PolicyKind.EST:
        return est_scores(candidates, state.post_g, _require(state.maxes, policy))
    if policy is PolicyKind.UCB_ON_G:
        return ucb_score(candidates, state.post_g, _require(state.beta, policy))
    if policy is PolicyKind.EI_ON_G:
        return ei_score(candidates, state.post_g, state.incumbent)
    raise ValueError(f"Policy {policy.value} has no score")


def _require(value, policy: PolicyKind):
    if value is None:
        raise ValueError(f"Policy {policy.value} is missing state it needs to score")
    return value


def select_index(policy: PolicyKind, candidates, state: PolicyState) -> int:
    """Index of the chosen candidate; ties go to the lowest index."""
    candidates = np.asarray(candidates, dtype=float)
    if candidates.ndim != 2 or candidates.shape[0] == 0:
        raise CandidateSetExhausted("No candidates to select from")
    policy = PolicyKind(policy)
    if policy is PolicyKind.RANDOM:
        return int(_as_rng(state.rng).integers(candidates.shape[0]))
    scores = policy_scores(policy, candidates, state)
    if state.costs is not None:
        scores = scores / np.asarray(state.costs, dtype=float)
    if not np.any(np.isfinite(scores)):
        raise CandidateSetExhausted(f"{policy.value}: no candidate has a finite score")
    return int(np.argmax(np.where(np.isfinite(scores), scores, -np.inf)))


def select_query(policy: PolicyKind, candidates, state: PolicyState) -> np.ndarray:
    candidates = np.asarray(candidates, dtype=float)
    return candidates[select_index(policy, candidates, state)]


def recommend_x(post_f, grid) -> np.ndarray:
    """Grid point maximizing the posterior mean of f; ties to the lowest index."""
    grid = np.asarray(grid, dtype=float)
    if grid.shape[0] == 0:
        raise CandidateSetExhausted("Recommendation grid is empty")
    return grid[int(np.argmax(post_f.mean(grid)))]
