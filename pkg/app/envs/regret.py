"""Simple and instant regret bookkeeping."""
from typing import Optional
import numpy as np

from envs.base import BaseEnvironment
from models.trace import RegretRecord, RegretTrace


def start_trace(env: BaseEnvironment) -> RegretTrace:
    return RegretTrace(optimum_value=env.optimum().value)


def _running_max(best: Optional[float], value: float) -> float:
    return value if best is None else max(best, value)


def regret_update(
    trace: RegretTrace,
    env: BaseEnvironment,
    x_t,
    a_t,
    level: Optional[int] = None,
    z_t: Optional[float] = None,
    cumulative_cost: Optional[float] = None,
    iteration: Optional[int] = None,
) -> RegretTrace:
    """Append one record with running-max simple regret (on f) and instant regret (on g)."""
    x_t = np.asarray(x_t, dtype=float).reshape(-1)
    a_t = np.asarray(a_t, dtype=float).reshape(-1)
    t = len(trace) + 1
    best_f = _running_max(trace.best_f, float(env.objective(x_t.reshape(1, -1))[0]))
    g_t = env.true_g(a_t, level=level, iteration=iteration if iteration is not None else t)
    best_g = _running_max(trace.best_g, g_t)
    record = RegretRecord(
        iteration=t,
        cumulative_cost=float(t if cumulative_cost is None else cumulative_cost),
        a_query=a_t.tolist(),
        level=level,
        z_obs=None if z_t is None else float(z_t),
        x_recommend=x_t.tolist(),
        simple_regret=trace.optimum_value - best_f,
        instant_regret=trace.optimum_value - best_g,
    )
    return trace.model_copy(update={"records": trace.records + [record], "best_f": best_f, "best_g": best_g})
