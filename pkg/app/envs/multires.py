"""Multi-resolution Branin: feedback resolution and cost set by tree depth."""
from typing import Optional

from envs.branin import BraninEnvironment
from errors import DomainError


class MultiResEnvironment(BraninEnvironment):
    """Branin-LT whose conditional p_l(x | a) shrinks with the depth l of the query.

    At depth l the query is perturbed over the depth-l cell (uniform) or with
    sd tau_l (Gaussian) and observed with noise sd sigma_l from the cost schedule.
    Matched data is drawn without a depth, from the Branin-LT conditional
    x = h(a) + N(0, tau^2 I).
    """

    def require_level(self, level: Optional[int]) -> int:
        if level is None:
            raise DomainError("multires-tree observations need a tree depth")
        return level

    def observe(self, a, rng, level: Optional[int] = None, iteration: Optional[int] = None) -> float:
        return super().observe(a, rng, level=self.require_level(level), iteration=iteration)

    def true_g(self, a, level: Optional[int] = None, iteration: Optional[int] = None) -> float:
        return super().true_g(a, level=self.require_level(level), iteration=iteration)
