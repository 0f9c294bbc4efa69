"""Two-context procrastination rule and the DP oracle policy (unit costs)."""

from __future__ import annotations

import numpy as np

from ..dp import dp_solve
from .base import EpisodeSpec, Policy
from .estimators import UCBEstimator

__all__ = ["PB", "UCBPB", "DPPolicy"]


class PB(Policy):
    """Spend on the better context whenever budget remains; spend on the other
    one only when the budget is at least the remaining time.

    The better context is the one with the larger best reward (ties: lower
    index).
    """

    name = "PB"
    unit_cost_only = True
    two_contexts_only = True

    def __init__(self):
        pass

    def _reset(self, spec: EpisodeSpec, n: int) -> None:
        inst = spec.instance
        self._unit = spec.cost_scale.scale
        self._better = int(inst.context_ranking[0])
        self._best = np.asarray(inst.best_actions)

    def _better_context(self, t: int, n: int):
        return np.full(n, self._better), np.broadcast_to(self._best, (n, 2))

    def act(self, t, contexts, budget, uniforms):
        n = len(contexts)
        tau = self.spec_.T - t + 1
        better, best = self._better_context(t, n)
        can = budget >= self._unit
        take = can & ((contexts == better) | (budget >= tau * self._unit))
        return np.where(take, best[np.arange(n), contexts], 0).astype(np.int64)


class UCBPB(PB):
    """PB with the better context and actions chosen by upper confidence bounds.

    ``estimator="oracle"`` uses the true rewards, which reproduces PB.
    """

    name = "UCB-PB"

    def __init__(self, estimator: str = "ucb"):
        self.estimator = estimator

    def check_instance(self, instance) -> None:
        super().check_instance(instance)
        if self.estimator not in ("ucb", "oracle"):
            raise PolicyConfigError(f"{self.name}: estimator must be 'ucb' or 'oracle'")

    def _reset(self, spec, n):
        super()._reset(spec, n)
        self._est = UCBEstimator(n, 2, spec.instance.K)

    def _better_context(self, t, n):
        if self.estimator == "oracle":
            return super()._better_context(t, n)
        u_hat = self._est.values(t)
        # argmax picks the lowest index on ties
        return np.argmax(u_hat.max(axis=2), axis=1), np.argmax(u_hat, axis=2) + 1

    def observe(self, t, contexts, actions, rewards):
        if self.estimator != "oracle":
            self._est.update(contexts, actions, rewards)


class DPPolicy(Policy):
    """Follow the optimal Bellman decision from :func:`ccbandit.dp.dp_solve`."""

    name = "DP"
    unit_cost_only = True

    def __init__(self, exact: bool = False):
        self.exact = exact

    def _reset(self, spec, n):
        self._table = dp_solve(spec.instance, spec.T, spec.B, exact=self.exact)
        self._unit = spec.cost_scale.scale
        self._best = np.asarray(spec.instance.best_actions)

    def act(self, t, contexts, budget, uniforms):
        tau = self.spec_.T - t + 1
        units = np.minimum(budget // self._unit, self._table.B)
        take = (units >= 1) & self._table.take[tau, units, contexts]
        return np.where(take, self._best[contexts], 0).astype(np.int64)
