"""Threshold LP policies for unit costs: ALP, FLP, EALP, EALP2 and their UCB versions.

All of them solve the same single-round LP each round and only differ in what
they plug into it:

* the budget ratio: remaining b / tau (adaptive) or the initial B / T (fixed);
* the context probabilities: known pi, or empirical frequencies;
* the best rewards: known u*, or upper confidence bounds.

The LP is evaluated on scaled integers (see ``threshold_probs``), so a ratio
that lands exactly on a cumulative probability is handled exactly.
"""

from __future__ import annotations

import warnings

import numpy as np

from ..core import build_gap_table
from .base import EpisodeSpec, Policy, PolicyConfigError, int_dtype_for, per_context_costs, threshold_probs
from .estimators import ContextCounter, HorizonWarning, UCBEstimator, delta_lcb, ealp2_t1

__all__ = [
    "ALP",
    "FLP",
    "EALP",
    "EALP2",
    "UCBALP",
    "UCBFLP",
    "UCBEALP",
    "UCBEALP2",
]


class _ThresholdPolicy(Policy):
    fixed_ratio = False
    empirical = False
    learning = False

    def check_instance(self, instance) -> None:
        super().check_instance(instance)
        if not instance.is_unit_cost and not getattr(self, "allow_context_costs", False):
            raise PolicyConfigError(
                f"{self.name} requires unit costs (allow_context_costs=True enables the experimental "
                "equal-cost-per-context variant)"
            )
        if self.learning and getattr(self, "estimator", "ucb") not in ("ucb", "oracle"):
            raise PolicyConfigError(f"{self.name}: estimator must be 'ucb' or 'oracle'")

    def _reset(self, spec: EpisodeSpec, n: int) -> None:
        inst = spec.instance
        self._J, self._K = inst.J, inst.K
        self._ccost = per_context_costs(spec, self.name)
        self._dtype = int_dtype_for(spec.budget0 + 1, max(spec.pi_den, spec.T, 1), spec.T + 1, int(self._ccost.max()), inst.J)
        if self._dtype is object:
            self._ccost = self._ccost.astype(object)
        # known statistics: ranking by u*/c with index tie-break
        score = inst.best_rewards / self._ccost.astype(float)
        self._known_order = np.lexsort((np.arange(inst.J), -score))
        self._known_best = np.asarray(inst.best_actions)
        self._rows = np.arange(n)
        if self.learning:
            self._est = UCBEstimator(n, inst.J, inst.K)
        if self.empirical:
            self._ctx = ContextCounter(n, inst.J)
        self._B0 = spec.budget0

    # -- pieces that subclasses vary -------------------------------------------

    def _uses_oracle(self) -> bool:
        return getattr(self, "estimator", "ucb") == "oracle"

    def _ranking(self, t: int, n: int):
        """(order (n, J), best action per context (n, J))."""
        if not self.learning or self._uses_oracle():
            order = np.broadcast_to(self._known_order, (n, self._J))
            best = np.broadcast_to(self._known_best, (n, self._J))
            return order, best
        u_hat = self._est.values(t)
        best_u = u_hat.max(axis=2)
        best = np.argmax(u_hat, axis=2) + 1
        order = np.argsort(-(best_u / self._ccost.astype(float)), axis=1, kind="stable")
        return order, best

    def _weights(self, n: int):
        """(integer weights pi_j * c_j (n, J), common denominator (n,) or scalar)."""
        if self.empirical and not getattr(self, "use_true_probs", False):
            counts = self._ctx.counts.astype(self._dtype)
            return counts * self._ccost, self._ctx.totals().astype(self._dtype)
        w = self.spec_.pi_num.astype(self._dtype) * self._ccost
        return np.broadcast_to(w, (n, self._J)), self.spec_.pi_den

    # -- interface --------------------------------------------------------------

    def _pre_decide(self, t: int, contexts: np.ndarray) -> None:
        if self.empirical:
            self._ctx.update(contexts)

    def act(self, t, contexts, budget, uniforms):
        n = len(contexts)
        self._pre_decide(t, contexts)
        order, best = self._ranking(t, n)
        weights, den = self._weights(n)
        b = budget.astype(self._dtype)
        if self.fixed_ratio:
            budget_num, horizon = self._B0 * den, self.spec_.T
        else:
            budget_num, horizon = b * den, self.spec_.T - t + 1
        p = threshold_probs(order, weights, contexts, budget_num, horizon)
        self.last_probs_ = p
        cost = self._ccost[contexts]
        take = (uniforms < p) & (budget >= cost) & (budget > 0)
        return np.where(take, best[self._rows[:n], contexts], 0).astype(np.int64)

    def observe(self, t, contexts, actions, rewards):
        if self.learning and not self._uses_oracle():
            self._est.update(contexts, actions, rewards)


class ALP(_ThresholdPolicy):
    """Adaptive LP with known statistics: ratio b/tau, known pi and u*."""

    name = "ALP"

    def __init__(self, allow_context_costs: bool = False):
        self.allow_context_costs = allow_context_costs


class FLP(_ThresholdPolicy):
    """Same LP with the ratio fixed at B/T for the whole episode."""

    name = "FLP"
    fixed_ratio = True

    def __init__(self, allow_context_costs: bool = False):
        self.allow_context_costs = allow_context_costs


class EALP(_ThresholdPolicy):
    """ALP with the empirical context distribution (updated before each decision).

    ``use_true_probs=True`` substitutes the true pi, which makes the policy
    coincide with ALP.
    """

    name = "EALP"
    empirical = True

    def __init__(self, use_true_probs: bool = False, allow_context_costs: bool = False):
        self.use_true_probs = use_true_probs
        self.allow_context_costs = allow_context_costs


class _Truncated:
    """Stop updating the empirical distribution after a learning stage.

    ``t1`` is an explicit round count, ``"known"`` (computed from ``delta``)
    or ``"adaptive"`` (stop once the lower confidence bound on the boundary
    distance is tight enough; never stops on a boundary).
    """

    def _setup_truncation(self, spec: EpisodeSpec) -> None:
        inst = spec.instance
        self._ranking_known = np.asarray(build_gap_table(inst).ranking)
        self._t1 = None
        self.t1_ = np.zeros(self.n_runs_, dtype=np.int64)
        if self.t1 == "adaptive":
            return
        if self.t1 == "known":
            if self.delta is None:
                raise PolicyConfigError(f"{self.name}: t1='known' needs delta")
            self._t1 = ealp2_t1(spec.T, inst.J, self.delta) if spec.T > 1 else spec.T
        elif isinstance(self.t1, (int, np.integer)) and not isinstance(self.t1, bool):
            if self.t1 < 1:
                raise PolicyConfigError(f"{self.name}: t1 must be >= 1")
            if self.t1 > spec.T:
                warnings.warn(f"T1 = {self.t1} exceeds T = {spec.T}; clamped", HorizonWarning, stacklevel=3)
            self._t1 = min(int(self.t1), spec.T)
        else:
            raise PolicyConfigError(f"{self.name}: t1 must be an int, 'known' or 'adaptive', got {self.t1!r}")

    def _truncate(self, t: int) -> None:
        ctx = self._ctx
        if self._t1 is not None:
            if t == self._t1:
                ctx.frozen[:] = True
                self.t1_[:] = t
            return
        live = ~ctx.frozen
        if not live.any():
            return
        pi_hat = ctx.counts[:, self._ranking_known] / float(t)
        _, stop = delta_lcb(pi_hat, self.spec_.rho, t, self.spec_.T, self._J)
        newly = live & stop
        ctx.frozen |= newly
        self.t1_[newly] = t


class EALP2(_Truncated, _ThresholdPolicy):
    """EALP whose empirical distribution is frozen after round T1."""

    name = "EALP2"
    empirical = True

    def __init__(self, t1="adaptive", delta=None, allow_context_costs: bool = False):
        self.t1 = t1
        self.delta = delta
        self.allow_context_costs = allow_context_costs

    def _reset(self, spec, n):
        super()._reset(spec, n)
        self._setup_truncation(spec)

    def _pre_decide(self, t, contexts):
        super()._pre_decide(t, contexts)
        self._truncate(t)


class UCBALP(_ThresholdPolicy):
    """ALP on upper confidence bounds.

    Contexts are ranked by max_k u^_{j,k}(t) (ties: lowest index) and the
    chosen action is argmax_k u^_{j,k}(t).  ``estimator="oracle"`` uses the
    true rewards instead, which reproduces ALP.
    """

    name = "UCB-ALP"
    learning = True

    def __init__(self, estimator: str = "ucb", allow_context_costs: bool = False):
        self.estimator = estimator
        self.allow_context_costs = allow_context_costs


class UCBFLP(UCBALP):
    name = "UCB-FLP"
    fixed_ratio = True


class UCBEALP(_ThresholdPolicy):
    name = "UCB-EALP"
    learning = True
    empirical = True

    def __init__(self, estimator: str = "ucb", use_true_probs: bool = False, allow_context_costs: bool = False):
        self.estimator = estimator
        self.use_true_probs = use_true_probs
        self.allow_context_costs = allow_context_costs


class UCBEALP2(_Truncated, _ThresholdPolicy):
    name = "UCB-EALP2"
    learning = True
    empirical = True

    def __init__(self, t1="adaptive", delta=None, estimator: str = "ucb", allow_context_costs: bool = False):
        self.t1 = t1
        self.delta = delta
        self.estimator = estimator
        self.allow_context_costs = allow_context_costs

    def _reset(self, spec, n):
        super()._reset(spec, n)
        self._setup_truncation(spec)

    def _pre_decide(self, t, contexts):
        super()._pre_decide(t, contexts)
        self._truncate(t)
