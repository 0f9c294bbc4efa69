"""Per-round decision interface shared by every policy.

Policies are driven in batches: one call to :meth:`Policy.act` decides round
``t`` for ``n`` independent runs at once.  Per-run state lives in arrays of
leading dimension ``n`` created by :meth:`Policy.reset`; hyperparameters are
constructor arguments only, so ``sklearn.base.clone`` gives a fresh copy for
every batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from sklearn.base import BaseEstimator

from .._validation import check_budget, check_positive_int, lcm_of_denominators
from ..core import CostScale, ProblemInstance

__all__ = ["EpisodeSpec", "Policy", "PolicyConfigError"]


class PolicyConfigError(ValueError):
    """The policy cannot run on this instance (e.g. two-context rule on J=3)."""


@dataclass(frozen=True)
class EpisodeSpec:
    """Everything a policy may know before round 1.

    ``cost_scale`` turns costs and the budget into integers; ``pi_num`` /
    ``pi_den`` are the context probabilities over a common denominator.
    """

    instance: ProblemInstance
    T: int
    B: Fraction
    cost_scale: CostScale
    pi_num: np.ndarray
    pi_den: int

    @classmethod
    def build(cls, instance: ProblemInstance, T: int, B) -> "EpisodeSpec":
        T = check_positive_int(T, "T", allow_zero=True)
        B = check_budget(B)
        den = lcm_of_denominators(instance.context_probs)
        num = np.array([int(p * den) for p in instance.context_probs], dtype=object)
        if den < 2**31:
            num = num.astype(np.int64)
        num.setflags(write=False)
        return cls(instance, T, B, CostScale.build(instance, B), num, den)

    @property
    def rho(self) -> Fraction:
        return self.B / self.T if self.T else Fraction(0)

    @property
    def budget0(self) -> int:
        return self.cost_scale.budget


class Policy(BaseEstimator):
    """Base class.  Subclasses implement :meth:`_reset` and :meth:`act`.

    ``act`` receives the 1-based round ``t``, the observed contexts (n,), the
    remaining budgets in scaled integer units (n,) and one uniform per run
    from the policy's own random stream.  It returns action labels (n,) in
    ``0..K``.  ``observe`` is called afterwards with the realized rewards.
    """

    name = "policy"
    unit_cost_only = False
    two_contexts_only = False

    def check_instance(self, instance: ProblemInstance) -> None:
        if self.unit_cost_only and not instance.is_unit_cost:
            raise PolicyConfigError(f"{self.name} requires unit costs")
        if self.two_contexts_only and instance.J != 2:
            raise PolicyConfigError(f"{self.name} requires exactly two contexts (J = 2), got J = {instance.J}")

    def reset(self, spec: EpisodeSpec, n_runs: int) -> "Policy":
        self.check_instance(spec.instance)
        self.spec_ = spec
        self.n_runs_ = n_runs
        self._reset(spec, n_runs)
        return self

    def _reset(self, spec: EpisodeSpec, n_runs: int) -> None:
        pass

    def act(self, t: int, contexts: np.ndarray, budget: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def observe(self, t: int, contexts: np.ndarray, actions: np.ndarray, rewards: np.ndarray) -> None:
        pass


def threshold_probs(
    order: np.ndarray,
    weights: np.ndarray,
    contexts: np.ndarray,
    budget_num: np.ndarray,
    horizon: int | np.ndarray,
) -> np.ndarray:
    """Probability of serving the observed context under a fill-in-order LP.

    ``order`` (n, J) lists contexts by priority, ``weights`` (n, J) are the
    integer expected costs pi_j * c_j over a common denominator, and the LP
    admits contexts while ``cumulative weight * horizon <= budget_num``.
    Fully admitted contexts get 1, the first context that does not fit gets
    the leftover share, the rest get 0.  All comparisons are on integers; the
    single division at the end is correctly rounded.
    """
    n = len(contexts)
    rows = np.arange(n)
    ranked = np.take_along_axis(weights, order, axis=1)
    cum = np.cumsum(ranked, axis=1)
    pos = np.argmax(order == contexts[:, None], axis=1)
    w = weights[rows, contexts]
    before = cum[rows, pos] - w
    num = budget_num - before * horizon
    den = w * horizon
    full = num >= den
    none = num <= 0
    safe = np.where(den > 0, den, 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac = np.asarray(num / safe, dtype=float)
    return np.where(full, 1.0, np.where(none, 0.0, frac))


def per_context_costs(spec: EpisodeSpec, policy_name: str) -> np.ndarray:
    """Scaled integer cost of each context when all its actions cost the same."""
    c = spec.cost_scale.costs
    if not (c == c[:, :1]).all():
        raise PolicyConfigError(f"{policy_name} needs every action of a context to have the same cost")
    return c[:, 0].copy()


def int_dtype_for(*bounds: int):
    """int64 when every product stays well inside its range, else Python ints."""
    return np.int64 if math.prod(max(1, int(b)) for b in bounds) < 2**62 else object
