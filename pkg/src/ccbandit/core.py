"""Domain types and the stochastic environment.

Contexts are 0-based internally (``0 .. J-1``).  Actions use ``1 .. K`` with
``0`` reserved for the dummy (skip) action, so the action labels that appear
in traces and decisions match the usual bandit notation.

Budgets and costs are held as exact rationals.  Hot loops in the harness work
on scaled integers derived from them (see :class:`CostScale`), so the hard
budget constraint is checked without any floating point drift.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from ._validation import (
    as_fraction,
    as_fraction_matrix,
    check_budget,
    check_positive_int,
    lcm_of_denominators,
    normalized_probs,
)

__all__ = [
    "BudgetViolation",
    "RewardFamily",
    "ProblemInstance",
    "CostScale",
    "BudgetClock",
    "TraceRow",
    "EpisodeTrace",
    "GapTable",
    "sample_context",
    "sample_reward",
    "apply_action",
    "build_gap_table",
]


class BudgetViolation(RuntimeError):
    """A policy tried to take an action it cannot afford."""


class RewardFamily(str, enum.Enum):
    BERNOULLI = "bernoulli"
    DETERMINISTIC = "deterministic"


def _product_rewards(J: int, K: int) -> list[list[Fraction]]:
    return [[Fraction((j + 1) * (k + 1), J * K) for k in range(K)] for j in range(J)]


@dataclass(frozen=True)
class ProblemInstance:
    """A finite contextual bandit with fixed per-(context, action) costs.

    ``context_probs`` has length J, ``expected_rewards`` and ``costs`` are J x K.
    Inputs may be floats, ints, Fractions or rational strings; they are stored
    as Fractions.  A probability vector that misses 1 by less than 1e-12 is
    renormalized exactly.
    """

    context_probs: tuple
    expected_rewards: tuple
    costs: tuple
    reward_family: RewardFamily = RewardFamily.BERNOULLI

    def __post_init__(self):
        pi = normalized_probs(
            tuple(as_fraction(p, f"context_probs[{i}]") for i, p in enumerate(self.context_probs))
        )
        u = as_fraction_matrix(self.expected_rewards, "expected_rewards")
        c = as_fraction_matrix(self.costs, "costs")
        J = len(pi)
        if len(u) != J or len(c) != J:
            raise ValueError(
                f"expected_rewards and costs need {J} rows (one per context), got {len(u)} and {len(c)}"
            )
        K = len(u[0]) if u else 0
        if K == 0:
            raise ValueError("need at least one action")
        for j in range(J):
            if len(u[j]) != K or len(c[j]) != K:
                raise ValueError(f"row {j}: expected {K} actions in rewards and costs")
            for k in range(K):
                if not 0 <= u[j][k] <= 1:
                    raise ValueError(f"expected_rewards[{j}][{k}] = {float(u[j][k])} is outside [0, 1]")
                if c[j][k] <= 0:
                    raise ValueError(f"costs[{j}][{k}] must be > 0, got {c[j][k]}")
        object.__setattr__(self, "context_probs", pi)
        object.__setattr__(self, "expected_rewards", u)
        object.__setattr__(self, "costs", c)
        object.__setattr__(self, "reward_family", RewardFamily(self.reward_family))

    @classmethod
    def create(
        cls,
        context_probs: Sequence,
        expected_rewards: Sequence[Sequence] | str,
        costs: Sequence[Sequence] | str = "unit",
        reward_family: RewardFamily | str = RewardFamily.BERNOULLI,
        num_actions: int | None = None,
    ) -> "ProblemInstance":
        """Build an instance, accepting ``"unit"`` costs and the ``"jk/(JK)"`` reward generator."""
        J = len(context_probs)
        if isinstance(expected_rewards, str):
            if expected_rewards.replace(" ", "") != "jk/(JK)":
                raise ValueError(f"unknown reward generator {expected_rewards!r}; only 'jk/(JK)' is supported")
            if num_actions is None:
                raise ValueError("the jk/(JK) generator needs num_actions")
            expected_rewards = _product_rewards(J, check_positive_int(num_actions, "num_actions"))
        K = len(expected_rewards[0])
        if isinstance(costs, str):
            if costs != "unit":
                raise ValueError(f"costs must be a matrix or 'unit', got {costs!r}")
            costs = [[1] * K for _ in range(J)]
        return cls(tuple(context_probs), tuple(map(tuple, expected_rewards)), tuple(map(tuple, costs)), reward_family)

    @property
    def num_contexts(self) -> int:
        return len(self.context_probs)

    @property
    def num_actions(self) -> int:
        return len(self.expected_rewards[0])

    J = num_contexts
    K = num_actions

    @cached_property
    def pi(self) -> np.ndarray:
        a = np.array([float(p) for p in self.context_probs])
        a.setflags(write=False)
        return a

    @cached_property
    def u(self) -> np.ndarray:
        a = np.array([[float(x) for x in row] for row in self.expected_rewards])
        a.setflags(write=False)
        return a

    @cached_property
    def c(self) -> np.ndarray:
        a = np.array([[float(x) for x in row] for row in self.costs])
        a.setflags(write=False)
        return a

    @cached_property
    def best_actions(self) -> np.ndarray:
        """k*_j as 1-based labels; ties go to the lowest action index."""
        a = np.argmax(self.u, axis=1) + 1
        a.setflags(write=False)
        return a

    @cached_property
    def best_rewards(self) -> np.ndarray:
        a = self.u.max(axis=1)
        a.setflags(write=False)
        return a

    @property
    def best_rewards_exact(self) -> tuple[Fraction, ...]:
        return tuple(max(row) for row in self.expected_rewards)

    @property
    def is_unit_cost(self) -> bool:
        return all(x == 1 for row in self.costs for x in row)

    def context_costs(self) -> tuple[Fraction, ...] | None:
        """Per-context cost when every action of a context costs the same, else None."""
        out = []
        for row in self.costs:
            if any(x != row[0] for x in row):
                return None
            out.append(row[0])
        return tuple(out)

    @cached_property
    def context_ranking(self) -> np.ndarray:
        """Contexts ordered by u*_j descending, ties by index ascending."""
        a = np.lexsort((np.arange(self.J), -self.best_rewards))
        a.setflags(write=False)
        return a

    def with_family(self, family: RewardFamily | str) -> "ProblemInstance":
        return replace(self, reward_family=RewardFamily(family))


@dataclass(frozen=True)
class CostScale:
    """Integer representation of costs and a budget over a common denominator.

    A cost ``c`` becomes ``c * scale`` (an int) and likewise the budget, so the
    remaining budget can be tracked as an int64 and compared exactly.
    """

    scale: int
    costs: np.ndarray
    budget: int

    @classmethod
    def build(cls, instance: ProblemInstance, B) -> "CostScale":
        B = check_budget(B)
        scale = math.lcm(lcm_of_denominators(x for row in instance.costs for x in row), B.denominator)
        costs = np.array([[int(x * scale) for x in row] for row in instance.costs], dtype=np.int64)
        costs.setflags(write=False)
        return cls(scale, costs, int(B * scale))


@dataclass(frozen=True)
class BudgetClock:
    """Remaining time and budget of one episode.  Immutable; see :func:`apply_action`."""

    T: int
    B: Fraction
    tau: int
    b: Fraction

    def __post_init__(self):
        check_positive_int(self.T, "T", allow_zero=True)
        object.__setattr__(self, "B", check_budget(self.B))
        object.__setattr__(self, "b", check_budget(self.b, "b"))
        if not 0 <= self.tau <= self.T:
            raise ValueError(f"remaining time {self.tau} outside [0, {self.T}]")
        if self.b > self.B:
            raise ValueError(f"remaining budget {self.b} exceeds B = {self.B}")

    @classmethod
    def start(cls, T: int, B) -> "BudgetClock":
        B = check_budget(B)
        return cls(T, B, T, B)

    @property
    def rho(self) -> Fraction:
        return self.B / self.T if self.T else Fraction(0)

    @property
    def round(self) -> int:
        """1-based index of the next round."""
        return self.T - self.tau + 1

    @property
    def done(self) -> bool:
        return self.tau == 0


@dataclass(frozen=True)
class TraceRow:
    t: int
    context: int
    action: int
    reward: float
    cost: Fraction
    budget_after: Fraction


@dataclass
class EpisodeTrace:
    T: int
    B: Fraction
    rows: list[TraceRow] = field(default_factory=list)

    @property
    def total_reward(self) -> float:
        return float(sum(r.reward for r in self.rows))

    @property
    def total_cost(self) -> Fraction:
        return sum((r.cost for r in self.rows), Fraction(0))

    def budget_at(self, tau: int) -> Fraction:
        """Remaining budget b_tau when tau rounds are left."""
        if tau == self.T:
            return self.B
        return self.rows[self.T - tau - 1].budget_after

    def check(self) -> None:
        spent = Fraction(0)
        for r in self.rows:
            if r.action == 0 and (r.reward != 0 or r.cost != 0):
                raise BudgetViolation(f"round {r.t}: dummy action with nonzero reward or cost")
            spent += r.cost
            if spent > self.B:
                raise BudgetViolation(f"round {r.t}: cumulative cost {spent} exceeds B = {self.B}")
            if self.B - spent != r.budget_after:
                raise BudgetViolation(f"round {r.t}: recorded budget {r.budget_after} != {self.B - spent}")


def sample_context(instance: ProblemInstance, rng: np.random.Generator) -> int:
    """Draw one context index (0-based) by inverse CDF on a single uniform."""
    return context_from_uniform(instance, rng.random())


def context_from_uniform(instance: ProblemInstance, u):
    cdf = np.cumsum(instance.pi)
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, instance.J - 1) if np.ndim(idx) else int(min(idx, instance.J - 1))


def _check_pair(instance: ProblemInstance, j: int, k: int) -> None:
    if not 0 <= j < instance.J:
        raise IndexError(f"context {j} outside [0, {instance.J - 1}]")
    if not 1 <= k <= instance.K:
        raise IndexError(f"action {k} outside [1, {instance.K}]")


def sample_reward(instance: ProblemInstance, j: int, k: int, rng: np.random.Generator) -> float:
    """Reward of action ``k`` (1-based) under context ``j``; uses one uniform from ``rng``."""
    _check_pair(instance, j, k)
    draw = rng.random()
    mean = instance.u[j, k - 1]
    if instance.reward_family is RewardFamily.DETERMINISTIC:
        return float(mean)
    return 1.0 if draw < mean else 0.0


def apply_action(
    clock: BudgetClock,
    instance: ProblemInstance,
    j: int,
    k: int,
    rng: np.random.Generator | None = None,
    reward: float | None = None,
) -> tuple[BudgetClock, float, Fraction]:
    """Advance the clock by one round.

    The reward is drawn from ``rng`` unless given explicitly.  Taking an action
    whose cost exceeds the remaining budget raises :class:`BudgetViolation`.
    """
    if clock.tau <= 0:
        raise BudgetViolation("episode already finished")
    if k == 0:
        return replace(clock, tau=clock.tau - 1), 0.0, Fraction(0)
    _check_pair(instance, j, k)
    cost = instance.costs[j][k - 1]
    if cost > clock.b:
        raise BudgetViolation(f"action {k} in context {j} costs {cost} but only {clock.b} is left")
    if reward is None:
        if rng is None:
            raise ValueError("need rng or an explicit reward")
        reward = sample_reward(instance, j, k, rng)
    return replace(clock, tau=clock.tau - 1, b=clock.b - cost), reward, cost


@dataclass(frozen=True)
class GapTable:
    """Context ranking by u*, cumulative probabilities and reward gaps.

    ``gaps[jp, j, k]`` is u*_{jp} - u_{j,k+1} (contexts 0-based, actions
    shifted by one).  ``q`` has length J + 1 with q[0] = 0, aligned with the
    ranking.
    """

    ranking: tuple[int, ...]
    rank_of: tuple[int, ...]
    q: tuple[Fraction, ...]
    best_ranked: tuple[float, ...]
    gaps: np.ndarray

    def threshold(self, rho) -> int:
        from .lp import unit_threshold

        return unit_threshold(self.q[1:], rho)

    def is_boundary(self, rho) -> bool:
        rho = as_fraction(rho, "rho")
        return any(rho == qj for qj in self.q[1:-1])

    def margins(self, rho) -> tuple[int, Fraction, Fraction | None]:
        """Return (j~, delta, delta') at budget ratio ``rho``.

        delta is zero on a boundary; delta' is only defined there and is None
        otherwise.  Missing neighbours (beyond q_J) count as +infinity and are
        skipped in the minimum.
        """
        rho = as_fraction(rho, "rho")
        jt = self.threshold(rho)
        J = len(self.ranking)
        right = self.q[jt + 1] - rho if jt + 1 <= J else None
        left = rho - self.q[jt]
        delta = min(x for x in (left, right) if x is not None)
        delta_p = None
        if delta == 0 and 1 <= jt <= J - 1 and self.q[jt] == rho:
            delta_p = min(rho - self.q[jt - 1], self.q[jt + 1] - rho)
        return jt, delta, delta_p


def build_gap_table(instance: ProblemInstance) -> GapTable:
    ranking = tuple(int(j) for j in instance.context_ranking)
    rank_of = [0] * instance.J
    for r, j in enumerate(ranking):
        rank_of[j] = r
    q = [Fraction(0)]
    for j in ranking:
        q.append(q[-1] + instance.context_probs[j])
    ustar = instance.best_rewards
    gaps = ustar[:, None, None] - instance.u[None, :, :]
    gaps.setflags(write=False)
    return GapTable(
        ranking=ranking,
        rank_of=tuple(rank_of),
        q=tuple(q),
        best_ranked=tuple(float(ustar[j]) for j in ranking),
        gaps=gaps,
    )
