"""Closed-form solutions of the single-round budget LP.

Unit costs: contexts are ranked by their best expected reward and the budget
ratio is poured into them in that order, so the solution is a threshold with
at most one fractional context.

Heterogeneous costs: each context is pruned to a candidate set, the candidates
are rewritten as incremental "virtual" actions whose reward-per-cost is
nonincreasing inside a context, and the virtual actions are then filled
greedily by reward-per-cost across all contexts.  The per-action
probabilities are recovered by differencing.

Threshold comparisons run on Fractions so that a ratio sitting exactly on a
cumulative probability is classified correctly.  Rewards may be floats (for
example empirical means); they only affect orderings and the objective.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from ._validation import as_fraction, as_fraction_vector
from .core import ProblemInstance, build_gap_table

__all__ = [
    "UnitLpSolution",
    "VirtualAction",
    "VirtualActionTable",
    "HetLpSolution",
    "HetLpPlan",
    "unit_threshold",
    "unit_lp_solve",
    "single_round_value",
    "upper_bound",
    "dedup_equal_costs",
    "find_candidate_set",
    "virtualize",
    "het_lp_solve",
    "solve_lp_prime",
    "het_round_value",
    "het_upper_bound",
]


def unit_threshold(q: Sequence, rho) -> int:
    """Largest j (1-based) with q_j <= rho, or 0 when q_1 > rho."""
    rho = as_fraction(rho, "rho")
    jt = 0
    for j, qj in enumerate(q, start=1):
        if as_fraction(qj, "q") <= rho:
            jt = j
        else:
            break
    return jt


@dataclass(frozen=True)
class UnitLpSolution:
    threshold: int
    probs: tuple[Fraction, ...]
    value: Fraction | float | None = None

    @property
    def fractional(self) -> int | None:
        """0-based position of the fractional context in the ranking, if any."""
        return self.threshold if self.threshold < len(self.probs) else None


def unit_lp_solve(pi_ranked: Sequence, rho) -> UnitLpSolution:
    """Probabilities for contexts listed in decreasing order of best reward.

    ``rho`` is clamped to [0, sum(pi)].
    """
    pi = as_fraction_vector(pi_ranked, "pi")
    rho = min(max(as_fraction(rho, "rho"), Fraction(0)), sum(pi, Fraction(0)))
    q, acc = [], Fraction(0)
    for p in pi:
        acc += p
        q.append(acc)
    jt = unit_threshold(q, rho)
    probs = [Fraction(1)] * jt + [Fraction(0)] * (len(pi) - jt)
    if jt < len(pi):
        prev = q[jt - 1] if jt else Fraction(0)
        probs[jt] = (rho - prev) / pi[jt]
    return UnitLpSolution(jt, tuple(probs))


def single_round_value(pi_ranked: Sequence, u_ranked: Sequence, solution: UnitLpSolution):
    """v(rho) = sum_j p_j pi_j u*_j over the same ranking as ``solution``."""
    pi = as_fraction_vector(pi_ranked, "pi")
    total = 0
    for p, w, u in zip(solution.probs, pi, u_ranked):
        if p:
            total += p * w * u
    return total


def _ranked_stats(instance: ProblemInstance):
    gt = build_gap_table(instance)
    pi = [instance.context_probs[j] for j in gt.ranking]
    ustar = instance.best_rewards_exact
    return pi, [ustar[j] for j in gt.ranking]


def upper_bound(instance: ProblemInstance, T: int, B) -> Fraction:
    """T * v(B/T) for a unit-cost instance (exact)."""
    if not instance.is_unit_cost:
        raise ValueError("upper_bound needs unit costs; use het_upper_bound for general costs")
    if T == 0:
        return Fraction(0)
    pi, u = _ranked_stats(instance)
    sol = unit_lp_solve(pi, as_fraction(B, "B") / T)
    return T * Fraction(single_round_value(pi, u, sol))


def unit_round_value(instance: ProblemInstance, rho) -> Fraction:
    pi, u = _ranked_stats(instance)
    return Fraction(single_round_value(pi, u, unit_lp_solve(pi, rho)))


# --- heterogeneous costs -------------------------------------------------


def dedup_equal_costs(costs: Sequence, rewards: Sequence, allowed: Sequence[bool] | None = None) -> list[int]:
    """0-based indices left after keeping, per distinct cost, the highest-reward action.

    Reward ties keep the lowest index.  ``allowed`` masks actions out entirely.
    """
    best: dict[Fraction, int] = {}
    for k, (c, u) in enumerate(zip(costs, rewards)):
        if allowed is not None and not allowed[k]:
            continue
        cur = best.get(c)
        if cur is None or u > rewards[cur]:
            best[c] = k
    return sorted(best.values())


def find_candidate_set(costs: Sequence, rewards: Sequence, allowed: Sequence[bool] | None = None) -> tuple[int, ...]:
    """Candidate actions of one context as 1-based labels, ordered by u/c descending.

    Equal-cost actions are first reduced to the best one.  Then two passes:
    drop any action whose reward does not exceed that of an action ranked
    before it, and walk the survivors keeping only the steepest reward-per-
    extra-cost step each time (ties go to the farther action).
    """
    costs = as_fraction_vector(costs, "costs")
    if any(c <= 0 for c in costs):
        raise ValueError("costs must be positive")
    keep = dedup_equal_costs(costs, rewards, allowed)
    order = sorted(keep, key=lambda k: (-(rewards[k] / costs[k]), -rewards[k], k))
    survivors: list[int] = []
    top = None
    for k in order:
        if top is not None and rewards[k] <= top:
            continue
        survivors.append(k)
        top = rewards[k] if top is None else max(top, rewards[k])
    out = []
    a = 0
    while survivors:
        out.append(survivors[a])
        if a == len(survivors) - 1:
            break
        base = survivors[a]
        best_a, best_rate = None, None
        for ap in range(a + 1, len(survivors)):
            k = survivors[ap]
            rate = (rewards[k] - rewards[base]) / (costs[k] - costs[base])
            if best_rate is None or rate >= best_rate:
                best_a, best_rate = ap, rate
        a = best_a
    return tuple(k + 1 for k in out)


@dataclass(frozen=True)
class VirtualAction:
    context: int
    slot: int
    action: int
    reward: object
    cost: Fraction
    # reward/cost, capped by the previous slot's value so float noise in
    # estimated rewards can never reorder slots of one context
    key: object = None

    @property
    def ratio(self):
        return self.reward / self.cost


@dataclass(frozen=True)
class VirtualActionTable:
    """Virtual actions of all contexts sorted by reward-per-cost descending.

    Ties are broken by (context, slot).  ``candidates[j]`` holds the 1-based
    candidate labels of context j in slot order.
    """

    actions: tuple[VirtualAction, ...]
    candidates: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.actions)

    def for_context(self, j: int) -> list[VirtualAction]:
        return sorted((v for v in self.actions if v.context == j), key=lambda v: v.slot)


def _context_virtuals(j: int, cand: Sequence[int], costs, rewards) -> list[VirtualAction]:
    out = []
    prev_u, prev_c = 0, Fraction(0)
    for a, k in enumerate(cand):
        u, c = rewards[k - 1], costs[k - 1]
        du, dc = u - prev_u, c - prev_c
        if dc <= 0 or (a > 0 and du <= 0):
            raise AssertionError(f"context {j}: candidate list not increasing in cost and reward at slot {a}")
        ratio = du / dc
        if out:
            prev = out[-1].key
            if ratio > prev:
                if isinstance(ratio, Fraction) and isinstance(prev, Fraction):
                    raise AssertionError(f"context {j}: virtual reward-per-cost increases at slot {a}")
                if ratio - prev > 1e-9 * max(1.0, abs(float(prev))):
                    raise AssertionError(f"context {j}: virtual reward-per-cost increases at slot {a}")
                ratio = prev
        out.append(VirtualAction(j, a, k, du, dc, ratio))
        prev_u, prev_c = u, c
    return out


def virtualize(candidates: Sequence[Sequence[int]], costs: Sequence[Sequence], rewards: Sequence[Sequence]) -> VirtualActionTable:
    """Incremental reward/cost decomposition of every context's candidate list."""
    allv: list[VirtualAction] = []
    for j, cand in enumerate(candidates):
        allv.extend(_context_virtuals(j, cand, as_fraction_vector(costs[j], "costs"), rewards[j]))
    allv.sort(key=lambda v: (-v.key, v.context, v.slot))
    return VirtualActionTable(tuple(allv), tuple(tuple(c) for c in candidates))


@dataclass(frozen=True)
class HetLpSolution:
    threshold: int
    virtual_probs: tuple[Fraction, ...]
    probs: tuple[tuple[Fraction, ...], ...]
    value: object


class HetLpPlan:
    """A virtual-action table with its cumulative expected costs, reusable across ratios."""

    def __init__(self, pi: Sequence, table: VirtualActionTable, num_actions: int):
        self.pi = as_fraction_vector(pi, "pi")
        self.table = table
        self.num_actions = num_actions
        acc = Fraction(0)
        self.prefix: list[Fraction] = []
        for v in table.actions:
            acc += self.pi[v.context] * v.cost
            self.prefix.append(acc)
        self.total = acc
        self._pos = {(v.context, v.slot): i for i, v in enumerate(table.actions)}

    def threshold(self, rho: Fraction) -> int:
        """Number of virtual actions fully funded at ratio ``rho``."""
        return bisect.bisect_right(self.prefix, rho)

    def virtual_prob(self, i: int, rho: Fraction, it: int | None = None) -> Fraction:
        if it is None:
            it = self.threshold(rho)
        if i < it:
            return Fraction(1)
        if i > it:
            return Fraction(0)
        v = self.table.actions[i]
        prev = self.prefix[i - 1] if i else Fraction(0)
        return (rho - prev) / (self.pi[v.context] * v.cost)

    def context_probs(self, j: int, rho) -> list[tuple[int, Fraction]]:
        """(action label, probability) pairs for context j, in slot order."""
        rho = self._clamp(rho)
        it = self.threshold(rho)
        cand = self.table.candidates[j]
        vp = [self.virtual_prob(self._pos[(j, a)], rho, it) for a in range(len(cand))]
        vp.append(Fraction(0))
        return [(k, vp[a] - vp[a + 1]) for a, k in enumerate(cand)]

    def _clamp(self, rho) -> Fraction:
        rho = as_fraction(rho, "rho")
        if rho < 0:
            return Fraction(0)
        return min(rho, self.total)

    def solve(self, rho, rewards: Sequence[Sequence] | None = None) -> HetLpSolution:
        rho = self._clamp(rho)
        it = self.threshold(rho)
        vprobs = tuple(self.virtual_prob(i, rho, it) for i in range(len(self.table)))
        probs = []
        for j in range(len(self.pi)):
            row = [Fraction(0)] * self.num_actions
            for k, p in self.context_probs(j, rho):
                row[k - 1] = p
            probs.append(tuple(row))
        value = None
        if rewards is not None:
            value = 0
            for j, row in enumerate(probs):
                for k, p in enumerate(row):
                    if p:
                        value += self.pi[j] * p * rewards[j][k]
        return HetLpSolution(it, vprobs, tuple(probs), value)


def het_lp_solve(pi: Sequence, table: VirtualActionTable, rho, rewards: Sequence[Sequence] | None = None) -> HetLpSolution:
    """Greedy fill of the virtual actions at ratio ``rho`` (clamped to the feasible range)."""
    K = max((max(c) for c in table.candidates if c), default=0)
    if rewards is not None:
        K = len(rewards[0])
    return HetLpPlan(pi, table, K).solve(rho, rewards)


def plan_lp_prime(pi: Sequence, costs: Sequence[Sequence], rewards: Sequence[Sequence], allowed=None) -> HetLpPlan:
    """Candidate sets, virtualization and cumulative costs for a full instance."""
    cands = [
        find_candidate_set(costs[j], rewards[j], None if allowed is None else allowed[j])
        for j in range(len(pi))
    ]
    table = virtualize(cands, costs, rewards)
    return HetLpPlan(pi, table, len(rewards[0]))


def solve_lp_prime(pi, costs, rewards, rho, allowed=None) -> HetLpSolution:
    return plan_lp_prime(pi, costs, rewards, allowed).solve(rho, rewards)


def het_round_value(instance: ProblemInstance, rho):
    return solve_lp_prime(instance.context_probs, instance.costs, instance.expected_rewards, rho).value


def het_upper_bound(instance: ProblemInstance, T: int, B) -> Fraction:
    if T == 0:
        return Fraction(0)
    return T * Fraction(het_round_value(instance, as_fraction(B, "B") / T))
