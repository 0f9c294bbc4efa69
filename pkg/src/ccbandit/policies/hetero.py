"""Policies for heterogeneous costs: generalized ALP and epsilon-first ALP.

Both solve the candidate-set / virtual-action LP each round with the ratio
b / tau, restricted to the actions the remaining budget can pay for.  The
epsilon-first variant first explores (least-pulled action of the observed
context) and then exploits with the empirical means frozen.

These run one episode at a time inside the batch, since the LP structure
depends on each run's own budget and estimates.
"""

from __future__ import annotations

import math
import warnings
from fractions import Fraction
from typing import Sequence

import numpy as np

from .._validation import as_fraction
from ..core import ProblemInstance
from ..lp import HetLpPlan, dedup_equal_costs, find_candidate_set, plan_lp_prime
from .base import EpisodeSpec, Policy, PolicyConfigError
from .estimators import HorizonWarning

__all__ = [
    "GeneralizedALP",
    "EpsilonFirstALP",
    "eps_length",
    "clt_test",
    "explore_action",
    "cost_gap_min",
    "xi_gap_min",
    "lp_comparisons",
]


def eps_length(T: int | None, K: int, delta, pi_min, delta_star, log_T=None) -> int:
    """Exploration length ceil(K/((1-d) pi_min) + log T * max(1/d^2, 16K/((1-d) pi_min D*^2))).

    Evaluated in exact rational arithmetic from the decimal values of the
    inputs; ``log_T`` may be given instead of ``T``.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if pi_min <= 0:
        raise ValueError("pi_min must be positive")
    if delta_star <= 0:
        raise ValueError("delta_star must be positive (use the confidence-level test when it is unknown or zero)")
    if log_T is None:
        log_T = math.log(T)
    d, pm, ds, lt = (as_fraction(x) for x in (delta, pi_min, delta_star, log_T))
    val = K / ((1 - d) * pm) + lt * max(1 / d**2, 16 * K / ((1 - d) * pm * ds**2))
    return math.ceil(val)


def clt_test(T: int, xi1: float, xi2: float, cost_gap: float, c11, c12, c21, c22) -> bool:
    """Confidence-level test for one comparison of two rate estimates.

    Passes when exp(-2 D'^2 min(C11, C12)) <= T^-2 and likewise for the
    second pair, with D' = cost_gap * (xi1 - xi2) / 2.  Counts may be
    ``math.inf`` for the dummy action, whose statistics are known.
    """
    d = cost_gap * (xi1 - xi2) / 2.0
    limit = -2.0 * math.log(T)
    e1 = -2.0 * d * d * min(c11, c12)
    e2 = -2.0 * d * d * min(c21, c22)
    if d == 0:
        return False
    return e1 <= limit and e2 <= limit


def explore_action(counts_row: np.ndarray, affordable: np.ndarray, uniform: float) -> int:
    """Least-pulled action (1-based) with a uniform tie-break.

    Among the actions sharing the minimal count, only affordable ones are
    eligible; if none is, the dummy action 0 is returned.
    """
    m = counts_row.min()
    tied = np.nonzero((counts_row == m) & affordable)[0]
    if tied.size == 0:
        return 0
    return int(tied[min(int(uniform * tied.size), tied.size - 1)]) + 1


def cost_gap_min(instance: ProblemInstance) -> Fraction:
    """Smallest nonzero cost difference within a context, the dummy (cost 0) included."""
    best = None
    for row in instance.costs:
        levels = sorted(set(row) | {Fraction(0)})
        for a, b in zip(levels, levels[1:]):
            if best is None or b - a < best:
                best = b - a
    return best


def _xi(u, c, j, k1, k2):
    u1 = u[j][k1] if k1 >= 0 else 0
    u2 = u[j][k2] if k2 >= 0 else 0
    c1 = c[j][k1] if k1 >= 0 else 0
    c2 = c[j][k2] if k2 >= 0 else 0
    return (u1 - u2) / (c1 - c2)


def xi_gap_min(instance: ProblemInstance) -> Fraction:
    """Smallest gap between two distinct reward-per-cost rates xi_{j,k1,k2} (dummy = -1)."""
    u, c = instance.expected_rewards, instance.costs
    vals = []
    for j in range(instance.J):
        acts = [-1] + list(range(instance.K))
        for i, k1 in enumerate(acts):
            for k2 in acts[i + 1:]:
                c1 = c[j][k1] if k1 >= 0 else 0
                c2 = c[j][k2] if k2 >= 0 else 0
                if c1 != c2:
                    vals.append(_xi(u, c, j, k1, k2))
    vals.sort()
    gaps = [b - a for a, b in zip(vals, vals[1:])]
    return min(gaps) if gaps else Fraction(0)


def lp_comparisons(costs: Sequence[Sequence[Fraction]], means: np.ndarray, counts: np.ndarray):
    """Every rate comparison made while solving the LP on estimated rewards.

    Yields ``(xi1, xi2, (C11, C12), (C21, C22))`` tuples.  Covered: equal-cost
    reward comparisons, the reward-per-cost sort, the dominance pass, the
    steepest-step pass and the global ordering of virtual actions.  The
    dummy action has known statistics and gets an infinite count.
    """
    inf = math.inf
    J = len(costs)
    glob = []
    for j in range(J):
        c, u, n = costs[j], means[j], counts[j]

        def xi(k1, k2):
            return _xi(means, costs, j, k1, k2)

        def cnt(k):
            return inf if k < 0 else n[k]

        K = len(c)
        by_cost: dict[Fraction, list[int]] = {}
        for k in range(K):
            by_cost.setdefault(c[k], []).append(k)
        for group in by_cost.values():
            grp = sorted(group, key=lambda k: (-u[k], k))
            for a, b in zip(grp, grp[1:]):
                yield xi(a, -1), xi(b, -1), (cnt(a), inf), (cnt(b), inf)
        keep = dedup_equal_costs(c, u)
        order = sorted(keep, key=lambda k: (-(u[k] / float(c[k])), -u[k], k))
        for a, b in zip(order, order[1:]):
            yield xi(a, -1), xi(b, -1), (cnt(a), inf), (cnt(b), inf)
        top = None
        for k in order:
            if top is not None:
                # reward comparison u_k vs u_top written as a rate against zero
                yield xi(top, k), 0.0, (cnt(top), cnt(k)), (inf, inf)
                if u[k] > u[top]:
                    top = k
            else:
                top = k
        cand = [k - 1 for k in find_candidate_set(c, u)]
        # steepest-step pass: winner vs every other option from each base
        surv = _pass_one(order, u)
        a = 0
        while a < len(surv) - 1:
            base = surv[a]
            rates = [(xi(surv[ap], base), ap) for ap in range(a + 1, len(surv))]
            win_rate = max(r for r, _ in rates)
            win = max(ap for r, ap in rates if r == win_rate)
            for r, ap in rates:
                if ap != win:
                    yield xi(surv[win], base), r, (cnt(surv[win]), cnt(base)), (cnt(surv[ap]), cnt(base))
            a = win
        prev = -1
        for k in cand:
            glob.append((xi(k, prev), cnt(k), cnt(prev)))
            prev = k
    glob.sort(key=lambda g: -g[0])
    for g1, g2 in zip(glob, glob[1:]):
        yield g1[0], g2[0], (g1[1], g1[2]), (g2[1], g2[2])


def _pass_one(order: list[int], u) -> list[int]:
    out, top = [], None
    for k in order:
        if top is not None and u[k] <= top:
            continue
        out.append(k)
        top = u[k] if top is None else max(top, u[k])
    return out


class GeneralizedALP(Policy):
    """Adaptive LP with known statistics for arbitrary fixed costs."""

    name = "gALP"

    def __init__(self):
        pass

    def _reset(self, spec: EpisodeSpec, n: int) -> None:
        inst = spec.instance
        self._cost_int = spec.cost_scale.costs
        self._scale = spec.cost_scale.scale
        self._levels = np.unique(self._cost_int)
        self._plans: dict = {}

    def _plan(self, key, rewards, cache: dict) -> HetLpPlan:
        plan = cache.get(key)
        if plan is None:
            inst = self.spec_.instance
            allowed = self._cost_int <= self._levels[key - 1] if key else np.zeros_like(self._cost_int, dtype=bool)
            plan = plan_lp_prime(inst.context_probs, inst.costs, rewards, allowed.tolist())
            cache[key] = plan
        return plan

    def _exploit(self, r: int, t: int, j: int, b: int, uniform: float, rewards, cache) -> int:
        key = int(np.searchsorted(self._levels, b, side="right"))
        if key == 0:
            return 0
        plan = self._plan(key, rewards, cache)
        tau = self.spec_.T - t + 1
        rho = Fraction(b, self._scale * tau)
        acc = Fraction(0)
        for k, p in plan.context_probs(j, rho):
            acc += p
            if uniform < float(acc):
                return k
        return 0

    def act(self, t, contexts, budget, uniforms):
        rewards = self.spec_.instance.expected_rewards
        out = np.zeros(len(contexts), dtype=np.int64)
        for r in range(len(contexts)):
            b = int(budget[r])
            if b > 0:
                out[r] = self._exploit(r, t, int(contexts[r]), b, float(uniforms[r]), rewards, self._plans)
        return out


class EpsilonFirstALP(GeneralizedALP):
    """Explore the least-pulled action for a while, then run generalized ALP on estimates.

    ``explore``: an int (fixed number of rounds), ``"formula"`` (the
    exploration length computed from ``delta`` and the instance's pi_min and
    rate gap) or ``"clt"`` (stop once every comparison in the estimated LP
    passes the confidence-level test).  ``means="oracle"`` exploits with the
    true rewards instead of the estimates.
    """

    name = "eps-first-ALP"

    def __init__(self, explore="clt", delta: float = 0.5, means: str = "empirical"):
        self.explore = explore
        self.delta = delta
        self.means = means

    def check_instance(self, instance):
        super().check_instance(instance)
        if self.means not in ("empirical", "oracle"):
            raise PolicyConfigError(f"{self.name}: means must be 'empirical' or 'oracle'")
        e = self.explore
        if not (e in ("formula", "clt") or (isinstance(e, (int, np.integer)) and not isinstance(e, bool) and e >= 0)):
            raise PolicyConfigError(f"{self.name}: explore must be a non-negative int, 'formula' or 'clt'")

    def _reset(self, spec, n):
        super()._reset(spec, n)
        inst = spec.instance
        T = spec.T
        self._limit = T
        if self.explore == "formula":
            ds = cost_gap_min(inst) * xi_gap_min(inst)
            if ds <= 0:
                raise PolicyConfigError(f"{self.name}: rate gap is zero, the formula length is undefined; use explore='clt'")
            pmin = min(inst.context_probs)
            self._limit = eps_length(T, inst.K, self.delta, pmin, ds) if T > 1 else T
        elif self.explore != "clt":
            self._limit = int(self.explore)
        if self._limit > T:
            warnings.warn(f"exploration length {self._limit} exceeds T = {T}; clamped", HorizonWarning, stacklevel=3)
            self._limit = T
        self._gap = float(cost_gap_min(inst))
        self.counts_ = np.zeros((n, inst.J, inst.K), dtype=np.int64)
        self.sums_ = np.zeros((n, inst.J, inst.K))
        self.exploring_ = np.full(n, self._limit > 0 or self.explore == "clt")
        self.explore_rounds_ = np.zeros(n, dtype=np.int64)
        self._frozen: list = [None] * n
        self._caches: list = [dict() for _ in range(n)]

    def _means(self, r):
        c = self.counts_[r]
        return np.divide(self.sums_[r], c, out=np.zeros(c.shape), where=c > 0)

    def clt_passed(self, r: int) -> bool:
        T = self.spec_.T
        costs = self.spec_.instance.costs
        for x1, x2, (a, b), (c, d) in lp_comparisons(costs, self._means(r), self.counts_[r]):
            if not clt_test(T, x1, x2, self._gap, a, b, c, d):
                return False
        return True

    def act(self, t, contexts, budget, uniforms):
        n = len(contexts)
        out = np.zeros(n, dtype=np.int64)
        inst = self.spec_.instance
        for r in range(n):
            b = int(budget[r])
            j = int(contexts[r])
            if self.exploring_[r]:
                self.explore_rounds_[r] = t
                if b > 0:
                    out[r] = explore_action(self.counts_[r, j], self._cost_int[j] <= b, float(uniforms[r]))
                continue
            if b <= 0:
                continue
            if self._frozen[r] is None:
                if self.means == "oracle":
                    self._frozen[r] = inst.expected_rewards
                else:
                    self._frozen[r] = self._means(r).tolist()
            out[r] = self._exploit(r, t, j, b, float(uniforms[r]), self._frozen[r], self._caches[r])
        return out

    def observe(self, t, contexts, actions, rewards):
        for r in np.nonzero(self.exploring_)[0]:
            a = int(actions[r])
            if a > 0:
                self.counts_[r, contexts[r], a - 1] += 1
                self.sums_[r, contexts[r], a - 1] += rewards[r]
            if self.explore == "clt":
                if t >= self.spec_.T or self.clt_passed(r):
                    self.exploring_[r] = False
            elif t >= self._limit:
                self.exploring_[r] = False
