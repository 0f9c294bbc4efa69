"""Episode execution and Monte-Carlo regret estimation.

Randomness: every run owns a ``SeedSequence`` keyed by (master seed, T, B,
run index), split into three independent generators for context arrivals,
rewards and the policy.  The environment sequence of a run is therefore the
same for every policy (common random numbers), and results do not depend on
how runs are grouped into batches or spread over threads.

Each round consumes exactly one uniform from each stream, whatever the
policy does.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import clone

from ._validation import check_budget, check_positive_int
from .core import BudgetViolation, EpisodeTrace, ProblemInstance, RewardFamily, TraceRow, context_from_uniform
from .dp import dp_solve
from .lp import het_upper_bound, upper_bound
from .policies.base import EpisodeSpec, Policy

__all__ = [
    "BATCH_SIZE",
    "SimulationResult",
    "RegretPoint",
    "RegretReport",
    "BudgetStats",
    "run_streams",
    "simulate",
    "run_episode",
    "benchmark_value",
    "estimate_regret",
    "geometric_checkpoints",
    "budget_stats",
]

log = logging.getLogger(__name__)

BATCH_SIZE = 256
CHUNK = 1024
Z95 = 1.959963984540054


def run_streams(master_seed: int, T: int, B: Fraction, run: int) -> list[np.random.Generator]:
    """(contexts, rewards, policy) generators of one run."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(T, B.numerator, B.denominator, run))
    return [np.random.Generator(np.random.PCG64(s)) for s in ss.spawn(3)]


@dataclass
class SimulationResult:
    """Per-run outputs of :func:`simulate`, ordered by run index.

    ``budgets[tau]`` holds b_tau (as Fractions-compatible scaled ints divided
    by ``scale``) for each requested remaining time.  ``traces`` is filled only
    when requested.
    """

    T: int
    B: Fraction
    scale: int
    totals: np.ndarray
    expected_totals: np.ndarray
    spent: np.ndarray
    budgets: dict[int, np.ndarray] = field(default_factory=dict)
    traces: dict[str, np.ndarray] | None = None

    def budget_values(self, tau: int) -> np.ndarray:
        return self.budgets[tau] / self.scale


def _simulate_batch(
    spec: EpisodeSpec,
    policy: Policy,
    master_seed: int,
    runs: range,
    taus: Sequence[int],
    record: bool,
):
    inst = spec.instance
    T = spec.T
    n = len(runs)
    pol = clone(policy)
    pol.reset(spec, n)
    streams = [run_streams(master_seed, T, spec.B, r) for r in runs]
    cost_int = spec.cost_scale.costs
    u = inst.u
    deterministic = inst.reward_family is RewardFamily.DETERMINISTIC
    budget = np.full(n, spec.budget0, dtype=np.int64)
    totals = np.zeros(n)
    expected = np.zeros(n)
    snaps = {tau: None for tau in taus}
    if T in snaps:
        snaps[T] = budget.copy()
    if record:
        tr = {k: np.zeros((n, T), dtype=d) for k, d in (("context", np.int64), ("action", np.int64), ("reward", float), ("budget", np.int64))}
    rows = np.arange(n)
    t = 1
    while t <= T:
        m = min(CHUNK, T - t + 1)
        u_ctx = np.stack([s[0].random(m) for s in streams])
        u_rew = np.stack([s[1].random(m) for s in streams])
        u_pol = np.stack([s[2].random(m) for s in streams])
        ctx_all = context_from_uniform(inst, u_ctx)
        for i in range(m):
            ctx = ctx_all[:, i]
            a = np.asarray(pol.act(t, ctx, budget, u_pol[:, i]), dtype=np.int64)
            if a.shape != (n,) or a.min(initial=0) < 0 or a.max(initial=0) > inst.K:
                raise BudgetViolation(f"{pol.name}: round {t}: invalid action labels {np.unique(a)}")
            took = a > 0
            k = np.where(took, a - 1, 0)
            cost = np.where(took, cost_int[ctx, k], 0)
            bad = cost > budget
            if bad.any():
                r = int(np.argmax(bad))
                raise BudgetViolation(
                    f"{pol.name}: run {runs[r]}, round {t}: action {a[r]} in context {ctx[r]} costs "
                    f"{Fraction(int(cost[r]), spec.cost_scale.scale)} but only "
                    f"{Fraction(int(budget[r]), spec.cost_scale.scale)} is left"
                )
            budget -= cost
            mean = np.where(took, u[ctx, k], 0.0)
            if deterministic:
                rew = mean
            else:
                rew = np.where(took & (u_rew[:, i] < mean), 1.0, 0.0)
            totals += rew
            expected += mean
            pol.observe(t, ctx, a, rew)
            if record:
                tr["context"][:, t - 1] = ctx
                tr["action"][:, t - 1] = a
                tr["reward"][:, t - 1] = rew
                tr["budget"][:, t - 1] = budget
            tau_next = T - t
            if tau_next in snaps:
                snaps[tau_next] = budget.copy()
            t += 1
    return totals, expected, spec.budget0 - budget, snaps, (tr if record else None)


def simulate(
    instance: ProblemInstance,
    policy: Policy,
    T: int,
    B,
    runs: int,
    master_seed: int = 0,
    taus: Iterable[int] = (),
    record: bool = False,
    threads: int = 1,
    batch_size: int = BATCH_SIZE,
) -> SimulationResult:
    """Run ``runs`` independent episodes and collect per-run totals.

    ``taus`` lists remaining-time values at which the budget is snapshotted.
    Batches have a fixed size so the grouping never depends on ``threads``.
    """
    T = check_positive_int(T, "T", allow_zero=True)
    B = check_budget(B)
    runs = check_positive_int(runs, "runs")
    policy.check_instance(instance)
    taus = sorted(set(int(x) for x in taus))
    for tau in taus:
        if not 0 <= tau <= T:
            raise ValueError(f"tau = {tau} outside [0, {T}]")
    spec = EpisodeSpec.build(instance, T, B)
    batches = [range(s, min(s + batch_size, runs)) for s in range(0, runs, batch_size)]

    def work(rg):
        return _simulate_batch(spec, policy, master_seed, rg, taus, record)

    if threads > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, batches))
    else:
        parts = [work(rg) for rg in batches]
    totals = np.concatenate([p[0] for p in parts])
    expected = np.concatenate([p[1] for p in parts])
    spent = np.concatenate([p[2] for p in parts])
    budgets = {tau: np.concatenate([p[3][tau] for p in parts]) for tau in taus}
    traces = None
    if record:
        traces = {k: np.concatenate([p[4][k] for p in parts]) for k in parts[0][4]}
    return SimulationResult(T, B, spec.cost_scale.scale, totals, expected, spent, budgets, traces)


def run_episode(instance: ProblemInstance, policy: Policy, T: int, B, seed: int = 0, run: int = 0) -> EpisodeTrace:
    """One episode as an :class:`EpisodeTrace` (run ``run`` under master seed ``seed``)."""
    B = check_budget(B)
    res = _single_run(instance, policy, T, B, seed, run)
    trace = EpisodeTrace(T, B)
    tr = res.traces
    S = res.scale
    for t in range(T):
        a = int(tr["action"][0, t])
        j = int(tr["context"][0, t])
        cost = instance.costs[j][a - 1] if a > 0 else Fraction(0)
        trace.rows.append(TraceRow(t + 1, j, a, float(tr["reward"][0, t]), cost, Fraction(int(tr["budget"][0, t]), S)))
    return trace


def _single_run(instance, policy, T, B, seed, run) -> SimulationResult:
    T = check_positive_int(T, "T", allow_zero=True)
    spec = EpisodeSpec.build(instance, T, B)
    policy.check_instance(instance)
    totals, expected, spent, snaps, tr = _simulate_batch(spec, policy, seed, range(run, run + 1), [], True)
    return SimulationResult(T, B, spec.cost_scale.scale, totals, expected, spent, {}, tr)


def benchmark_value(instance: ProblemInstance, T: int, B, kind: str = "lp") -> Fraction:
    """Regret benchmark: the LP bound T * v(B/T) or the exact DP value."""
    if kind == "lp":
        return upper_bound(instance, T, B) if instance.is_unit_cost else het_upper_bound(instance, T, B)
    if kind == "dp":
        table = dp_solve(instance, T, B, exact=False)
        return table.value()
    raise ValueError(f"benchmark must be 'lp' or 'dp', got {kind!r}")


def geometric_checkpoints(T0: int, T: int, factor: int = 2) -> list[int]:
    """T0, T0*factor, ... up to and including the last value <= T."""
    out = []
    x = check_positive_int(T0, "T0")
    while x <= T:
        out.append(x)
        x *= factor
    return out


@dataclass(frozen=True)
class RegretPoint:
    T: int
    B: Fraction
    mean_reward: float
    benchmark: float
    regret_mean: float
    regret_ci95: float
    regret_se: float


@dataclass(frozen=True)
class RegretReport:
    """Regret of one policy at horizon T (and optional smaller checkpoints).

    ``curve`` holds one point per checkpoint, each from its own set of
    episodes with budget rho * T'; the last point is T itself.
    """

    policy: str
    T: int
    B: Fraction
    rho: Fraction
    runs: int
    seed: int
    benchmark_kind: str
    curve: tuple[RegretPoint, ...]

    @property
    def final(self) -> RegretPoint:
        return self.curve[-1]

    @property
    def mean_reward(self) -> float:
        return self.final.mean_reward

    @property
    def benchmark(self) -> float:
        return self.final.benchmark

    @property
    def regret_mean(self) -> float:
        return self.final.regret_mean

    @property
    def regret_ci95(self) -> float:
        return self.final.regret_ci95


def _point(instance, policy, T, B, runs, seed, benchmark, threads, batch_size, reward_measure) -> RegretPoint:
    res = simulate(instance, policy, T, B, runs, seed, threads=threads, batch_size=batch_size)
    x = res.totals if reward_measure == "realized" else res.expected_totals
    mean = float(np.mean(x))
    se = float(np.std(x, ddof=1) / math.sqrt(runs)) if runs >= 2 else math.nan
    ci = Z95 * se if runs >= 30 else math.nan
    bench = float(benchmark_value(instance, T, B, benchmark))
    return RegretPoint(T, B, mean, bench, bench - mean, ci, se)


def estimate_regret(
    instance: ProblemInstance,
    policy: Policy,
    T: int,
    B,
    runs: int,
    master_seed: int = 0,
    benchmark: str = "lp",
    checkpoints: Sequence[int] | None = None,
    threads: int = 1,
    batch_size: int = BATCH_SIZE,
    reward_measure: str = "realized",
    label: str | None = None,
) -> RegretReport:
    """Monte-Carlo regret of ``policy`` against the chosen benchmark.

    ``reward_measure="expected"`` averages sum_t u_{X_t, A_t} instead of the
    realized rewards; same expectation, less noise.  The 95% CI uses the
    normal approximation and is reported only for ``runs >= 30``.
    """
    T = check_positive_int(T, "T", allow_zero=True)
    B = check_budget(B)
    runs = check_positive_int(runs, "runs")
    if runs < 2:
        raise ValueError("need at least 2 runs")
    if reward_measure not in ("realized", "expected"):
        raise ValueError("reward_measure must be 'realized' or 'expected'")
    rho = B / T if T else Fraction(0)
    horizons = sorted(set(int(c) for c in (checkpoints or ()) if 0 < c < T)) + [T]
    curve = []
    for Tp in horizons:
        Bp = rho * Tp
        curve.append(_point(instance, policy, Tp, Bp, runs, master_seed, benchmark, threads, batch_size, reward_measure))
    return RegretReport(label or policy.name, T, B, rho, runs, master_seed, benchmark, tuple(curve))


@dataclass(frozen=True)
class BudgetStats:
    tau: int
    mean: float
    var: float
    mean_se: float
    theory_mean: float
    theory_var: float
    tails: dict[float, tuple[float, float]]

    @property
    def mean_z(self) -> float:
        return (self.mean - self.theory_mean) / self.mean_se if self.mean_se > 0 else 0.0

    @property
    def var_rel_error(self) -> float:
        return abs(self.var - self.theory_var) / self.theory_var if self.theory_var > 0 else abs(self.var)


def budget_stats(budgets, tau: int, T: int, B, deltas: Sequence[float] = (0.05, 0.1)) -> BudgetStats:
    """Empirical moments of b_tau against the sampling-without-replacement law.

    ``budgets`` is either an array of b_tau values or a list of
    :class:`EpisodeTrace`.  For each delta the tail frequency of
    b_tau < (rho - delta) tau is paired with the bound exp(-2 delta^2 tau).
    """
    if len(budgets) and isinstance(budgets[0], EpisodeTrace):
        budgets = [float(tr.budget_at(tau)) for tr in budgets]
    x = np.asarray(budgets, dtype=float)
    rho = float(Fraction(B) / T)
    th_mean = rho * tau
    th_var = (T - tau) / (T - 1) * tau * rho * (1 - rho) if T > 1 else 0.0
    var = float(np.var(x, ddof=1)) if len(x) > 1 else 0.0
    tails = {d: (float(np.mean(x < (rho - d) * tau)), math.exp(-2 * d * d * tau)) for d in deltas}
    se = math.sqrt(th_var / len(x)) if len(x) else math.nan
    return BudgetStats(tau, float(np.mean(x)), var, se, th_mean, th_var, tails)
