"""Theoretical regret constants and growth diagnostics for regret curves."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._validation import as_fraction
from .core import ProblemInstance, build_gap_table
from .lp import unit_lp_solve

__all__ = [
    "BoundReport",
    "bound_alp",
    "bound_ucb_alp",
    "alp_expected_regret",
    "GrowthDiagnostics",
    "logarithmic_growth_check",
    "SlopeTest",
    "slope_test",
]


@dataclass(frozen=True)
class BoundReport:
    """Regret constants at one budget ratio.

    Non-boundary ratios carry ``delta > 0`` and the constant ALP bound in
    ``alp_constant``.  On a boundary ``delta`` is 0, ``delta_prime`` and
    ``theta_o`` are set and the ALP bound is theta_o * sqrt(T) + alp_constant.
    The log-coefficients ``theta_a`` / ``theta_c`` are filled by
    :func:`bound_ucb_alp`.
    """

    rho: Fraction
    boundary: bool
    threshold: int
    delta: float
    delta_prime: float | None
    theta_o: float | None
    alp_constant: float
    theta_a: float | None = None
    theta_c: float | None = None
    g: tuple[float, ...] | None = None

    def alp_bound(self, T: int) -> float:
        if self.boundary:
            return self.theta_o * math.sqrt(T) + self.alp_constant
        return self.alp_constant


def _reward_range(instance: ProblemInstance) -> float:
    u = instance.best_rewards
    return float(u.max() - u.min())


def bound_alp(instance: ProblemInstance, rho) -> BoundReport:
    """Constants of the ALP regret bound at ratio ``rho`` (unit costs).

    Non-boundary: (u*_1 - u*_J) / (1 - exp(-2 delta^2)).  Boundary: the same
    with delta' plus theta_o sqrt(T), theta_o = 2 (u*_1 - u*_J) sqrt(rho (1 - rho)).
    Ratios outside (0, 1) spend nothing or everything and get a zero bound.
    """
    if not instance.is_unit_cost:
        raise ValueError("bound_alp needs unit costs")
    rho = as_fraction(rho, "rho")
    gt = build_gap_table(instance)
    span = _reward_range(instance)
    if not 0 < rho < 1:
        return BoundReport(rho, False, gt.threshold(rho), 0.0, None, None, 0.0)
    jt, delta, delta_p = gt.margins(rho)
    if delta > 0:
        const = span / -math.expm1(-2 * float(delta) ** 2) if span else 0.0
        return BoundReport(rho, False, jt, float(delta), None, None, const)
    theta_o = 2 * span * math.sqrt(float(rho * (1 - rho)))
    const = span / -math.expm1(-2 * float(delta_p) ** 2) if span else 0.0
    return BoundReport(rho, True, jt, 0.0, float(delta_p), theta_o, const)


def bound_ucb_alp(instance: ProblemInstance, rho) -> BoundReport:
    """Log-coefficient constants for UCB-ALP at a non-boundary ratio.

    theta_a sums 2/gap + 2 gap over every suboptimal action of every
    context.  theta_c follows the ranking-error term with
    g_j = min(pi_j, (rho - q_j~)/2, (q_{j~+1} - rho)/2).  On a boundary
    theta_c is left as None and the report is flagged.
    """
    base = bound_alp(instance, rho)
    u = instance.u
    ustar = instance.best_rewards
    theta_a = 0.0
    for j in range(instance.J):
        kstar = int(instance.best_actions[j]) - 1
        for k in range(instance.K):
            if k == kstar:
                continue
            d = float(ustar[j] - u[j, k])
            if d > 0:
                theta_a += 2.0 / d + 2.0 * d
    if base.boundary or not 0 < base.rho < 1:
        return _with(base, theta_a=theta_a)
    gt = build_gap_table(instance)
    rho_f = base.rho
    jt = base.threshold
    J, K = instance.J, instance.K
    pis = [instance.context_probs[j] for j in gt.ranking]
    half_left = (rho_f - gt.q[jt]) / 2
    half_right = (gt.q[jt + 1] - rho_f) / 2 if jt + 1 <= J else None
    g = []
    for pos in range(J):
        cands = [pis[pos], half_left] + ([half_right] if half_right is not None else [])
        g.append(float(min(cands)))
    ranked_u = [u[j] for j in gt.ranking]
    ranked_star = [float(ustar[j]) for j in gt.ranking]
    total = 0.0
    if jt < J:
        # contexts ranked at or above the fractional one, against the fractional context's actions
        g_next = g[jt]
        for pos in range(jt):
            for k in range(K):
                d = ranked_star[pos] - float(ranked_u[jt][k])
                if d > 0:
                    total += 27.0 / (2.0 * g_next * d * d)
        for pos in range(jt + 1, J):
            for k in range(K):
                d = ranked_star[jt] - float(ranked_u[pos][k])
                if d > 0:
                    total += 27.0 / (2.0 * g[pos] * d * d)
    ubar = float(np.dot(instance.pi, ustar))
    pi_r = [instance.context_probs[j] for j in gt.ranking]
    v = float(sum(p * w * Fraction(s) for p, w, s in zip(unit_lp_solve(pi_r, rho_f).probs, pi_r, ranked_star)))
    theta_c = (ubar + v) * (total + 2 * K * J)
    return _with(base, theta_a=theta_a, theta_c=theta_c, g=tuple(g))


def _with(rep: BoundReport, **kw) -> BoundReport:
    d = dict(rep.__dict__)
    d.update(kw)
    return BoundReport(**d)


def alp_expected_regret(instance: ProblemInstance, T: int, B: int) -> float:
    """Exact expected regret of ALP (unit costs, integer B) against T v(B/T).

    Under ALP one unit is spent in a round with probability min(b/tau, 1)
    whatever the context, and the expected reward of that round is v(b/tau).
    Propagating the distribution of b over the remaining time gives the
    expected total reward without simulation.
    """
    if not instance.is_unit_cost:
        raise ValueError("alp_expected_regret needs unit costs")
    B = int(B)
    gt = build_gap_table(instance)
    q = np.array([float(x) for x in gt.q])
    vq = np.concatenate([[0.0], np.cumsum([float(instance.context_probs[j]) * s for j, s in zip(gt.ranking, gt.best_ranked)])])
    b = np.arange(B + 1)
    dist = np.zeros(B + 1)
    dist[B] = 1.0
    total = 0.0
    for tau in range(T, 0, -1):
        ratio = np.minimum(b / tau, 1.0)
        total += float(dist @ np.interp(ratio, q, vq))
        spend = dist * ratio
        dist = dist - spend
        dist[:-1] += spend[1:]
    vrho = float(np.interp(min(B / T, 1.0), q, vq))
    return T * vrho - total


@dataclass(frozen=True)
class GrowthDiagnostics:
    horizons: tuple[int, ...]
    differences: tuple[float, ...]
    difference_noise: tuple[float, ...]
    non_increasing: bool
    worst_excess: float
    log_slope: float
    sqrt_slope: float
    sqrt_intercept: float


def logarithmic_growth_check(
    horizons: Sequence[int], regrets: Sequence[float], ci95: Sequence[float] | None = None
) -> GrowthDiagnostics:
    """Differences R(2T) - R(T) along a doubling grid, with a noise-aware monotonicity check.

    ``non_increasing`` holds when each difference exceeds the previous one by
    less than the 95% noise of their difference.  Consecutive differences
    share a point, so that noise is 1.96 * sqrt(se_a^2 + 4 se_b^2 + se_c^2).
    Also reports least-squares slopes of regret on log T and on sqrt T.
    """
    T = np.asarray(horizons, dtype=float)
    R = np.asarray(regrets, dtype=float)
    if len(T) < 2:
        raise ValueError("need at least two checkpoints")
    if not np.allclose(T[1:] / T[:-1], 2.0):
        raise ValueError("checkpoints must double")
    se = np.zeros_like(R) if ci95 is None else np.asarray(ci95, dtype=float) / 1.959963984540054
    d = np.diff(R)
    noise = []
    ok = True
    worst = -math.inf
    for i in range(len(d) - 1):
        nz = 1.959963984540054 * math.sqrt(se[i] ** 2 + 4 * se[i + 1] ** 2 + se[i + 2] ** 2)
        noise.append(nz)
        # a relative floor absorbs rounding in exactly flat curves
        excess = d[i + 1] - d[i] - nz - 1e-9 * max(1.0, abs(d[i]))
        worst = max(worst, excess)
        if excess > 0:
            ok = False
    log_slope = float(np.polyfit(np.log(T), R, 1)[0])
    sq = np.polyfit(np.sqrt(T), R, 1)
    return GrowthDiagnostics(
        tuple(int(x) for x in T), tuple(map(float, d)), tuple(noise), ok, float(worst), log_slope, float(sq[0]), float(sq[1])
    )


@dataclass(frozen=True)
class SlopeTest:
    slope: float
    se: float
    z: float
    significant_growth: bool


def slope_test(horizons: Sequence[int], regrets: Sequence[float], ci95: Sequence[float], z_crit: float = 1.959963984540054) -> SlopeTest:
    """Weighted least-squares slope of regret on T with known point errors.

    Growth is significant when the slope's 95% interval lies above zero.
    """
    T = np.asarray(horizons, dtype=float)
    R = np.asarray(regrets, dtype=float)
    se = np.asarray(ci95, dtype=float) / 1.959963984540054
    w = 1.0 / se**2
    tb = np.sum(w * T) / np.sum(w)
    sxx = np.sum(w * (T - tb) ** 2)
    slope = float(np.sum(w * (T - tb) * R) / sxx)
    s_se = float(1.0 / math.sqrt(sxx))
    z = slope / s_se
    return SlopeTest(slope, s_se, z, z > z_crit)
