"""Upper confidence bounds, context-frequency counters and the truncation round."""

from __future__ import annotations

import math
import warnings

import numpy as np

from .._validation import as_fraction

__all__ = [
    "UCBEstimator",
    "ucb_update",
    "ucb_value",
    "ContextCounter",
    "delta_lcb",
    "ealp2_t1",
    "HorizonWarning",
]


class HorizonWarning(UserWarning):
    """A theoretically chosen length exceeds the horizon and was clamped."""


class UCBEstimator:
    """Pull counts and reward sums per (run, context, action).

    ``values(t)`` returns mean + sqrt(log t / (2 C)) with the natural log, and
    exactly 1 for pairs never pulled.
    """

    def __init__(self, n_runs: int, J: int, K: int):
        self.counts = np.zeros((n_runs, J, K), dtype=np.int64)
        self.sums = np.zeros((n_runs, J, K))

    def update(self, contexts: np.ndarray, actions: np.ndarray, rewards: np.ndarray) -> None:
        hit = np.nonzero(actions > 0)[0]
        if hit.size:
            j, k = contexts[hit], actions[hit] - 1
            self.counts[hit, j, k] += 1
            self.sums[hit, j, k] += rewards[hit]

    def means(self) -> np.ndarray:
        c = self.counts
        return np.divide(self.sums, c, out=np.zeros_like(self.sums), where=c > 0)

    def values(self, t: int) -> np.ndarray:
        if t < 1:
            raise ValueError("round index t must be >= 1")
        c = self.counts
        log_t = math.log(t)
        bonus = np.sqrt(np.divide(log_t, 2.0 * c, out=np.zeros(c.shape), where=c > 0))
        return np.where(c > 0, self.means() + bonus, 1.0)


def ucb_update(est: UCBEstimator, j: int, k: int, reward: float, run: int = 0) -> UCBEstimator:
    """Record one observed reward for context ``j`` and action ``k`` (1-based)."""
    if k < 1:
        raise ValueError("only real actions (k >= 1) are observed")
    est.counts[run, j, k - 1] += 1
    est.sums[run, j, k - 1] += reward
    return est


def ucb_value(est: UCBEstimator, j: int, k: int, t: int, run: int = 0) -> float:
    c = int(est.counts[run, j, k - 1])
    if c == 0:
        return 1.0
    return float(est.sums[run, j, k - 1] / c + math.sqrt(math.log(t) / (2 * c)))


class ContextCounter:
    """Observed context counts per run, with optional per-run freezing."""

    def __init__(self, n_runs: int, J: int):
        self.counts = np.zeros((n_runs, J), dtype=np.int64)
        self.frozen = np.zeros(n_runs, dtype=bool)

    def update(self, contexts: np.ndarray) -> None:
        live = np.nonzero(~self.frozen)[0]
        self.counts[live, contexts[live]] += 1

    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)


def delta_lcb(pi_hat, rho, t: int, T: int, J: int | None = None):
    """Lower confidence bound on the distance from ``rho`` to the nearest boundary.

    ``pi_hat`` holds empirical context frequencies in the ranking order
    (best context first), either one vector or one row per run.  Returns
    ``(delta_check, stop)`` where ``stop`` says the estimate is tight enough
    to freeze the empirical distribution at round ``t``.
    """
    p = np.atleast_2d(np.asarray(pi_hat, dtype=float))
    rho = float(rho)
    J = p.shape[1] if J is None else J
    q = np.cumsum(p, axis=1)
    jt = (q <= rho).sum(axis=1)
    qpad = np.concatenate([np.zeros((len(p), 1)), q, np.full((len(p), 1), np.inf)], axis=1)
    rows = np.arange(len(p))
    d_hat = np.minimum(qpad[rows, jt + 1] - rho, rho - qpad[rows, jt])
    d_check = d_hat / 2.0
    stop = np.zeros(len(p), dtype=bool)
    if T > 1:
        log_T = math.log(T)
        pos = d_check > 0
        with np.errstate(divide="ignore"):
            need = np.where(pos, 16.0 * J * J * log_T**3 / np.where(pos, d_check, 1.0) ** 2, np.inf)
        stop = pos & (np.exp(-2.0 * d_check**2 * t) <= 1.0 / T**2) & (t >= need)
    if np.ndim(pi_hat) == 1:
        return float(d_check[0]), bool(stop[0])
    return d_check, stop


def ealp2_t1(T: int | None, J: int, delta, log_T=None, clamp: bool = True) -> int:
    """Learning-stage length ceil(16 J^2 log^3 T / delta^2), clamped to T with a warning.

    ``log_T`` may be passed directly (useful when T itself is not an integer
    power of e); otherwise it is computed from ``T``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if log_T is None:
        log_T = math.log(T)
    val = 16 * J * J * as_fraction(log_T) ** 3 / as_fraction(delta) ** 2
    t1 = math.ceil(val)
    if T is not None and T > 1 and math.log(T) ** 3 / T > float(delta) ** 3 / (64 * J * J):
        warnings.warn(
            f"horizon T={T} is too short for the truncation guarantee (log^3 T / T > delta^3 / (64 J^2))",
            HorizonWarning,
            stacklevel=2,
        )
    if clamp and T is not None and t1 > T:
        warnings.warn(f"T1 = {t1} exceeds the horizon T = {T}; clamped to T", HorizonWarning, stacklevel=2)
        t1 = T
    return t1
