"""Exact finite-horizon dynamic program for unit-cost instances.

V[tau][b] is the best expected reward-to-go with ``tau`` rounds and ``b``
budget units left.  Each round the context is revealed first, so

    V[tau][b] = sum_j pi_j * max(u*_j + V[tau-1][b-1], V[tau-1][b])

with the first branch only available when b >= 1.  Ties pick "take".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._validation import check_budget, check_positive_int
from .core import ProblemInstance

__all__ = ["ValueTable", "dp_solve", "dp_act", "MAX_CELLS"]

MAX_CELLS = 10**6
TIE_TOL = 1e-12


@dataclass(frozen=True)
class ValueTable:
    """Solved Bellman table.

    ``V`` has shape (T+1, B+1); ``take`` has shape (T+1, B+1, J) and is True
    where taking the best action is optimal.  In exact mode ``V`` is an object
    array of Fractions.
    """

    T: int
    B: int
    V: np.ndarray
    take: np.ndarray
    exact: bool

    def value(self, tau: int | None = None, b: int | None = None):
        tau = self.T if tau is None else tau
        b = self.B if b is None else min(b, self.B)
        return self.V[tau, b]


def _budget_units(B) -> int:
    return math.floor(check_budget(B))


def dp_solve(instance: ProblemInstance, T: int, B, exact: bool = False) -> ValueTable:
    """Tabulate the optimal value for every (remaining time, remaining budget).

    Refuses tables with more than ``MAX_CELLS`` (T * B) cells.  With
    ``exact=True`` the recursion runs on Fractions built from the instance's
    exact probabilities and rewards.
    """
    if not instance.is_unit_cost:
        raise ValueError("the DP oracle supports unit-cost instances only")
    T = check_positive_int(T, "T", allow_zero=True)
    Bu = _budget_units(B)
    if T * Bu > MAX_CELLS:
        raise ValueError(f"DP table too large: T*B = {T * Bu} > {MAX_CELLS}")
    J = instance.J
    take = np.zeros((T + 1, Bu + 1, J), dtype=bool)
    if exact:
        pi = instance.context_probs
        ustar = instance.best_rewards_exact
        V = np.empty((T + 1, Bu + 1), dtype=object)
        V[0, :] = Fraction(0)
        for tau in range(1, T + 1):
            prev = V[tau - 1]
            V[tau, 0] = Fraction(0)
            for b in range(1, Bu + 1):
                acc = Fraction(0)
                for j in range(J):
                    t_val = ustar[j] + prev[b - 1]
                    s_val = prev[b]
                    if t_val >= s_val:
                        take[tau, b, j] = True
                        acc += pi[j] * t_val
                    else:
                        acc += pi[j] * s_val
                V[tau, b] = acc
    else:
        pi = instance.pi
        ustar = instance.best_rewards
        V = np.zeros((T + 1, Bu + 1))
        for tau in range(1, T + 1):
            prev = V[tau - 1]
            t_val = ustar[:, None] + prev[None, :-1]
            s_val = np.broadcast_to(prev[None, 1:], t_val.shape)
            tk = t_val >= s_val - TIE_TOL * np.maximum(1.0, np.abs(s_val))
            take[tau, 1:, :] = tk.T
            V[tau, 1:] = pi @ np.where(tk, t_val, s_val)
    V.setflags(write=False)
    take.setflags(write=False)
    return ValueTable(T, Bu, V, take, exact)


def dp_act(table: ValueTable, tau: int, b, context: int) -> bool:
    """True when taking the best action is optimal at (tau, b, context)."""
    if not 0 <= tau <= table.T:
        raise IndexError(f"tau = {tau} outside [0, {table.T}]")
    bu = _budget_units(b)
    if bu <= 0 or tau == 0:
        return False
    return bool(table.take[tau, min(bu, table.B), context])
