"""Contextual bandits with a hard budget: LP-threshold policies, UCB learners,
an exact DP oracle and a Monte-Carlo regret harness."""

from .core import (
    BudgetClock,
    BudgetViolation,
    EpisodeTrace,
    GapTable,
    ProblemInstance,
    RewardFamily,
    apply_action,
    build_gap_table,
    sample_context,
    sample_reward,
)
from .dp import ValueTable, dp_act, dp_solve
from .harness import RegretReport, budget_stats, estimate_regret, run_episode, simulate
from .lp import (
    find_candidate_set,
    het_lp_solve,
    single_round_value,
    unit_lp_solve,
    unit_threshold,
    upper_bound,
    virtualize,
)
from .policies import REGISTRY, make_policy

__version__ = "0.1.0"

__all__ = [
    "BudgetClock",
    "BudgetViolation",
    "EpisodeTrace",
    "GapTable",
    "ProblemInstance",
    "RewardFamily",
    "apply_action",
    "build_gap_table",
    "sample_context",
    "sample_reward",
    "ValueTable",
    "dp_act",
    "dp_solve",
    "RegretReport",
    "budget_stats",
    "estimate_regret",
    "run_episode",
    "simulate",
    "find_candidate_set",
    "het_lp_solve",
    "single_round_value",
    "unit_lp_solve",
    "unit_threshold",
    "upper_bound",
    "virtualize",
    "REGISTRY",
    "make_policy",
]
