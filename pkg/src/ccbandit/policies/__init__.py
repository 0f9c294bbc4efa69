"""Decision policies and a name registry used by configs and the CLI."""

from __future__ import annotations

from .adaptive import ALP, EALP, EALP2, FLP, UCBALP, UCBEALP, UCBEALP2, UCBFLP
from .base import EpisodeSpec, Policy, PolicyConfigError, threshold_probs
from .estimators import (
    ContextCounter,
    HorizonWarning,
    UCBEstimator,
    delta_lcb,
    ealp2_t1,
    ucb_update,
    ucb_value,
)
from .hetero import (
    EpsilonFirstALP,
    GeneralizedALP,
    clt_test,
    cost_gap_min,
    eps_length,
    explore_action,
    lp_comparisons,
    xi_gap_min,
)
from .procrastinate import PB, UCBPB, DPPolicy

REGISTRY: dict[str, type[Policy]] = {
    cls.name: cls
    for cls in (ALP, FLP, EALP, EALP2, PB, DPPolicy, UCBALP, UCBFLP, UCBEALP, UCBEALP2, UCBPB, GeneralizedALP, EpsilonFirstALP)
}


def make_policy(name: str, **options) -> Policy:
    """Instantiate a registered policy by name (case-insensitive)."""
    lookup = {k.lower(): v for k, v in REGISTRY.items()}
    cls = lookup.get(name.lower())
    if cls is None:
        raise PolicyConfigError(f"unknown policy {name!r}; known: {', '.join(REGISTRY)}")
    try:
        return cls(**options)
    except TypeError as exc:
        raise PolicyConfigError(f"{name}: bad options {sorted(options)}: {exc}") from exc


__all__ = [
    "ALP",
    "FLP",
    "EALP",
    "EALP2",
    "PB",
    "DPPolicy",
    "UCBALP",
    "UCBFLP",
    "UCBEALP",
    "UCBEALP2",
    "UCBPB",
    "GeneralizedALP",
    "EpsilonFirstALP",
    "EpisodeSpec",
    "Policy",
    "PolicyConfigError",
    "REGISTRY",
    "make_policy",
    "threshold_probs",
    "UCBEstimator",
    "ContextCounter",
    "HorizonWarning",
    "ucb_update",
    "ucb_value",
    "delta_lcb",
    "ealp2_t1",
    "eps_length",
    "clt_test",
    "explore_action",
    "cost_gap_min",
    "xi_gap_min",
    "lp_comparisons",
]
