"""Input coercion and argument checks shared across the package."""

from __future__ import annotations

import math
import numbers
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

SUM_TOLERANCE = 1e-12


def as_fraction(value, name: str = "value") -> Fraction:
    """Convert a number (or a rational literal like ``"4/15"``) to an exact Fraction.

    Floats go through their shortest decimal repr, so ``0.4`` becomes ``2/5``
    rather than the binary expansion of the double.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (bool, np.bool_)):
        raise TypeError(f"{name}: expected a number, got bool")
    if isinstance(value, numbers.Integral):
        return Fraction(int(value))
    if isinstance(value, numbers.Real):
        x = float(value)
        if not math.isfinite(x):
            raise ValueError(f"{name}: must be finite, got {x!r}")
        return Fraction(repr(x))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"{name}: cannot parse {value!r} as a rational") from exc
    raise TypeError(f"{name}: expected a number, got {type(value).__name__}")


def as_fraction_vector(values: Iterable, name: str) -> tuple[Fraction, ...]:
    return tuple(as_fraction(v, f"{name}[{i}]") for i, v in enumerate(values))


def as_fraction_matrix(rows: Iterable[Iterable], name: str) -> tuple[tuple[Fraction, ...], ...]:
    return tuple(as_fraction_vector(r, f"{name}[{i}]") for i, r in enumerate(rows))


def normalized_probs(probs: Sequence[Fraction], name: str = "context_probs") -> tuple[Fraction, ...]:
    """Check a probability vector and renormalize it exactly when it is off by rounding."""
    if len(probs) == 0:
        raise ValueError(f"{name}: must be non-empty")
    for i, p in enumerate(probs):
        if p < 0 or p > 1:
            raise ValueError(f"{name}[{i}] = {float(p)} is outside [0, 1]")
    total = sum(probs, Fraction(0))
    if abs(total - 1) > SUM_TOLERANCE:
        raise ValueError(f"{name} sums to {float(total)!r}, expected 1 within {SUM_TOLERANCE}")
    if total != 1:
        probs = tuple(p / total for p in probs)
    return tuple(probs)


def check_positive_int(value, name: str, allow_zero: bool = False) -> int:
    if isinstance(value, (bool, np.bool_)) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name}: expected an integer, got {type(value).__name__}")
    value = int(value)
    lo = 0 if allow_zero else 1
    if value < lo:
        raise ValueError(f"{name} must be >= {lo}, got {value}")
    return value


def check_budget(B, name: str = "B") -> Fraction:
    b = as_fraction(B, name)
    if b < 0:
        raise ValueError(f"{name} must be non-negative, got {b}")
    return b


def lcm_of_denominators(values: Iterable[Fraction]) -> int:
    out = 1
    for v in values:
        out = math.lcm(out, v.denominator)
    return out
