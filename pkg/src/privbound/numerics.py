"""Numerically careful primitives shared across modules.

Deltas as small as 1e-12 composed over up to 1e5 steps destroy naive
``1 - (1 - x) ** n`` arithmetic, so every product of near-one factors goes
through ``log1p``/``expm1`` and positive sums go through ``math.fsum``
(exactly rounded, hence independent of summation order).
"""

import math

from .errors import InvalidArgumentError

#: Relative guard for integer snapping (ceil of a ratio, strict thresholds).
INTEGER_SNAP_REL = 1e-12


def require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InvalidArgumentError(f"{name} must be finite, got {value!r}")
    return value


def kl_rate(eps: float) -> float:
    """Per-step KL budget eps * (e^eps - 1) / (e^eps + 1) of a pure-DP step.

    Strictly increasing, zero at zero; ``expm1`` keeps the small-eps regime
    accurate (the quantity is ~ eps^2 / 2 there).
    """
    if eps < 0 or not math.isfinite(eps):
        raise InvalidArgumentError(f"epsilon must be finite and >= 0, got {eps!r}")
    if eps == 0.0:
        return 0.0
    return eps * math.expm1(eps) / (math.exp(eps) + 1.0)


def one_minus_prod_powers(pairs) -> float:
    """1 - prod((1 - x) ** n) over (x, n) pairs, stable for tiny x.

    Each x must lie in [0, 1); returns a value in [0, 1].
    """
    acc = 0.0
    for x, n in pairs:
        if x < 0.0 or x >= 1.0:
            raise InvalidArgumentError(f"product factor out of range: 1 - {x!r}")
        if n:
            acc += n * math.log1p(-x)
    return -math.expm1(acc)


def snapped_ratio_ceil(numerator: float, denominator: float) -> int:
    """ceil(numerator / denominator) with a relative guard.

    A ratio within INTEGER_SNAP_REL of an integer is treated as that
    integer, so an exact multiple never rounds up one step too far.
    """
    ratio = numerator / denominator
    nearest = round(ratio)
    if abs(ratio - nearest) <= INTEGER_SNAP_REL * max(1.0, abs(ratio)):
        return int(nearest)
    return int(math.ceil(ratio))


def smallest_int_above(x: float) -> int:
    """Smallest integer strictly greater than x, with the same snap guard."""
    nearest = round(x)
    if abs(x - nearest) <= INTEGER_SNAP_REL * max(1.0, abs(x)):
        return int(nearest) + 1
    return int(math.floor(x)) + 1


def stable_sum(values) -> float:
    """Exactly rounded sum of floats; result independent of input order."""
    return math.fsum(values)
