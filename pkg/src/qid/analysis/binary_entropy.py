"""Binary entropy and its inverse on (0, 1/2]."""

from __future__ import annotations

import math

BISECTION_STEPS = 200


def h(p: float) -> float:
    """Binary entropy in bits; h(0) = h(1) = 0."""
    if p < 0 or p > 1:
        raise ValueError("probability outside [0, 1]")
    if p == 0 or p == 1:
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def h_inverse(y: float) -> float:
    """The unique p in [0, 1/2] with h(p) = y, by bisection."""
    if y < 0 or y > 1:
        raise ValueError("binary entropy values lie in [0, 1]")
    if y == 1:
        return 0.5
    lo, hi = 0.0, 0.5
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if h(mid) < y:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
