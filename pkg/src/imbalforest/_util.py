from __future__ import annotations

import math
from fractions import Fraction


def exact(x: float | int | Fraction) -> Fraction:
    """Decimal-faithful rational for a user-supplied real (0.3 -> 3/10)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(repr(float(x)))


def round_half_up(x: float | int | Fraction) -> int:
    return math.floor(exact(x) + Fraction(1, 2))


def ceil_exact(x: float | int | Fraction) -> int:
    return math.ceil(exact(x))
