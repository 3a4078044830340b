"""Exact-or-float scalar helpers shared by the exponent and theorem code.

Inputs that are ``int`` or :class:`fractions.Fraction` are kept exact, so
boundaries such as ``13/9`` come out as rationals. Anything involving a
``float`` falls back to floating point and is compared with an absolute
tolerance of ``FLOAT_TOL`` (scaled by the magnitude of the operands).
"""
from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational
from typing import Union

Number = Union[int, Fraction, float]

FLOAT_TOL = 1e-12


def as_number(value) -> Number:
    """Coerce ``value`` to ``int``, ``Fraction`` or ``float``.

    Strings such as ``"13/9"`` or ``"1.25"`` become exact fractions; bools
    are rejected since they are almost always a config mistake.
    """
    if isinstance(value, bool):
        raise TypeError(f"expected a number, got {value!r}")
    if isinstance(value, (int, Fraction)):
        return value
    if isinstance(value, Rational):
        return Fraction(value.numerator, value.denominator)
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        text = value.strip()
        if text.lower() in ("inf", "+inf", "infinity"):
            return math.inf
        try:
            return Fraction(text)
        except ValueError:
            return float(text)
    raise TypeError(f"expected a number, got {value!r}")


def is_exact(*values) -> bool:
    return all(isinstance(v, (int, Fraction)) for v in values)


def compare(a: Number, b: Number) -> int:
    """Three-way comparison, exact when possible, else tolerant.

    Returns -1, 0 or 1. Floats closer than ``FLOAT_TOL`` (relative to the
    larger magnitude, floor 1) compare equal.
    """
    if is_exact(a, b):
        return (a > b) - (a < b)
    fa, fb = float(a), float(b)
    if math.isinf(fa) or math.isinf(fb):
        return (fa > fb) - (fa < fb)
    if abs(fa - fb) <= FLOAT_TOL * max(1.0, abs(fa), abs(fb)):
        return 0
    return 1 if fa > fb else -1


def fmt(value: Number) -> str:
    """Render a number for reports: ``13/9``, ``-1``, ``inf`` or a float repr."""
    if isinstance(value, Fraction):
        return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    if isinstance(value, int):
        return str(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(float(value))


def ceil(value: Number) -> int:
    return math.ceil(value)


def half(value: Number) -> Number:
    return Fraction(value, 2) if isinstance(value, int) else value / 2


def div(a: Number, b: Number) -> Number:
    """Quotient that stays exact for ``int``/``Fraction`` operands."""
    if is_exact(a, b):
        return Fraction(a) / Fraction(b)
    return a / b
