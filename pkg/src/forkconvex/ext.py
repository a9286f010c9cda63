"""Exact rationals extended by a single infinity symbol.

Values are either :class:`fractions.Fraction` (always >= 0 where used) or the
singleton :data:`INF`.  ``INF`` doubles as the "never" marker of stopping times.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union


class _Infinity:
    __slots__ = ()
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __str__(self):
        return "inf"

    def __reduce__(self):
        return (_Infinity, ())

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("forkconvex.INF")

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True


INF = _Infinity()

Ext = Union[Fraction, _Infinity]


def is_inf(x) -> bool:
    return x is INF


def ext_lt(a, b) -> bool:
    if a is INF:
        return False
    if b is INF:
        return True
    return a < b


def ext_max(*xs):
    best = Fraction(0)
    for x in xs:
        if x is INF:
            return INF
        if x > best:
            best = x
    return best


def ext_mul(a, b):
    """Product with ``0 * INF == 0``.

    The zero convention is the one the sup recursions need: an unbounded
    holding of a process that is currently worth 0 is worth 0.
    """
    if a is INF or b is INF:
        other = b if a is INF else a
        if other is INF:
            return INF
        return INF if other > 0 else Fraction(0)
    return a * b


def ext_div(a, b):
    """``a / b`` for ``b > 0`` finite; ``INF / b == INF``."""
    if b is INF or b == 0:
        raise ZeroDivisionError("ext_div needs a positive finite divisor")
    if a is INF:
        return INF
    return a / b


def parse_rational(text) -> Fraction:
    """Parse ``"p/q"``, ``"n"`` or an int/Fraction.  Floats are rejected."""
    if isinstance(text, bool):
        raise ValueError(f"not a rational: {text!r}")
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    if isinstance(text, str):
        s = text.strip()
        if s and all(ch in "0123456789-+/ " for ch in s):
            try:
                return Fraction(s.replace(" ", ""))
            except ZeroDivisionError:
                raise ValueError(f"zero denominator in {text!r}") from None
    raise ValueError(f"not a rational string: {text!r}")


def parse_ext(text):
    if text is INF or (isinstance(text, str) and text.strip().lower() in ("inf", "infinity")):
        return INF
    return parse_rational(text)


def fmt(x) -> str:
    """Exact string form: ``"p/q"``, ``"n"`` or ``"inf"``."""
    if x is INF:
        return "inf"
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"
