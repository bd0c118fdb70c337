"""Exact rational arithmetic helpers.

Everything numeric in the package flows through gmpy2.mpq: weights, table
entries, interpolation coefficients, multipliers.  mpq keeps values in lowest
terms with a positive denominator, which is the normal form the rest of the
code assumes.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

from gmpy2 import mpq, mpz

Rat = mpq
RatLike = Union[int, str, Fraction, mpq]

ZERO = mpq(0)
ONE = mpq(1)


def rat(value: RatLike, den: int | None = None) -> mpq:
    """Coerce ints, Fractions, mpq and strings ("3", "-2/7", "0.25") to mpq."""
    if den is not None:
        return mpq(value, den)
    if isinstance(value, str):
        return rat_from_string(value)
    return mpq(value)


def rat_from_string(text: str) -> mpq:
    """Parse a rational literal: integer, p/q, or decimal (scaled exactly)."""
    s = text.strip()
    if "/" in s:
        num, _, den = s.partition("/")
        d = int(den)
        if d == 0:
            raise ValueError(f"zero denominator in rational literal {text!r}")
        return mpq(int(num), d)
    if "." in s:
        whole, _, frac = s.partition(".")
        if frac == "":
            return mpq(int(whole))
        sign = -1 if whole.strip().startswith("-") else 1
        scale = 10 ** len(frac)
        base = int(whole) if whole not in ("", "-", "+") else 0
        return mpq(base * scale + sign * int(frac), scale)
    return mpq(int(s))


def format_rat(value: mpq) -> str:
    """Render as p/q, or a bare integer when the denominator is 1."""
    return str(mpq(value))


def is_integral(value: mpq) -> bool:
    return mpq(value).denominator == 1


def binomial(n: int, k: int) -> int:
    if k < 0 or k > n:
        return 0
    return math.comb(n, k)


def factorial(k: int) -> int:
    return math.factorial(k)


def multinomial(counts) -> int:
    """Multinomial coefficient (sum(counts); counts)."""
    total = 0
    out = 1
    for c in counts:
        total += c
        out *= math.comb(total, c)
    return out


def ipow(base: mpq, exp: int) -> mpq:
    """base**exp for non-negative integer exp (mpq- and int-friendly)."""
    if exp == 0:
        return ONE
    return base ** exp


__all__ = [
    "Rat",
    "RatLike",
    "ZERO",
    "ONE",
    "rat",
    "rat_from_string",
    "format_rat",
    "is_integral",
    "binomial",
    "factorial",
    "multinomial",
    "ipow",
    "mpq",
    "mpz",
]
