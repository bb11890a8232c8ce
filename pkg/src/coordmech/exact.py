"""Exact rational helpers: parsing, integer roots, decimal display and
certified comparisons against irrational constants."""

from __future__ import annotations

from decimal import ROUND_HALF_EVEN, Context, Decimal
from fractions import Fraction
from typing import Callable

from mpmath import iv
from mpmath.libmp import to_rational

DEFAULT_DIGITS = 12


def to_fraction(value) -> Fraction:
    """Parse an int, a decimal string or a ``"p/q"`` string into a Fraction.

    Floats are rejected: they would smuggle binary rounding into exact data.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not weights")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if not text:
            raise ValueError("empty numeric string")
        return Fraction(text)
    raise TypeError(f"cannot interpret {value!r} as an exact rational")


def format_fraction(x: Fraction) -> str:
    """Canonical string form: ``"7"`` or ``"7/2"``."""
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def iroot(n: int, k: int) -> int:
    """Largest integer r with r**k <= n."""
    if n < 0:
        raise ValueError("negative radicand")
    if k < 1:
        raise ValueError("root degree must be >= 1")
    if n < 2 or k == 1:
        return n
    # Newton iteration from an overestimate
    r = 1 << -(-n.bit_length() // k)
    while True:
        s = ((k - 1) * r + n // r ** (k - 1)) // k
        if s >= r:
            break
        r = s
    while r ** k > n:
        r -= 1
    while (r + 1) ** k <= n:
        r += 1
    return r


def root_decimal(x: Fraction, k: int, digits: int = DEFAULT_DIGITS) -> Decimal:
    """``x ** (1/k)`` correctly rounded (half-even) to ``digits`` significant digits."""
    x = Fraction(x)
    if x < 0:
        raise ValueError("negative argument")
    if x == 0:
        return Decimal(0)
    p, q = x.numerator, x.denominator
    # choose a decimal shift s so that floor(x^(1/k) * 10^s) has >= digits+2 digits
    approx_digits = (len(str(p)) - len(str(q))) // k
    s = digits + 2 - approx_digits
    while True:
        if s >= 0:
            num, den = p * 10 ** (k * s), q
        else:
            num, den = p, q * 10 ** (-k * s)
        n = num // den
        r = iroot(n, k)
        if len(str(r)) >= digits + 2:
            break
        s += 1
    exact = r ** k * den == num
    # sticky digit keeps half-even rounding honest for truncated roots
    scaled = r * 10 + (0 if exact else 1)
    value = Decimal(scaled).scaleb(-(s + 1))
    return Context(prec=digits, rounding=ROUND_HALF_EVEN).plus(value)


def format_decimal(x: Fraction, digits: int = DEFAULT_DIGITS) -> str:
    """Decimal string of a rational with ``digits`` significant digits."""
    return str(root_decimal(x, 1, digits))


# ---------------------------------------------------------------------------
# certified comparisons

_MAX_PREC = 4096


def _interval_bounds(make: Callable[[], object]) -> tuple[Fraction, Fraction]:
    x = make()
    lo, hi = x._mpi_
    return Fraction(*map(int, to_rational(lo))), Fraction(*map(int, to_rational(hi)))


def enclose(make: Callable[[], object], prec: int = 80) -> tuple[Fraction, Fraction]:
    """Rational enclosure [lo, hi] of a real built with ``mpmath.iv`` arithmetic.

    ``make`` is called with ``iv.prec`` set to ``prec``; outward rounding of the
    interval context guarantees the true value lies inside the returned pair.
    """
    saved = iv.prec
    try:
        iv.prec = prec
        return _interval_bounds(make)
    finally:
        iv.prec = saved


def certified_le(value: Fraction, make: Callable[[], object]) -> bool:
    """Decide ``value <= X`` exactly, where X is given as an interval expression.

    Precision is doubled until the enclosure of X no longer straddles ``value``.
    Raises ArithmeticError if X appears to equal ``value`` to 4096 bits.
    """
    value = Fraction(value)
    prec = 80
    while prec <= _MAX_PREC:
        lo, hi = enclose(make, prec)
        if value <= lo:
            return True
        if value > hi:
            return False
        prec *= 2
    raise ArithmeticError("comparison undecided at maximum precision")


def upper_decimal(make: Callable[[], object], digits: int = DEFAULT_DIGITS) -> str:
    """Decimal string rounded upward from a certified enclosure (display only)."""
    _, hi = enclose(make, 4 * digits + 40)
    ctx = Context(prec=digits, rounding="ROUND_CEILING")
    return str(ctx.divide(Decimal(hi.numerator), Decimal(hi.denominator)))


def ivq(x: Fraction):
    """Interval enclosing an exact rational."""
    x = Fraction(x)
    return iv.mpf(x.numerator) / iv.mpf(x.denominator)
