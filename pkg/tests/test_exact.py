from decimal import Decimal, getcontext
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st
from mpmath import iv

from coordmech.exact import certified_le, format_fraction, iroot, root_decimal, to_fraction


@given(st.integers(0, 10 ** 40), st.integers(1, 9))
def test_iroot_is_floor_root(n, k):
    r = iroot(n, k)
    assert r ** k <= n < (r + 1) ** k


@pytest.mark.parametrize("x,k,expected", [
    (Fraction(25), 2, "5.00000000000"),
    (Fraction(13), 2, "3.60555127546"),
    (Fraction(1, 8), 3, "0.500000000000"),
    (Fraction(2), 2, "1.41421356237"),
    (Fraction(0), 3, "0"),
])
def test_root_decimal_values(x, k, expected):
    assert str(root_decimal(x, k)) == expected


@given(st.fractions(min_value=Fraction(1, 10 ** 6), max_value=10 ** 9), st.integers(1, 6))
def test_root_decimal_matches_high_precision_decimal(x, k):
    getcontext().prec = 60
    ref = (Decimal(x.numerator) / Decimal(x.denominator)) ** (Decimal(1) / Decimal(k))
    got = root_decimal(x, k)
    assert abs(got - ref) <= abs(ref) * Decimal("1e-11")


def test_half_even_with_sticky_bit():
    # exact tie at 12 significant digits goes to even
    assert str(root_decimal(Fraction(1000000000005, 10 ** 12), 1)) == "1.00000000000"
    assert str(root_decimal(Fraction(1000000000015, 10 ** 12), 1)) == "1.00000000002"
    # just above the tie rounds up
    assert str(root_decimal(Fraction(10000000000050001, 10 ** 16), 1)) == "1.00000000001"
    # sqrt of (1 + 5e-12)^2 + tiny: the truncated root looks like a tie, the sticky bit breaks it
    x = Fraction(1000000000005, 10 ** 12) ** 2 + Fraction(1, 10 ** 40)
    assert str(root_decimal(x, 2)) == "1.00000000001"


def test_parse_and_format():
    assert to_fraction("7/2") == Fraction(7, 2)
    assert to_fraction("0.25") == Fraction(1, 4)
    assert to_fraction(3) == 3
    assert format_fraction(Fraction(7, 2)) == "7/2"
    assert format_fraction(Fraction(4)) == "4"
    with pytest.raises(TypeError):
        to_fraction(0.5)
    with pytest.raises(TypeError):
        to_fraction(True)


def test_certified_le_decides_both_ways():
    sqrt2 = lambda: iv.sqrt(2)
    assert certified_le(Fraction(141421356, 10 ** 8), sqrt2)
    assert not certified_le(Fraction(141421357, 10 ** 8), sqrt2)
    assert certified_le(Fraction(2), lambda: iv.mpf(2))
