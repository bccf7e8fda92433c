from fractions import Fraction
from math import gcd

import pytest
from hypothesis import given, settings, strategies as st

from backend.exact_field import QSqrt2, divides, rational_gcd, span_of, to_fraction

ROOT2 = QSqrt2(Fraction(0), Fraction(1))


def test_to_fraction_reads_decimal_floats_exactly():
    assert to_fraction(0.7) == Fraction(7, 10)
    assert to_fraction("1/3") == Fraction(1, 3)
    assert to_fraction(3) == Fraction(3)


def test_to_fraction_rejects_booleans():
    with pytest.raises(TypeError):
        to_fraction(True)


def test_parse_pairs_and_rationals():
    assert QSqrt2.parse(["1/2", "3"]) == QSqrt2(Fraction(1, 2), Fraction(3))
    assert QSqrt2.parse("5/4") == QSqrt2(Fraction(5, 4))
    with pytest.raises(ValueError):
        QSqrt2.parse([1, 2, 3])


def test_arithmetic_in_the_field():
    x = QSqrt2(Fraction(1), Fraction(1))
    assert x * x == QSqrt2(Fraction(3), Fraction(2))
    assert ROOT2 * ROOT2 == QSqrt2(Fraction(2))
    assert (x / x) == QSqrt2(Fraction(1))
    assert float(ROOT2) == pytest.approx(2 ** 0.5)


def test_sign_with_mixed_parts():
    assert QSqrt2(Fraction(-1), Fraction(1)).sign() == 1   # sqrt2 - 1 > 0
    assert QSqrt2(Fraction(3), Fraction(-2)).sign() == 1   # 3 - 2 sqrt2 > 0
    assert QSqrt2(Fraction(1), Fraction(-1)).sign() == -1
    assert QSqrt2().sign() == 0


def test_division_by_zero():
    with pytest.raises(ZeroDivisionError):
        QSqrt2(Fraction(1)) / QSqrt2()


def test_span_of_commensurable_values():
    values = [QSqrt2.coerce(v) for v in ("-2", "0", "4")]
    span, commensurable = span_of(values)
    assert commensurable and span == QSqrt2(Fraction(2))


def test_span_of_irrational_but_commensurable_values():
    values = [QSqrt2(), ROOT2, ROOT2 * 3]
    span, commensurable = span_of(values)
    assert commensurable and span == ROOT2


def test_span_of_incommensurable_values():
    span, commensurable = span_of([QSqrt2(), QSqrt2(Fraction(1)), ROOT2])
    assert span is None and not commensurable


def test_span_of_constant_values_is_unbounded():
    span, commensurable = span_of([QSqrt2(Fraction(3))] * 3)
    assert span is None and commensurable


def test_divides():
    assert divides(QSqrt2(Fraction(2)), QSqrt2(Fraction(-6)))
    assert not divides(QSqrt2(Fraction(2)), QSqrt2(Fraction(1)))
    assert divides(ROOT2, QSqrt2())


fractions = st.fractions(min_value=-50, max_value=50, max_denominator=12).filter(lambda f: f != 0)


@given(st.lists(fractions, min_size=1, max_size=6))
@settings(max_examples=200, deadline=None)
def test_rational_gcd_divides_and_is_maximal(values):
    g = rational_gcd(values)
    assert g > 0
    quotients = [v / g for v in values]
    assert all(q.denominator == 1 for q in quotients)
    # no larger common divisor: the integer quotients are coprime
    common = 0
    for q in quotients:
        common = gcd(common, q.numerator)
    assert common == 1
