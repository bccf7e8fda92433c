"""
Exact arithmetic in the field Q + Q*sqrt(2).

Values a + b*sqrt(2) with rational a, b are enough to certify both lattice
spans (gcd of commensurable differences) and incommensurability (a ratio
with a non-zero sqrt(2) part).
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Union

SQRT2 = math.sqrt(2.0)

Number = Union[int, Fraction, "QSqrt2"]


def to_fraction(value) -> Fraction:
    """Parses an int, float, Fraction or 'p/q' string into an exact Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        # Decimal reading of the shortest repr: 0.7 -> 7/10
        return Fraction(str(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    # numpy scalars
    return Fraction(str(float(value)))


@dataclass(frozen=True)
class QSqrt2:
    a: Fraction = Fraction(0)
    b: Fraction = Fraction(0)

    @classmethod
    def coerce(cls, value) -> "QSqrt2":
        if isinstance(value, QSqrt2):
            return value
        return cls(to_fraction(value), Fraction(0))

    @classmethod
    def parse(cls, raw) -> "QSqrt2":
        """
        Accepts a rational ("p/q", int, float) or a two-element list
        [a, b] meaning a + b*sqrt(2).
        """
        if isinstance(raw, (list, tuple)):
            if len(raw) != 2:
                raise ValueError(f"expected [a, b] for a + b*sqrt(2), got {raw!r}")
            return cls(to_fraction(raw[0]), to_fraction(raw[1]))
        return cls.coerce(raw)

    def __add__(self, other):
        other = QSqrt2.coerce(other)
        return QSqrt2(self.a + other.a, self.b + other.b)

    __radd__ = __add__

    def __neg__(self):
        return QSqrt2(-self.a, -self.b)

    def __sub__(self, other):
        return self + (-QSqrt2.coerce(other))

    def __rsub__(self, other):
        return QSqrt2.coerce(other) - self

    def __mul__(self, other):
        other = QSqrt2.coerce(other)
        return QSqrt2(self.a * other.a + 2 * self.b * other.b,
                      self.a * other.b + self.b * other.a)

    __rmul__ = __mul__

    def norm(self) -> Fraction:
        return self.a * self.a - 2 * self.b * self.b

    def __truediv__(self, other):
        other = QSqrt2.coerce(other)
        n = other.norm()
        if n == 0:
            raise ZeroDivisionError("division by zero in Q(sqrt2)")
        conj = QSqrt2(other.a, -other.b)
        num = self * conj
        return QSqrt2(num.a / n, num.b / n)

    def __float__(self):
        return float(self.a) + float(self.b) * SQRT2

    def is_zero(self) -> bool:
        return self.a == 0 and self.b == 0

    def is_rational(self) -> bool:
        return self.b == 0

    def is_integer(self) -> bool:
        return self.b == 0 and self.a.denominator == 1

    def sign(self) -> int:
        # sqrt(2) irrational, so a + b*sqrt(2) = 0 only when a = b = 0
        if self.is_zero():
            return 0
        if self.b == 0:
            return 1 if self.a > 0 else -1
        if self.a == 0:
            return 1 if self.b > 0 else -1
        if self.a > 0 and self.b > 0:
            return 1
        if self.a < 0 and self.b < 0:
            return -1
        # opposite signs: compare a^2 with 2 b^2
        dominant_a = self.a * self.a > 2 * self.b * self.b
        if dominant_a:
            return 1 if self.a > 0 else -1
        return 1 if self.b > 0 else -1

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        return f"{self.a}+{self.b}*sqrt(2)"

    def to_json(self):
        if self.b == 0:
            return str(self.a)
        return [str(self.a), str(self.b)]


def rational_ratio(x: QSqrt2, y: QSqrt2) -> Optional[Fraction]:
    """x / y when it is rational, else None. y must be non-zero."""
    q = x / y
    return q.a if q.is_rational() else None


def rational_gcd(values: Iterable[Fraction]) -> Fraction:
    """Largest positive rational g with every value an integer multiple of g."""
    values = [v for v in values if v != 0]
    if not values:
        return Fraction(0)
    common_den = 1
    for v in values:
        common_den = math.lcm(common_den, v.denominator)
    g = 0
    for v in values:
        g = math.gcd(g, abs(v.numerator * (common_den // v.denominator)))
    return Fraction(g, common_den)


def span_of(values: Sequence[QSqrt2]):
    """
    Span of the pairwise differences of `values`.

    Returns (span, commensurable): span is the largest h > 0 dividing every
    difference, None when all differences vanish (span unbounded) or when
    the differences are incommensurable (commensurable=False).
    """
    base = values[0]
    diffs: List[QSqrt2] = [v - base for v in values[1:]]
    diffs = [d for d in diffs if not d.is_zero()]
    if not diffs:
        return None, True
    unit = abs(diffs[0])
    ratios = []
    for d in diffs:
        r = rational_ratio(d, unit)
        if r is None:
            return None, False
        ratios.append(r)
    # every pairwise difference is an integer combination of base-differences
    return unit * rational_gcd(ratios), True


def divides(h: QSqrt2, value: QSqrt2) -> bool:
    if value.is_zero():
        return True
    return (value / h).is_integer()
