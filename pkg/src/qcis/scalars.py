"""Exact scalar fields: the rationals and the Gaussian rationals Q(i).

Rationals are plain :class:`fractions.Fraction`.  :class:`QI` carries an exact
complex constant ``a + b*i`` with ``a, b`` rational and interoperates with
``int`` and ``Fraction`` on either side of every operator.
"""
from __future__ import annotations

from fractions import Fraction
from numbers import Rational


def as_fraction(x) -> Fraction:
    """Coerce an int, Fraction or ``"p/q"`` string to a Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"not an exact rational: {x!r}")


class QI:
    """Gaussian rational ``re + im*i``."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = as_fraction(re)
        self.im = as_fraction(im)

    @staticmethod
    def _lift(x):
        if isinstance(x, QI):
            return x
        if isinstance(x, (int, Rational)):
            return QI(x, 0)
        return NotImplemented

    def __add__(self, other):
        o = QI._lift(other)
        if o is NotImplemented:
            return o
        return QI(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __sub__(self, other):
        o = QI._lift(other)
        if o is NotImplemented:
            return o
        return QI(self.re - o.re, self.im - o.im)

    def __rsub__(self, other):
        o = QI._lift(other)
        if o is NotImplemented:
            return o
        return o - self

    def __mul__(self, other):
        o = QI._lift(other)
        if o is NotImplemented:
            return o
        return QI(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = QI._lift(other)
        if o is NotImplemented:
            return o
        n = o.re * o.re + o.im * o.im
        if n == 0:
            raise ZeroDivisionError("QI division by zero")
        return QI((self.re * o.re + self.im * o.im) / n, (self.im * o.re - self.re * o.im) / n)

    def __rtruediv__(self, other):
        o = QI._lift(other)
        if o is NotImplemented:
            return o
        return o / self

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return QI(1) / (self ** -k)
        out, base = QI(1), self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def __neg__(self):
        return QI(-self.re, -self.im)

    def __pos__(self):
        return self

    def __eq__(self, other):
        o = QI._lift(other)
        if o is NotImplemented:
            return NotImplemented
        return self.re == o.re and self.im == o.im

    def __hash__(self):
        if self.im == 0:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def conjugate(self) -> "QI":
        return QI(self.re, -self.im)

    def is_real(self) -> bool:
        return self.im == 0

    def to_fraction(self) -> Fraction:
        if self.im != 0:
            raise ValueError(f"{self} is not real")
        return self.re

    def __repr__(self):
        return f"QI({self.re}, {self.im})"

    def __str__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}*i"
        sign = "+" if self.im > 0 else "-"
        return f"({self.re} {sign} {abs(self.im)}*i)"


I = QI(0, 1)


def realify(x):
    """Return ``x`` as a Fraction when it is an exact real, else unchanged."""
    if isinstance(x, QI) and x.im == 0:
        return x.re
    return x


def scalar_to_json(x):
    """``[num, den]`` for rationals, ``[[num, den], [num, den]]`` for Q(i)."""
    if isinstance(x, QI):
        return [[x.re.numerator, x.re.denominator], [x.im.numerator, x.im.denominator]]
    if isinstance(x, (int, Rational)):
        f = Fraction(x)
        return [f.numerator, f.denominator]
    if isinstance(x, complex):
        return [x.real, x.imag]
    return float(x)


def scalar_from_json(obj):
    if isinstance(obj, list) and len(obj) == 2 and all(isinstance(t, list) for t in obj):
        return QI(Fraction(*obj[0]), Fraction(*obj[1]))
    if isinstance(obj, list) and len(obj) == 2 and all(isinstance(t, int) for t in obj):
        return Fraction(obj[0], obj[1])
    if isinstance(obj, list) and len(obj) == 2:
        return complex(obj[0], obj[1])
    return obj
