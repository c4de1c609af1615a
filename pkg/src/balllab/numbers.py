"""Scalar arithmetic shared by the exact and high-precision layers.

Exact scalars are Gaussian rationals (:class:`QI`).  Anything involving a
float parameter is promoted to an mpmath number living in the private
context :data:`MP` (60 significant digits), so the global mpmath state of
the caller is never touched.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational

import mpmath

MP = mpmath.MPContext()
MP.dps = 60

#: equality tolerance used when high-precision floats are involved
MP_TOL = MP.mpf("1e-30")


class QI:
    """Complex number with exact rational real and imaginary parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = Fraction(re)
        self.im = Fraction(im)

    @classmethod
    def _raw(cls, re: Fraction, im: Fraction) -> "QI":
        obj = object.__new__(cls)
        obj.re = re
        obj.im = im
        return obj

    @classmethod
    def coerce(cls, x) -> "QI":
        if isinstance(x, QI):
            return x
        if isinstance(x, Rational):
            return cls._raw(Fraction(x), Fraction(0))
        raise TypeError(f"cannot represent {x!r} exactly")

    def __add__(self, other):
        if isinstance(other, QI):
            return QI._raw(self.re + other.re, self.im + other.im)
        if isinstance(other, Rational):
            return QI._raw(self.re + other, self.im)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return QI._raw(-self.re, -self.im)

    def __sub__(self, other):
        if isinstance(other, QI):
            return QI._raw(self.re - other.re, self.im - other.im)
        if isinstance(other, Rational):
            return QI._raw(self.re - other, self.im)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, Rational):
            return QI._raw(other - self.re, -self.im)
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, QI):
            return QI._raw(self.re * other.re - self.im * other.im,
                           self.re * other.im + self.im * other.re)
        if isinstance(other, Rational):
            return QI._raw(self.re * other, self.im * other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Rational):
            return QI._raw(self.re / other, self.im / other)
        if isinstance(other, QI):
            d = other.re * other.re + other.im * other.im
            return self * QI._raw(other.re / d, -other.im / d)
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, Rational):
            return QI._raw(Fraction(other), Fraction(0)) / self
        return NotImplemented

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            return NotImplemented
        out = QI._raw(Fraction(1), Fraction(0))
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def conjugate(self) -> "QI":
        return QI._raw(self.re, -self.im)

    def abs2(self) -> Fraction:
        return self.re * self.re + self.im * self.im

    def __eq__(self, other):
        if isinstance(other, QI):
            return self.re == other.re and self.im == other.im
        if isinstance(other, Rational):
            return self.im == 0 and self.re == other
        return NotImplemented

    def __hash__(self):
        return hash((self.re, self.im))

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def to_mp(self):
        return MP.mpc(MP.mpf(self.re.numerator) / self.re.denominator,
                      MP.mpf(self.im.numerator) / self.im.denominator)

    def __repr__(self):
        if self.im == 0:
            return f"QI({self.re})"
        return f"QI({self.re}, {self.im})"


ONE = QI(1)
ZERO = QI(0)


def is_exact(x) -> bool:
    return isinstance(x, (QI, Rational))


def to_mp(x):
    """Promote any supported scalar to an mpmath number of context MP."""
    if isinstance(x, QI):
        return x.to_mp()
    if isinstance(x, Fraction):
        return MP.mpf(x.numerator) / x.denominator
    if isinstance(x, complex):
        return MP.mpc(x)
    return MP.convert(x)


def as_param(x):
    """Normalize an operator parameter: ints/Fractions/rational strings stay exact."""
    if isinstance(x, bool):
        raise TypeError("boolean is not a parameter")
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x)
        except ValueError:
            return MP.mpf(x)
    if isinstance(x, float):
        if x.is_integer():
            return Fraction(int(x))
        return MP.mpf(x)
    return MP.convert(x)


def mul(a, b):
    """Product that promotes to high precision when either factor is inexact."""
    if is_exact(a) and is_exact(b):
        return a * b
    return to_mp(a) * to_mp(b)


def add(a, b):
    if is_exact(a) and is_exact(b):
        return a + b
    return to_mp(a) + to_mp(b)


def is_zero(x, tol=None) -> bool:
    if is_exact(x):
        return x == 0
    return abs(x) <= (MP_TOL if tol is None else tol)


def pochhammer(a, k: int):
    """Rising factorial (a)_k; exact for rational a."""
    if k < 0:
        raise ValueError("k must be non-negative")
    if isinstance(a, Rational):
        out = Fraction(1)
        a = Fraction(a)
        for i in range(k):
            out *= a + i
        return out
    return MP.rf(to_mp(a), k)


def parse_rational(text) -> Fraction:
    """Parse "p/q", integers or decimal strings into a Fraction."""
    if isinstance(text, (int, Fraction)):
        return Fraction(text)
    return Fraction(str(text).strip())
