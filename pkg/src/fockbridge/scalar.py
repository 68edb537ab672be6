"""Exact scalars of the form ``a + b*sqrt(2)`` with Gaussian-rational ``a, b``.

Substituting ``Phi = (a + a^+)/sqrt(2)`` produces powers of ``1/sqrt(2)``;
keeping them exact lets canonical serializations compare byte-for-byte.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Rational

_SQRT2 = math.sqrt(2.0)


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, float):
        # shortest round-trip decimal, so 0.1 becomes 1/10 rather than the binary value
        return Fraction(repr(x))
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


class ExactScalar:
    """Element of Q(i)(sqrt 2): ``(ar + ai*i) + (br + bi*i)*sqrt(2)``."""

    __slots__ = ("ar", "ai", "br", "bi", "_hash")

    def __init__(self, ar=0, ai=0, br=0, bi=0):
        self.ar = _frac(ar)
        self.ai = _frac(ai)
        self.br = _frac(br)
        self.bi = _frac(bi)
        self._hash = None

    # -- construction -------------------------------------------------
    @classmethod
    def coerce(cls, x) -> "ExactScalar":
        if isinstance(x, ExactScalar):
            return x
        if isinstance(x, complex):
            return cls(_frac(x.real), _frac(x.imag))
        return cls(_frac(x))

    @classmethod
    def sqrt2(cls) -> "ExactScalar":
        return cls(0, 0, 1, 0)

    @classmethod
    def inv_sqrt2(cls) -> "ExactScalar":
        return cls(0, 0, Fraction(1, 2), 0)

    @classmethod
    def imag_unit(cls) -> "ExactScalar":
        return cls(0, 1)

    # -- predicates ---------------------------------------------------
    def is_zero(self) -> bool:
        return not (self.ar or self.ai or self.br or self.bi)

    def __bool__(self) -> bool:
        return not self.is_zero()

    def is_real(self) -> bool:
        return self.ai == 0 and self.bi == 0

    def has_surd(self) -> bool:
        return bool(self.br or self.bi)

    # -- arithmetic ---------------------------------------------------
    def __add__(self, other):
        try:
            o = ExactScalar.coerce(other)
        except TypeError:
            return NotImplemented
        return ExactScalar(self.ar + o.ar, self.ai + o.ai, self.br + o.br, self.bi + o.bi)

    __radd__ = __add__

    def __neg__(self):
        return ExactScalar(-self.ar, -self.ai, -self.br, -self.bi)

    def __sub__(self, other):
        try:
            o = ExactScalar.coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return ExactScalar.coerce(other) - self

    def __mul__(self, other):
        try:
            o = ExactScalar.coerce(other)
        except TypeError:
            return NotImplemented
        # (a1 + b1 r)(a2 + b2 r) = a1 a2 + 2 b1 b2 + (a1 b2 + b1 a2) r, complex a, b
        a1r, a1i, b1r, b1i = self.ar, self.ai, self.br, self.bi
        a2r, a2i, b2r, b2i = o.ar, o.ai, o.br, o.bi
        ar = a1r * a2r - a1i * a2i + 2 * (b1r * b2r - b1i * b2i)
        ai = a1r * a2i + a1i * a2r + 2 * (b1r * b2i + b1i * b2r)
        br = a1r * b2r - a1i * b2i + b1r * a2r - b1i * a2i
        bi = a1r * b2i + a1i * b2r + b1r * a2i + b1i * a2r
        return ExactScalar(ar, ai, br, bi)

    __rmul__ = __mul__

    def conjugate(self) -> "ExactScalar":
        return ExactScalar(self.ar, -self.ai, self.br, -self.bi)

    def inverse(self) -> "ExactScalar":
        if self.is_zero():
            raise ZeroDivisionError("inverse of exact zero")
        # 1/(a + b r) = (a - b r)/(a^2 - 2 b^2); the denominator is a Gaussian rational
        nr = self.ar * self.ar - self.ai * self.ai - 2 * (self.br * self.br - self.bi * self.bi)
        ni = 2 * self.ar * self.ai - 4 * self.br * self.bi
        den = nr * nr + ni * ni
        inv_r, inv_i = nr / den, -ni / den
        conj_surd = ExactScalar(self.ar, self.ai, -self.br, -self.bi)
        return conj_surd * ExactScalar(inv_r, inv_i)

    def __truediv__(self, other):
        try:
            o = ExactScalar.coerce(other)
        except TypeError:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        return ExactScalar.coerce(other) * self.inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return self.inverse() ** (-n)
        result = ExactScalar(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # -- comparison / hashing -----------------------------------------
    def _key(self):
        return (self.ar, self.ai, self.br, self.bi)

    def __eq__(self, other):
        try:
            o = ExactScalar.coerce(other)
        except TypeError:
            return NotImplemented
        return self._key() == o._key()

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(self._key())
        return self._hash

    # -- conversion ---------------------------------------------------
    def __complex__(self) -> complex:
        return complex(float(self.ar) + _SQRT2 * float(self.br),
                       float(self.ai) + _SQRT2 * float(self.bi))

    def __float__(self) -> float:
        if not self.is_real():
            raise TypeError("complex exact scalar has no float value")
        return float(self.ar) + _SQRT2 * float(self.br)

    def __repr__(self) -> str:
        return f"ExactScalar({format_scalar(self)})"


def _fmt_gauss(re: Fraction, im: Fraction) -> str:
    im_text = str(im)
    sign = "" if im_text.startswith("-") else "+"
    return f"({re}{sign}{im_text}i)"


def format_scalar(c: ExactScalar) -> str:
    """Canonical text: ``(p+qi)``, ``(p+qi)*sqrt2`` or ``((p+qi)+(r+si)*sqrt2)``."""
    rational = _fmt_gauss(c.ar, c.ai)
    if not c.has_surd():
        return rational
    surd = _fmt_gauss(c.br, c.bi) + "*sqrt2"
    if c.ar == 0 and c.ai == 0:
        return surd
    return f"({rational}+{surd})"


ZERO = ExactScalar(0)
ONE = ExactScalar(1)
I = ExactScalar(0, 1)
