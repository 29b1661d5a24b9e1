"""Rational-endpoint interval arithmetic.

Endpoints are exact ``Fraction`` values, so containment is plain arithmetic
rather than a property of a floating-point rounding mode.  ``rounded`` trims
endpoints outward to dyadics when numbers get too long.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import isqrt
from typing import Iterable, Sequence

import mpmath


def floor_dyadic(x: Fraction, bits: int) -> Fraction:
    x = Fraction(x)
    return Fraction((x.numerator << bits) // x.denominator, 1 << bits)


def ceil_dyadic(x: Fraction, bits: int) -> Fraction:
    x = Fraction(x)
    return Fraction(-((-x.numerator << bits) // x.denominator), 1 << bits)


def _rel_bits(x: Fraction, bits: int) -> int:
    """Fractional bits giving roughly ``bits`` significant bits for x."""
    if x == 0:
        return bits
    mag = abs(x.numerator).bit_length() - x.denominator.bit_length()
    return max(bits - mag, 0)


def round_down(x, bits: int) -> Fraction:
    x = Fraction(x)
    if x.denominator == 1:
        return x
    return floor_dyadic(x, _rel_bits(x, bits))


def round_up(x, bits: int) -> Fraction:
    x = Fraction(x)
    if x.denominator == 1:
        return x
    return ceil_dyadic(x, _rel_bits(x, bits))


def sqrt_down(x, bits: int = 64) -> Fraction:
    """Rational lower bound for sqrt(x), exact when x is a rational square."""
    x = Fraction(x)
    if x < 0:
        raise ValueError("sqrt of negative number")
    if x == 0:
        return Fraction(0)
    p, q = x.numerator, x.denominator
    sp, sq = isqrt(p), isqrt(q)
    if sp * sp == p and sq * sq == q:
        return Fraction(sp, sq)
    # sqrt(p/q) = sqrt(p*q)/q
    b = max(0, bits + 2 - (p * q).bit_length() // 2)
    return Fraction(isqrt((p * q) << (2 * b)), q << b)


def sqrt_up(x, bits: int = 64) -> Fraction:
    x = Fraction(x)
    if x < 0:
        raise ValueError("sqrt of negative number")
    if x == 0:
        return Fraction(0)
    p, q = x.numerator, x.denominator
    sp, sq = isqrt(p), isqrt(q)
    if sp * sp == p and sq * sq == q:
        return Fraction(sp, sq)
    b = max(0, bits + 2 - (p * q).bit_length() // 2)
    return Fraction(isqrt((p * q) << (2 * b)) + 1, q << b)


@dataclass(frozen=True)
class Interval:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        lo, hi = Fraction(self.lo), Fraction(self.hi)
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, x) -> Interval:
        return cls(x, x)

    @classmethod
    def coerce(cls, x) -> Interval:
        return x if isinstance(x, Interval) else cls(x, x)

    @property
    def width(self) -> Fraction:
        return self.hi - self.lo

    @property
    def mid(self) -> Fraction:
        return (self.lo + self.hi) / 2

    def contains(self, x) -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= x <= self.hi

    def overlaps(self, other: Interval) -> bool:
        return self.lo <= other.hi and other.lo <= self.hi

    def contains_zero(self) -> bool:
        return self.lo <= 0 <= self.hi

    def __add__(self, other):
        o = Interval.coerce(other)
        return Interval(self.lo + o.lo, self.hi + o.hi)

    __radd__ = __add__

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __sub__(self, other):
        o = Interval.coerce(other)
        return Interval(self.lo - o.hi, self.hi - o.lo)

    def __rsub__(self, other):
        return Interval.coerce(other) - self

    def __mul__(self, other):
        o = Interval.coerce(other)
        if o.lo == o.hi:
            c = o.lo
            return Interval(self.lo * c, self.hi * c) if c >= 0 else Interval(self.hi * c, self.lo * c)
        ps = (self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi)
        return Interval(min(ps), max(ps))

    __rmul__ = __mul__

    def reciprocal(self) -> Interval:
        if self.contains_zero():
            raise ZeroDivisionError("interval contains zero")
        return Interval(1 / self.hi, 1 / self.lo)

    def __truediv__(self, other):
        return self * Interval.coerce(other).reciprocal()

    def __rtruediv__(self, other):
        return Interval.coerce(other) * self.reciprocal()

    def __abs__(self):
        if self.lo >= 0:
            return self
        if self.hi <= 0:
            return -self
        return Interval(0, max(-self.lo, self.hi))

    def sqr(self) -> Interval:
        a = abs(self)
        return Interval(a.lo * a.lo, a.hi * a.hi)

    def __pow__(self, k: int) -> Interval:
        if k < 0:
            return (self ** -k).reciprocal()
        if k % 2 == 0:
            a = abs(self)
            return Interval(a.lo ** k, a.hi ** k)
        return Interval(self.lo ** k, self.hi ** k)

    def sqrt(self, bits: int = 64) -> Interval:
        if self.lo < 0:
            raise ValueError("sqrt of interval with negative part")
        return Interval(sqrt_down(self.lo, bits), sqrt_up(self.hi, bits))

    def rounded(self, bits: int) -> Interval:
        """Outward rounding to about ``bits`` significant bits."""
        return Interval(round_down(self.lo, bits), round_up(self.hi, bits))

    def hull(self, other: Interval) -> Interval:
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def log(self, bits: int = 64) -> Interval:
        """Natural log via mpmath's outward-rounded interval context."""
        if self.lo <= 0:
            raise ValueError("log of non-positive interval")
        ctx = mpmath.iv
        old = ctx.prec
        ctx.prec = bits + 16
        try:
            lo = ctx.log(ctx.mpf(self.lo.numerator) / self.lo.denominator)
            hi = ctx.log(ctx.mpf(self.hi.numerator) / self.hi.denominator)
            return Interval(_mpf_to_fraction(lo.a), _mpf_to_fraction(hi.b))
        finally:
            ctx.prec = old

    def to_json(self) -> dict:
        return {"lo": str(self.lo), "hi": str(self.hi)}

    @classmethod
    def from_json(cls, d) -> Interval:
        return cls(Fraction(d["lo"]), Fraction(d["hi"]))

    def __float__(self):
        return float(self.mid)

    def __repr__(self):
        return f"[{float(self.lo):.6g}, {float(self.hi):.6g}]"


def _mpf_to_fraction(x) -> Fraction:
    sign, m, e, _ = mpmath.mpf(x)._mpf_
    if sign:
        m = -m
    m = int(m)
    return Fraction(m << e) if e >= 0 else Fraction(m, 1 << -e)


def mpf_to_fraction(x) -> Fraction:
    return _mpf_to_fraction(x)


# --------------------------------------------------------------------------
# complex boxes and interval vectors


@dataclass(frozen=True)
class ComplexBox:
    re: Interval
    im: Interval

    def contains(self, z: complex) -> bool:
        return self.re.contains(Fraction(z.real)) and self.im.contains(Fraction(z.imag))

    def abs_interval(self, bits: int = 64) -> Interval:
        return (self.re.sqr() + self.im.sqr()).sqrt(bits)


@dataclass(frozen=True)
class IntervalVector:
    """Box of vectors; used for (co)vector enclosures of eigendirections."""

    comps: tuple[Interval, ...]

    def __post_init__(self):
        object.__setattr__(self, "comps", tuple(Interval.coerce(c) for c in self.comps))

    @classmethod
    def exact(cls, v: Iterable) -> IntervalVector:
        return cls(tuple(Interval.point(Fraction(x)) for x in v))

    def __len__(self):
        return len(self.comps)

    def __iter__(self):
        return iter(self.comps)

    def __getitem__(self, i):
        return self.comps[i]

    def mid(self) -> tuple[Fraction, ...]:
        return tuple(c.mid for c in self.comps)

    def dot(self, other: IntervalVector | Sequence) -> Interval:
        acc = Interval.point(0)
        for a, b in zip(self.comps, other):
            acc = acc + a * b
        return acc

    def norm_sq(self) -> Interval:
        acc = Interval.point(0)
        for c in self.comps:
            acc = acc + c.sqr()
        return acc

    def scale(self, s) -> IntervalVector:
        return IntervalVector(tuple(c * s for c in self.comps))

    def left_mul(self, m) -> IntervalVector:
        """m @ v for an exact SqMatrix m."""
        return IntervalVector(tuple(
            _exact_dot(row, self.comps) for row in m.rows))

    def right_mul(self, m) -> IntervalVector:
        """v @ m for an exact SqMatrix m (covector action)."""
        n = len(self.comps)
        return IntervalVector(tuple(
            _exact_dot([m.rows[i][j] for i in range(n)], self.comps) for j in range(n)))

    def rounded(self, bits: int) -> IntervalVector:
        return IntervalVector(tuple(c.rounded(bits) for c in self.comps))

    def excludes_zero(self) -> bool:
        return any(not c.contains_zero() for c in self.comps)

    def max_rel_width(self) -> Fraction:
        scale = max(max(abs(c.lo), abs(c.hi)) for c in self.comps)
        if scale == 0:
            return Fraction(0)
        return max(c.width for c in self.comps) / scale


def _exact_dot(row: Sequence, comps: Sequence[Interval]) -> Interval:
    lo = Fraction(0)
    hi = Fraction(0)
    for a, c in zip(row, comps):
        if a == 0:
            continue
        if a > 0:
            lo += a * c.lo
            hi += a * c.hi
        else:
            lo += a * c.hi
            hi += a * c.lo
    return Interval(lo, hi)
