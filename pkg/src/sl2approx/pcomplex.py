"""Precision-tracked complex numbers.

A :class:`PComplex` is a ball in the complex plane: a binary floating point
midpoint ``re + i*im`` carried at ``prec_bits`` bits and a radius
``err_radius`` that bounds the distance from the midpoint to the true value.
Radii are kept at 64 bits and are always rounded upward, so they never
underestimate the accumulated error.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, TypeVar

import gmpy2
from gmpy2 import mpfr, mpq

from .errors import DivisionNearZero, PrecisionInsufficient

RADIUS_PREC = 64
DEFAULT_PREC = 256

_UP = gmpy2.context(precision=RADIUS_PREC, round=gmpy2.RoundUp)
_DOWN = gmpy2.context(precision=RADIUS_PREC, round=gmpy2.RoundDown)
_ZERO = mpfr(0)


@lru_cache(maxsize=None)
def ctx(prec: int):
    """Round-to-nearest gmpy2 context at ``prec`` bits."""
    return gmpy2.context(precision=prec)


@lru_cache(maxsize=None)
def _pow2(e: int) -> mpfr:
    return gmpy2.mul_2exp(mpfr(1), e)


def _rounding(prec: int, mag) -> mpfr:
    """Upper bound for one round-to-nearest error on a value of size ``mag``."""
    return _UP.mul(mag, _pow2(-prec))


def _neg(x: mpfr) -> mpfr:
    """Exact negation; plain ``-x`` would round to the global 53-bit context."""
    return ctx(max(x.precision, 2)).minus(x)


def _absum(re, im) -> mpfr:
    return _UP.add(_UP.abs(re), _UP.abs(im))


def _exact_mpfr(x, prec: int) -> tuple[mpfr, mpfr]:
    """Round a rational ``x`` to ``prec`` bits; return (value, error bound)."""
    if isinstance(x, mpfr):
        v = ctx(prec).plus(x)
        exact = v == x
    else:
        q = mpq(x.numerator, x.denominator) if isinstance(x, Fraction) else mpq(x)
        v = mpfr(q, prec)
        exact = v == q
    return v, (_ZERO if exact else _rounding(prec, _UP.abs(v)))


@dataclass(frozen=True, slots=True)
class PComplex:
    re: mpfr
    im: mpfr
    prec_bits: int
    err_radius: mpfr = _ZERO

    # construction -------------------------------------------------------

    @classmethod
    def from_rational(cls, re, im=0, prec: int = DEFAULT_PREC, radius=0) -> "PComplex":
        """Ball around ``re + i*im`` for exact rationals (int, Fraction, mpq, mpfr)."""
        r, er = _exact_mpfr(re, prec)
        i, ei = _exact_mpfr(im, prec)
        rad = _UP.add(_UP.add(er, ei), mpfr(radius, RADIUS_PREC) if radius else _ZERO)
        return cls(r, i, prec, rad)

    @classmethod
    def from_complex(cls, z: complex, prec: int = DEFAULT_PREC) -> "PComplex":
        """Treat a Python complex (or float) as an exact binary value."""
        z = complex(z)
        return cls.from_rational(mpfr(z.real), mpfr(z.imag), prec)

    def coerce(self, other) -> "PComplex":
        if isinstance(other, PComplex):
            return other
        if hasattr(other, "to_complex"):
            return other.to_complex(self.prec_bits)
        if isinstance(other, complex):
            return PComplex.from_complex(other, self.prec_bits)
        return PComplex.from_rational(other, 0, self.prec_bits)

    # arithmetic ---------------------------------------------------------

    def __neg__(self) -> "PComplex":
        return PComplex(_neg(self.re), _neg(self.im), self.prec_bits, self.err_radius)

    def conj(self) -> "PComplex":
        return PComplex(self.re, _neg(self.im), self.prec_bits, self.err_radius)

    def __add__(self, other) -> "PComplex":
        o = self.coerce(other)
        p = max(self.prec_bits, o.prec_bits)
        c = ctx(p)
        re, im = c.add(self.re, o.re), c.add(self.im, o.im)
        rad = _UP.add(_UP.add(self.err_radius, o.err_radius), _rounding(p, _absum(re, im)))
        return PComplex(re, im, p, rad)

    __radd__ = __add__

    def __sub__(self, other) -> "PComplex":
        return self + (-self.coerce(other))

    def __rsub__(self, other) -> "PComplex":
        return self.coerce(other) + (-self)

    def __mul__(self, other) -> "PComplex":
        o = self.coerce(other)
        p = max(self.prec_bits, o.prec_bits)
        c = ctx(p)
        a, b, x, y = self.re, self.im, o.re, o.im
        re = c.fmms(a, x, b, y)
        im = c.fmma(a, y, b, x)
        m1, m2 = _absum(a, b), _absum(x, y)
        rad = _UP.add(_UP.mul(m1, o.err_radius), _UP.mul(m2, self.err_radius))
        rad = _UP.add(rad, _UP.mul(self.err_radius, o.err_radius))
        rad = _UP.add(rad, _rounding(p, _absum(re, im)))
        return PComplex(re, im, p, rad)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "PComplex":
        o = self.coerce(other)
        p = max(self.prec_bits, o.prec_bits)
        wlo = _DOWN.sub(_DOWN.hypot(o.re, o.im), o.err_radius)
        if wlo <= 0:
            raise DivisionNearZero("divisor ball contains zero")
        c = ctx(p + 8)
        den = c.fmma(o.re, o.re, o.im, o.im)
        re = ctx(p).div(c.fmma(self.re, o.re, self.im, o.im), den)
        im = ctx(p).div(c.fmms(self.im, o.re, self.re, o.im), den)
        qmag = _UP.div(_UP.hypot(self.re, self.im), wlo)
        num = _UP.add(self.err_radius, _UP.mul(qmag, o.err_radius))
        rad = _UP.div(num, wlo)
        rad = _UP.add(rad, _UP.mul(_rounding(p, qmag), mpfr(8)))
        return PComplex(re, im, p, rad)

    def __rtruediv__(self, other) -> "PComplex":
        return self.coerce(other) / self

    def with_prec(self, prec: int) -> "PComplex":
        """Round the midpoint to ``prec`` bits, absorbing the rounding into the radius."""
        re, er = _exact_mpfr(self.re, prec)
        im, ei = _exact_mpfr(self.im, prec)
        return PComplex(re, im, prec, _UP.add(self.err_radius, _UP.add(er, ei)))

    # magnitudes and predicates -----------------------------------------

    def abs_mid(self) -> mpfr:
        return ctx(self.prec_bits).hypot(self.re, self.im)

    def abs_upper(self) -> mpfr:
        return _UP.add(_UP.hypot(self.re, self.im), self.err_radius)

    def abs_lower(self) -> mpfr:
        lo = _DOWN.sub(_DOWN.hypot(self.re, self.im), self.err_radius)
        return lo if lo > 0 else _ZERO

    def contains_zero(self) -> bool:
        return _DOWN.hypot(self.re, self.im) <= self.err_radius

    def log_abs(self) -> float:
        m = self.abs_mid()
        return float(gmpy2.log(m)) if m > 0 else float("-inf")

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __repr__(self) -> str:
        return f"PComplex({float(self.re):.6g}{float(self.im):+.6g}j ± {float(self.err_radius):.2g}, {self.prec_bits}b)"


def sup_upper(*zs: PComplex) -> mpfr:
    return max(z.abs_upper() for z in zs)


def sup_lower(*zs: PComplex) -> mpfr:
    return max(z.abs_lower() for z in zs)


def sup_mid(*zs: PComplex) -> mpfr:
    return max(z.abs_mid() for z in zs)


def certainly_le(x: PComplex, y: PComplex) -> bool:
    """|x| <= |y| holds for every value in both balls."""
    return x.abs_upper() <= y.abs_lower()


@dataclass(frozen=True)
class PrecisionPolicy:
    """Start precision and cap for the double-on-failure retry loop."""

    start: int = DEFAULT_PREC
    cap: int = 8192

    def __post_init__(self):
        if self.start < 32 or self.cap < self.start:
            raise ValueError("need 32 <= start <= cap")

    def ladder(self):
        p = self.start
        while p <= self.cap:
            yield p
            p *= 2


T = TypeVar("T")


def with_retry(fn: Callable[[int], T], policy: PrecisionPolicy | None = None) -> T:
    """Call ``fn(prec)`` with doubling precision until it stops raising."""
    policy = policy or PrecisionPolicy()
    last = None
    for prec in policy.ladder():
        try:
            return fn(prec)
        except PrecisionInsufficient as exc:
            last = exc
    raise PrecisionInsufficient(f"failed up to {policy.cap} bits: {last}") from last
