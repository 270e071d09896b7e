"""Complex-number sources that can be evaluated at any working precision.

The retry-on-precision-failure policy needs inputs it can re-evaluate with
more bits, so everything user-facing is a *source* with an ``at(prec)``
method rather than a fixed :class:`PComplex`.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, log10
from typing import Protocol

import gmpy2
import sympy
from sympy.parsing.sympy_parser import parse_expr, standard_transformations

from .field import OKInt, RingSpec, extended_gcd, exact_quotient
from .pcomplex import PComplex, _UP, ctx


class ComplexSource(Protocol):
    def at(self, prec: int) -> PComplex: ...


@dataclass(frozen=True)
class FixedSource:
    """A ball that cannot be refined; used when only a PComplex is available."""

    value: PComplex

    def at(self, prec: int) -> PComplex:
        return self.value


def _float_to_ball(f: sympy.Float, prec: int, dps: int) -> tuple[gmpy2.mpfr, gmpy2.mpfr]:
    sign, man, exp, bc = f._mpf_
    if not man:
        return gmpy2.mpfr(0), gmpy2.mpfr(0)
    bits = max(int(bc), 2)
    v = ctx(bits).mul_2exp(gmpy2.mpfr(-int(man) if sign else int(man), bits), int(exp))
    r = ctx(prec).plus(v)
    # sympy's strict evalf guarantees dps digits; add rounding to prec bits on top
    rad = _UP.mul(_UP.abs(v), gmpy2.mpfr(10) ** (2 - dps))
    rad = _UP.add(rad, _UP.mul(_UP.abs(r), gmpy2.mul_2exp(gmpy2.mpfr(1), -prec)))
    return r, rad


@dataclass(frozen=True)
class ExprSource:
    """An exact sympy expression, e.g. ``sqrt(2)``, ``pi/4 + i*sqrt(3)``, ``(1+i)/3``."""

    expr: sympy.Expr
    _cache: dict = field(default_factory=dict, compare=False, hash=False, repr=False)

    def at(self, prec: int) -> PComplex:
        if prec in self._cache:
            return self._cache[prec]
        re, im = self.expr.as_real_imag()
        parts, rad = [], gmpy2.mpfr(0)
        dps = ceil(prec * log10(2)) + 10
        for part in (re, im):
            part = sympy.nsimplify(part) if part.is_Float else part
            if part.is_Rational:
                parts.append(Fraction(int(part.p), int(part.q)))
                continue
            v, r = _float_to_ball(sympy.N(part, dps, strict=True), prec, dps)
            parts.append(v)
            rad = _UP.add(rad, r)
        out = PComplex.from_rational(parts[0], parts[1], prec)
        out = PComplex(out.re, out.im, prec, _UP.add(out.err_radius, rad))
        self._cache[prec] = out
        return out

    def is_zero(self) -> bool:
        return bool(self.expr.is_zero)

    def __str__(self) -> str:
        return str(self.expr)


@dataclass(frozen=True)
class RandomSource:
    """A uniformly random point of the box [-scale, scale]^2 with unbounded precision.

    Bits are drawn from SHAKE-256 keyed by the seed, so evaluating at a higher
    precision only appends bits and never changes the ones already used.
    """

    seed: int | str
    scale: Fraction = Fraction(1)

    def _coord(self, tag: str, nbytes: int) -> Fraction:
        raw = hashlib.shake_256(f"sl2approx:{self.seed}:{tag}".encode()).digest(nbytes)
        u = int.from_bytes(raw, "big")
        return (Fraction(2 * u, 1 << (8 * nbytes)) - 1) * self.scale

    def at(self, prec: int) -> PComplex:
        nbytes = (prec + 15) // 8
        tail = self.scale * Fraction(4, 1 << (8 * nbytes))
        return PComplex.from_rational(self._coord("re", nbytes), self._coord("im", nbytes), prec,
                                      radius=gmpy2.mpfr(tail.numerator) / tail.denominator * 2)

    def __str__(self) -> str:
        return f"random({self.seed})"


def _locals(R: RingSpec | None) -> dict:
    loc = {"i": sympy.I, "I": sympy.I, "pi": sympy.pi, "E": sympy.E, "sqrt": sympy.sqrt}
    if R is not None:
        loc["w"] = R.omega
    return loc


def parse_expr_exact(text: str, R: RingSpec | None = None) -> sympy.Expr:
    """Parse a number; decimal literals are read as exact rationals."""
    expr = parse_expr(str(text).replace("^", "**"), local_dict=_locals(R),
                      transformations=standard_transformations, evaluate=True)
    expr = sympy.nsimplify(expr, rational=True) if expr.has(sympy.Float) else expr
    if expr.free_symbols:
        raise ValueError(f"not a number: {text!r}")
    return expr


def parse_complex(text: str, R: RingSpec | None = None, seed: int | str | None = None):
    """Build a source from text. ``random`` / ``random:<tag>`` give a :class:`RandomSource`."""
    t = str(text).strip()
    if t.startswith("random"):
        tag = t.partition(":")[2]
        return RandomSource(f"{seed}:{tag}" if tag else seed)
    return ExprSource(parse_expr_exact(t, R))


def _coords(expr: sympy.Expr, R: RingSpec) -> tuple[Fraction, Fraction]:
    """Coordinates (alpha, beta) of ``expr = alpha + beta*w`` in K, or ValueError."""
    re, im = sympy.expand_complex(expr).as_real_imag()
    beta = sympy.nsimplify(sympy.simplify(im / (sympy.Rational(R.omega_im_coef) * sympy.sqrt(R.d))))
    alpha = sympy.nsimplify(sympy.simplify(re - beta * sympy.Rational(R.omega_re)))
    if not (alpha.is_Rational and beta.is_Rational):
        raise ValueError(f"{expr} is not an element of Q(sqrt(-{R.d}))")
    return Fraction(int(alpha.p), int(alpha.q)), Fraction(int(beta.p), int(beta.q))


def parse_okint(text: str, R: RingSpec) -> OKInt:
    alpha, beta = _coords(parse_expr_exact(text, R), R)
    if alpha.denominator != 1 or beta.denominator != 1:
        raise ValueError(f"{text!r} is not an algebraic integer of Q(sqrt(-{R.d}))")
    return OKInt(int(alpha), int(beta), R.d)


def parse_krational(text: str, R: RingSpec) -> tuple[OKInt, OKInt]:
    """Write an element of K as a/b with a, b in O_K coprime."""
    alpha, beta = _coords(parse_expr_exact(text, R), R)
    den = alpha.denominator * beta.denominator
    a = OKInt(int(alpha * den), int(beta * den), R.d)
    b = OKInt(den, 0, R.d)
    return reduce_fraction(a, b)


def reduce_fraction(a: OKInt, b: OKInt) -> tuple[OKInt, OKInt]:
    g, _, _ = extended_gcd(a, b)
    return exact_quotient(a, g), exact_quotient(b, g)
