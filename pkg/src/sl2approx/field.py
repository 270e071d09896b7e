"""Exact arithmetic in the rings of integers O_K, K = Q(sqrt(-d)), d in {1, 3, 7, 11}.

Elements are stored as ``a + b*w`` with integer coordinates, where the generator
``w`` satisfies ``w**2 = t*w - n`` (``t`` its trace, ``n`` its norm):

    d = 1   w = i                t =  0, n = 1
    d = 3   w = (-1 + i*sqrt3)/2 t = -1, n = 1    (w**2 + w = -1)
    d = 7   w = (1 + i*sqrt7)/2  t =  1, n = 2
    d = 11  w = (1 + i*sqrt11)/2 t =  1, n = 3

so ``norm(a + b*w) = a**2 + t*a*b + n*b**2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import floor

import sympy

from .errors import PrecisionInsufficient, UnsupportedRing
from .pcomplex import PComplex, _UP, ctx

SUPPORTED_D = (1, 3, 7, 11)


@dataclass(frozen=True)
class RingSpec:
    """Parameters of O_K together with the continued-fraction growth constants.

    ``theta`` and ``r0`` are the declared denominator growth constants
    (``|q_{n+r0}| >= theta |q_n|``). They are only known for d = 1 and d = 3;
    for d = 7 and 11 they are ``None`` and must be measured.
    """

    d: int
    trace: int
    nrm: int
    omega_re: Fraction  # real part of w
    omega_im_coef: Fraction  # Im(w) = omega_im_coef * sqrt(d)
    theta: sympy.Expr | None
    r0: int | None
    cover_radius_sq: Fraction

    @property
    def omega(self) -> sympy.Expr:
        return sympy.Rational(self.omega_re) + sympy.I * sympy.Rational(self.omega_im_coef) * sympy.sqrt(self.d)

    @property
    def cover_radius(self) -> sympy.Expr:
        return sympy.sqrt(sympy.Rational(self.cover_radius_sq))

    @property
    def n_units(self) -> int:
        return {1: 4, 3: 6}.get(self.d, 2)

    def zero(self) -> "OKInt":
        return OKInt(0, 0, self.d)

    def one(self) -> "OKInt":
        return OKInt(1, 0, self.d)

    def w(self) -> "OKInt":
        return OKInt(0, 1, self.d)

    def __repr__(self) -> str:
        return f"RingSpec(d={self.d})"


_RINGS = {
    1: RingSpec(1, 0, 1, Fraction(0), Fraction(1), (1 + sympy.sqrt(5)) / 2, 2, Fraction(1, 2)),
    3: RingSpec(3, -1, 1, Fraction(-1, 2), Fraction(1, 2), sympy.Rational(4, 3), 2, Fraction(1, 3)),
    7: RingSpec(7, 1, 2, Fraction(1, 2), Fraction(1, 2), None, None, Fraction(4, 7)),
    11: RingSpec(11, 1, 3, Fraction(1, 2), Fraction(1, 2), None, None, Fraction(9, 11)),
}


def ring(d: int) -> RingSpec:
    try:
        return _RINGS[int(d)]
    except (KeyError, ValueError, TypeError):
        raise UnsupportedRing(f"d must be one of {SUPPORTED_D}, got {d!r}") from None


@lru_cache(maxsize=None)
def _sqrt_d(d: int, prec: int):
    return ctx(prec).sqrt(d)


@dataclass(frozen=True, slots=True)
class OKInt:
    """The element ``a + b*w`` of O_K."""

    a: int
    b: int
    d: int = 1

    @property
    def ring(self) -> RingSpec:
        return ring(self.d)

    def _lift(self, other) -> "OKInt":
        if isinstance(other, OKInt):
            if other.d != self.d:
                raise ValueError(f"mixing rings d={self.d} and d={other.d}")
            return other
        if isinstance(other, int):
            return OKInt(other, 0, self.d)
        return NotImplemented

    def __add__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return OKInt(self.a + o.a, self.b + o.b, self.d)

    __radd__ = __add__

    def __neg__(self):
        return OKInt(-self.a, -self.b, self.d)

    def __sub__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            return o
        return OKInt(self.a - o.a, self.b - o.b, self.d)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._lift(other)
        if o is NotImplemented:
            if isinstance(other, PComplex):
                return other * self
            return o
        R = _RINGS[self.d]
        a, b, c, e = self.a, self.b, o.a, o.b
        be = b * e
        return OKInt(a * c - R.nrm * be, a * e + b * c + R.trace * be, self.d)

    __rmul__ = __mul__

    def __bool__(self) -> bool:
        return bool(self.a or self.b)

    def conj(self) -> "OKInt":
        return OKInt(self.a + self.b * _RINGS[self.d].trace, -self.b, self.d)

    def norm(self) -> int:
        R = _RINGS[self.d]
        return self.a * self.a + R.trace * self.a * self.b + R.nrm * self.b * self.b

    def is_unit(self) -> bool:
        return self.norm() == 1

    def divides(self, other: "OKInt") -> bool:
        return exact_quotient(other, self) is not None

    def to_complex(self, prec: int = 256) -> PComplex:
        """Embed into C; exact when both coordinates are representable in ``prec`` bits."""
        R = _RINGS[self.d]
        re = self.a + self.b * R.omega_re
        if R.d == 1:
            return PComplex.from_rational(re, self.b, prec)
        z = PComplex.from_rational(re, 0, prec)
        if not self.b:
            return z
        im = ctx(prec).mul(_sqrt_d(R.d, prec), mpq_of(self.b * R.omega_im_coef))
        rad = _UP.add(z.err_radius, _UP.mul(_UP.abs(im), _pow2m(prec - 2)))
        return PComplex(z.re, im, prec, rad)

    def __complex__(self) -> complex:
        R = _RINGS[self.d]
        return complex(self.a + self.b * float(R.omega_re), self.b * float(R.omega_im_coef) * R.d ** 0.5)

    def __repr__(self) -> str:
        return f"OKInt({self.a}, {self.b}, d={self.d})"

    def __str__(self) -> str:
        sym = "i" if self.d == 1 else "w"
        if not self.b:
            return str(self.a)
        coef = {1: "", -1: "-"}.get(self.b, f"{self.b}*")
        if not self.a:
            return f"{coef}{sym}"
        sign = "+" if self.b > 0 else ""
        return f"{self.a}{sign}{coef}{sym}"


def mpq_of(f: Fraction):
    import gmpy2

    return gmpy2.mpq(f.numerator, f.denominator)


@lru_cache(maxsize=None)
def _pow2m(e: int):
    import gmpy2

    return gmpy2.mul_2exp(gmpy2.mpfr(1), -e)


def norm(x: OKInt) -> int:
    return x.norm()


def units(R: RingSpec) -> list[OKInt]:
    """All elements of norm 1, in lexicographic (a, b) order."""
    return [OKInt(a, b, R.d) for a in range(-2, 3) for b in range(-1, 2) if OKInt(a, b, R.d).norm() == 1]


# --- nearest lattice points --------------------------------------------------


def _candidates(R: RingSpec, beta: float, re_of_b) -> list[tuple[int, int]]:
    """Coordinates (a, b) around a point; a superset of its nearest lattice points."""
    out = []
    b0 = floor(beta)
    for b in range(b0 - 1, b0 + 3):
        a0 = round(re_of_b(b))
        out.extend((a, b) for a in range(a0 - 1, a0 + 2))
    return out


def nearest_to_rational(alpha: Fraction, beta: Fraction, R: RingSpec) -> OKInt:
    """Nearest element of O_K to the exact point ``alpha + beta*w`` of K.

    Ties go to the lexicographically smallest (a, b).
    """
    t, n = R.trace, R.nrm

    def dist2(ab):
        x, y = alpha - ab[0], beta - ab[1]
        return x * x + t * x * y + n * y * y

    cands = _candidates(R, float(beta), lambda b: float(alpha + (beta - b) * R.omega_re))
    best = min(cands, key=lambda ab: (dist2(ab), ab))
    return OKInt(best[0], best[1], R.d)


def exact_quotient(x: OKInt, y: OKInt) -> OKInt | None:
    """``x / y`` if it lies in O_K, else ``None``."""
    N = y.norm()
    if N == 0:
        raise ZeroDivisionError("division by zero in O_K")
    num = x * y.conj()
    if num.a % N or num.b % N:
        return None
    return OKInt(num.a // N, num.b // N, x.d)


def round_quotient(x: OKInt, y: OKInt) -> OKInt:
    """Nearest element of O_K to the K-rational ``x / y``."""
    N = y.norm()
    if N == 0:
        raise ZeroDivisionError("division by zero in O_K")
    num = x * y.conj()
    return nearest_to_rational(Fraction(num.a, N), Fraction(num.b, N), x.ring)


def extended_gcd(a: OKInt, b: OKInt) -> tuple[OKInt, OKInt, OKInt]:
    """Return ``(g, x, y)`` with ``g = a*x + b*y`` a gcd of ``a`` and ``b``.

    Euclidean descent with nearest-integer quotients; the remainder norm drops
    strictly at every step because the covering radius is below 1.
    """
    if a.d != b.d:
        raise ValueError("mixing rings")
    if not a and not b:
        raise ValueError("extended_gcd(0, 0) is undefined")
    one, zero = OKInt(1, 0, a.d), OKInt(0, 0, a.d)
    r0, r1 = a, b
    x0, x1 = one, zero
    y0, y1 = zero, one
    while r1:
        q = round_quotient(r0, r1)
        r0, r1 = r1, r0 - q * r1
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return r0, x0, y0


# --- nearest lattice point to a ball ----------------------------------------
#
# The midpoint m = (X + iY) / 2**E is an exact dyadic number, so every squared
# distance |m - x|**2 to a lattice point x = a + b*w is P + Q*sqrt(d) with
# rational P, Q. Scaling by 4**(E+1) makes P and Q integers, which lets ties and
# margins be decided exactly.


def _sign_surd(p: int, q: int, d: int) -> int:
    """Sign of p + q*sqrt(d) for integers p, q."""
    if d == 1 or q == 0:
        s = p + q if d == 1 else p
        return (s > 0) - (s < 0)
    if p >= 0 and q >= 0:
        return 1 if (p or q) else 0
    if p <= 0 and q <= 0:
        return -1
    lhs, rhs = p * p, q * q * d
    if p > 0:
        return (lhs > rhs) - (lhs < rhs)
    return (rhs > lhs) - (rhs < lhs)


def _dyadic(x) -> tuple[int, int]:
    m, e = x.as_mantissa_exp()
    return int(m), int(e)


def nearest_integer(z: PComplex, R: RingSpec) -> OKInt:
    """Element of O_K nearest to every point of the ball ``z``.

    Ties between equidistant lattice points are broken toward the
    lexicographically smallest (a, b); a tie can only be certified when the
    ball has radius zero. Raises :class:`PrecisionInsufficient` when the ball
    straddles a Voronoi boundary.
    """
    if not (z.re.is_finite() and z.im.is_finite()):
        raise ValueError("nearest_integer of a non-finite value")
    (mx, ex), (my, ey), (mr, er) = _dyadic(z.re), _dyadic(z.im), _dyadic(z.err_radius)
    E = max(0, -ex, -ey, -er)
    X, Y, rn = mx << (ex + E), my << (ey + E), mr << (er + E)
    two_e = 1 << E
    d = R.d
    w2re = int(2 * R.omega_re)  # 2*Re(w)
    w2im = int(2 * R.omega_im_coef)  # 2*Im(w)/sqrt(d)

    zre, zim = float(z.re), float(z.im)
    beta = zim / (float(R.omega_im_coef) * d ** 0.5)
    cands = _candidates(R, beta, lambda b: zre - b * float(R.omega_re))

    # 4*4**E*|m - x|**2 = (2X - 2**E(2a + b*w2re))**2 + (2Y)**2 + 4**E*b**2*w2im**2*d
    #                     - 2*(2Y)*2**E*b*w2im*sqrt(d)   [for d = 1 the surd folds in]
    def dist(ab):
        a, b = ab
        u = 2 * X - two_e * (2 * a + b * w2re)
        bi = b * w2im
        P = u * u + 4 * Y * Y + two_e * two_e * bi * bi * d
        Q = -4 * Y * two_e * bi
        return P, Q

    scored = [(ab, dist(ab)) for ab in cands]
    best_ab, (bp, bq) = scored[0]
    for ab, (p, q) in scored[1:]:
        s = _sign_surd(p - bp, q - bq, d)
        if s < 0 or (s == 0 and ab < best_ab):
            best_ab, bp, bq = ab, p, q

    # Certify: for every rival x_o, D(x_o) - D(best) > 2|x_o - best| r.
    # Below 2^-(prec/2) an undecided rival is taken as an exact tie.
    exact_ties = z.err_radius < _pow2m(z.prec_bits // 2)
    tied = [best_ab]
    for ab, (p, q) in scored:
        if ab == best_ab:
            continue
        dp, dq = p - bp, q - bq
        s = _sign_surd(dp, dq, d)
        if rn == 0:
            continue  # exact midpoint: a zero difference is a true tie
        ok = s > 0
        if ok:
            Nd = OKInt(ab[0] - best_ab[0], ab[1] - best_ab[1], d).norm()
            # scaled margin: (dp + dq sqrt d)**2 > 64 * 4**E * rn**2 * Nd
            if d == 1:
                ok = (dp + dq) ** 2 > 64 * two_e * two_e * rn * rn * Nd
            else:
                ok = _sign_surd(dp * dp + dq * dq * d - 64 * two_e * two_e * rn * rn * Nd, 2 * dp * dq, d) > 0
        if not ok:
            if not exact_ties:
                raise PrecisionInsufficient("ball straddles a Voronoi boundary")
            tied.append(ab)
    best_ab = min(tied)
    return OKInt(best_ab[0], best_ab[1], d)
