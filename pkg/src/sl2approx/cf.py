"""Nearest-integer continued fractions over O_K and the associated constants."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
import sympy

from .errors import IndexOutOfRange, PrecisionInsufficient
from .field import OKInt, RingSpec, nearest_integer
from .inputs import FixedSource
from .pcomplex import PComplex, PrecisionPolicy, _pow2, with_retry

# relative accuracy demanded of every non-zero error term
_EPS_REL_BITS = 32


# --------------------------------------------------------------------------- constants


@dataclass(frozen=True)
class CFConstants:
    """Growth and error constants; exact sympy values with float shadows."""

    theta: sympy.Expr
    r0: int
    C0: sympy.Expr
    C1: sympy.Expr
    r1: int
    C2: sympy.Expr

    def as_floats(self) -> dict[str, float]:
        return {"theta": float(self.theta), "r0": self.r0, "C0": float(self.C0),
                "C1": float(self.C1), "C2": float(self.C2), "r1": self.r1}


def constants(R: RingSpec, theta=None, r0: int | None = None) -> CFConstants:
    """Derive C0, C1, r1, C2 from (theta, r0).

    For d = 7, 11 no growth constants are declared, so ``theta`` and ``r0``
    must be passed explicitly (e.g. measured values from check_hypothesis).
    """
    theta = sympy.nsimplify(theta) if theta is not None else R.theta
    r0 = r0 if r0 is not None else R.r0
    if theta is None or r0 is None:
        raise ValueError(f"no growth constants declared for d={R.d}; pass theta and r0")
    theta = sympy.sympify(theta)
    if not (theta > 1) or r0 < 1:
        raise ValueError("need theta > 1 and r0 >= 1")
    t2 = sympy.expand(theta**2)
    C0 = sympy.nsimplify(sympy.radsimp(r0 * t2 / (t2 - 1)))
    r1 = r0
    while not bool(C0 < theta ** (r1 // r0)):
        r1 += 1
    C2 = sympy.radsimp(1 - C0 * theta ** (-(r1 // r0)))
    return CFConstants(theta, r0, C0, sympy.radsimp(C0 + 1), r1, sympy.nsimplify(C2))


# --------------------------------------------------------------------------- expansion


@dataclass(frozen=True)
class CFExpansion:
    """Partial quotients, convergents and error terms of one expansion.

    ``p_seq``/``q_seq`` start at index -2; use :meth:`p`, :meth:`q` for the
    the usual indexing. ``eps_seq[n] = q_n z - p_n`` for n = 0..depth-1.
    """

    z: PComplex
    ring: RingSpec
    a: tuple[OKInt, ...]
    p_seq: tuple[OKInt, ...]
    q_seq: tuple[OKInt, ...]
    eps_seq: tuple[PComplex, ...]
    terminated: bool
    prec: int
    source: object = field(default=None, compare=False, repr=False)

    @property
    def depth(self) -> int:
        return len(self.a)

    def _check(self, n: int, lo: int) -> int:
        if not lo <= n < self.depth:
            raise IndexOutOfRange(f"index {n} outside [{lo}, {self.depth - 1}]")
        return n

    def p(self, n: int) -> OKInt:
        return self.p_seq[self._check(n, -2) + 2]

    def q(self, n: int) -> OKInt:
        return self.q_seq[self._check(n, -2) + 2]

    def eps(self, n: int) -> PComplex:
        """Error term; eps(-1) = -1 and eps(-2) = z by the recurrence."""
        self._check(n, -2)
        if n == -1:
            return PComplex.from_rational(-1, 0, self.prec)
        if n == -2:
            return self.z
        return self.eps_seq[n]

    def convergent(self, n: int) -> tuple[OKInt, OKInt]:
        return self.p(n), self.q(n)


def _as_source(z):
    if isinstance(z, PComplex):
        return FixedSource(z)
    if hasattr(z, "at"):
        return z
    return FixedSource(PComplex.from_rational(0).coerce(z))


def _expand_at(src, R: RingSpec, max_terms: int, prec: int) -> CFExpansion:
    z = src.at(prec)
    zn = z
    one = R.one()
    a: list[OKInt] = []
    p = [R.zero(), one]
    q = [one, R.zero()]
    terminated = False
    tiny = _pow2(-(prec // 2))
    while len(a) < max_terms:
        an = nearest_integer(zn, R)
        a.append(an)
        p.append(an * p[-1] + p[-2])
        q.append(an * q[-1] + q[-2])
        rest = zn - an.to_complex(prec)
        if rest.contains_zero():
            if rest.err_radius < tiny:
                terminated = True
                break
            raise PrecisionInsufficient(f"cannot decide termination at n={len(a) - 1}")
        if len(a) < max_terms:
            zn = 1 / rest
    eps = []
    for n in range(len(a)):
        e = q[n + 2].to_complex(prec) * z - p[n + 2].to_complex(prec)
        last = terminated and n == len(a) - 1
        if not last and e.err_radius * (1 << _EPS_REL_BITS) > e.abs_mid():
            raise PrecisionInsufficient(f"error term {n} not resolved at {prec} bits")
        eps.append(e)
    return CFExpansion(z, R, tuple(a), tuple(p), tuple(q), tuple(eps), terminated, prec, src)


def expand(z, R: RingSpec, max_terms: int, policy: PrecisionPolicy | None = None) -> CFExpansion:
    """Nearest-integer expansion of ``z`` (a PComplex or a refinable source).

    Stops after ``max_terms`` quotients or when ``z_n - a_n`` is certified
    zero. If the working precision runs out the whole expansion is redone at
    doubled precision; PrecisionInsufficient escapes only past the cap.
    """
    if max_terms < 1:
        raise ValueError("max_terms must be >= 1")
    src = _as_source(z)
    return with_retry(lambda prec: _expand_at(src, R, max_terms, prec), policy)


def error_terms(exp: CFExpansion) -> list[PComplex]:
    if not exp.depth:
        raise ValueError("empty expansion")
    return list(exp.eps_seq)


# --------------------------------------------------------------------------- checks


def _theta_sq_cmp(big: int, small: int, theta2: sympy.Expr, f_theta2: float) -> bool:
    """Exact test of big >= theta2 * small for nonnegative integers."""
    lhs, rhs = float(big), f_theta2 * float(small)
    if math.isfinite(lhs) and math.isfinite(rhs) and abs(lhs - rhs) > 1e-9 * max(lhs, rhs, 1.0):
        return lhs > rhs
    return bool(sympy.Integer(big) - theta2 * sympy.Integer(small) >= 0)


@dataclass(frozen=True)
class HypothesisReport:
    monotone_violation: int | None  # first n >= 1 with |q_n| <= |q_{n-1}|
    growth_violations: tuple[int, ...]  # n with |q_{n+r0}| < theta |q_n|
    min_ratio: float  # min |q_{n+r0}| / |q_n| over n >= 0
    min_ratio_index: int | None
    theta: float | None
    r0: int

    @property
    def passed(self) -> bool:
        return self.monotone_violation is None and not self.growth_violations


def check_hypothesis(exp: CFExpansion, theta=None, r0: int | None = None) -> HypothesisReport:
    """Check monotone denominators and |q_{n+r0}| >= theta |q_n| on exact norms.

    With no declared theta (d = 7, 11) only the empirical ratio is reported.
    """
    R = exp.ring
    theta = theta if theta is not None else R.theta
    r0 = r0 or R.r0 or 2
    norms = [exp.q(n).norm() for n in range(exp.depth)]
    mono = next((n for n in range(1, len(norms)) if norms[n] <= norms[n - 1]), None)
    viol: list[int] = []
    best, best_n = math.inf, None
    if theta is not None:
        t2 = sympy.expand(sympy.sympify(theta) ** 2)
        ft2 = float(t2)
    for n in range(len(norms) - r0):
        ratio = math.sqrt(norms[n + r0] / norms[n])
        if ratio < best:
            best, best_n = ratio, n
        if theta is not None and not _theta_sq_cmp(norms[n + r0], norms[n], t2, ft2):
            viol.append(n)
    return HypothesisReport(mono, tuple(viol), best, best_n,
                            None if theta is None else float(theta), r0)


@dataclass(frozen=True)
class SandwichReport:
    status: str  # "ok", "rational input" or "too short"
    indices: tuple[int, ...] = ()
    upper_margin: tuple[float, ...] = ()  # log(C1/|q_{n+1}|) - log|eps_n|
    lower_margin: tuple[float, ...] = ()  # log|eps_n| - log(C2/|q_{n+1}|^(omega^(r1-1)))
    early_failures: tuple[int, ...] = ()  # failures before the tail window

    @property
    def upper_ok(self) -> bool:
        return all(m >= 0 for m in self.upper_margin)

    @property
    def lower_ok(self) -> bool:
        return all(m >= 0 for m in self.lower_margin)

    @property
    def passed(self) -> bool:
        return self.status == "ok" and self.upper_ok and self.lower_ok


def error_sandwich_check(exp: CFExpansion, omega: float, tail: int = 5,
                         consts: CFConstants | None = None) -> SandwichReport:
    """C2/|q_{n+1}|^(omega^(r1-1)) <= |eps_n| <= C1/|q_{n+1}| for n >= tail."""
    if omega <= 1:
        raise ValueError("omega must exceed 1")
    if exp.terminated:
        return SandwichReport("rational input")
    c = consts or constants(exp.ring)
    lc1 = float(sympy.log(c.C1).evalf(30))
    lc2 = float(sympy.log(c.C2).evalf(30))
    expo = float(omega) ** (c.r1 - 1)
    idx, up, lo, early = [], [], [], []
    for n in range(exp.depth - 1):
        le = float(gmpy2.log(exp.eps(n).abs_mid()))
        lq = 0.5 * math.log(exp.q(n + 1).norm())
        mu, ml = lc1 - lq - le, le - (lc2 - expo * lq)
        if n < tail:
            if mu < 0 or ml < 0:
                early.append(n)
            continue
        idx.append(n)
        up.append(mu)
        lo.append(ml)
    if not idx:
        return SandwichReport("too short", early_failures=tuple(early))
    return SandwichReport("ok", tuple(idx), tuple(up), tuple(lo), tuple(early))


# --------------------------------------------------------------------------- exact helpers


def reconstruct(a: list[OKInt] | tuple[OKInt, ...], n: int) -> tuple[OKInt, OKInt]:
    """Evaluate [a_0; a_1, ..., a_n] backwards as a fraction num/den over O_K."""
    num, den = a[n], a[n].ring.one()
    for i in range(n - 1, -1, -1):
        num, den = a[i] * num + den, num
    return num, den


def same_ratio(p1: OKInt, q1: OKInt, p2: OKInt, q2: OKInt) -> bool:
    """p1/q1 == p2/q2 in K, by cross-multiplication."""
    return p1 * q2 == p2 * q1


@dataclass(frozen=True)
class CFSource:
    """The number [a_0; a_1, ..., a_m, t] with a refinable tail t.

    If |a_i| >= 3 for i >= 1 and |t| >= 3, the nearest-integer expansion
    reproduces a_0..a_m exactly.
    """

    quotients: tuple[OKInt, ...]
    tail: object

    def at(self, prec: int) -> PComplex:
        x = self.tail.at(prec + 16)
        for an in reversed(self.quotients):
            x = an.to_complex(prec + 16) + 1 / x
        return x


def cf_source(quotients, tail) -> CFSource:
    qs = tuple(quotients)
    for an in qs[1:]:
        if an.norm() < 9:
            raise ValueError("quotients after the first need |a| >= 3")
    return CFSource(qs, _as_source(tail))
