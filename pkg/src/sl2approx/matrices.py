"""SL2(O_K) matrices and the gamma = N U^l M_k constructions."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import gmpy2

from .cf import CFExpansion, CFConstants, constants
from .errors import DivisionNearZero, IndexOutOfRange, NotCoprime, PrecisionInsufficient
from .field import OKInt, RingSpec, extended_gcd, round_quotient
from .pcomplex import PComplex, _DOWN, _UP, _pow2, ctx

DEFAULT_OMEGA = 1 + 2**-4

ORIGIN, RATIONAL, IRRATIONAL = "origin", "rational_slope", "irrational_slope"


# --------------------------------------------------------------------------- Mat2


@dataclass(frozen=True, slots=True)
class Mat2:
    """The matrix ((v1, u1), (v2, u2)) over O_K."""

    v1: OKInt
    u1: OKInt
    v2: OKInt
    u2: OKInt

    @classmethod
    def of(cls, R: RingSpec, v1, u1, v2, u2) -> "Mat2":
        lift = lambda x: x if isinstance(x, OKInt) else OKInt(int(x), 0, R.d)
        return cls(lift(v1), lift(u1), lift(v2), lift(u2))

    @classmethod
    def identity(cls, R: RingSpec) -> "Mat2":
        return cls.of(R, 1, 0, 0, 1)

    @classmethod
    def J(cls, R: RingSpec) -> "Mat2":
        return cls.of(R, 0, -1, 1, 0)

    @classmethod
    def U(cls, ell: OKInt) -> "Mat2":
        R = ell.ring
        return cls.of(R, 1, ell, 0, 1)

    @property
    def ring(self) -> RingSpec:
        return self.v1.ring

    def entries(self) -> tuple[OKInt, OKInt, OKInt, OKInt]:
        return self.v1, self.u1, self.v2, self.u2

    def det(self) -> OKInt:
        return self.v1 * self.u2 - self.u1 * self.v2

    def __matmul__(self, o: "Mat2") -> "Mat2":
        return Mat2(self.v1 * o.v1 + self.u1 * o.v2, self.v1 * o.u1 + self.u1 * o.u2,
                    self.v2 * o.v1 + self.u2 * o.v2, self.v2 * o.u1 + self.u2 * o.u2)

    def inverse(self) -> "Mat2":
        """Inverse of a determinant-one matrix."""
        if self.det() != self.ring.one():
            raise ValueError("inverse() needs det = 1")
        return Mat2(self.u2, -self.u1, -self.v2, self.v1)

    def height_norm(self) -> int:
        """Square of the height max |entry|, exact."""
        return max(x.norm() for x in self.entries())

    def height(self) -> float:
        return math.sqrt(self.height_norm())

    def log_height(self) -> float:
        return 0.5 * math.log(self.height_norm()) if self.height_norm() else -math.inf

    def act(self, z1: PComplex, z2: PComplex) -> tuple[PComplex, PComplex]:
        prec = max(z1.prec_bits, z2.prec_bits)
        c = lambda x: x.to_complex(prec)
        return c(self.v1) * z1 + c(self.u1) * z2, c(self.v2) * z1 + c(self.u2) * z2

    def power_J(self, e: int) -> "Mat2":
        """self @ J**e for e in {-1, 0, 1}."""
        if e == 0:
            return self
        J = Mat2.J(self.ring)
        return self @ (J if e > 0 else J.inverse())

    def __str__(self) -> str:
        return f"[[{self.v1}, {self.u1}], [{self.v2}, {self.u2}]]"


def jpow(R: RingSpec, e: int) -> Mat2:
    return Mat2.identity(R).power_J(e)


# --------------------------------------------------------------------------- basic matrices


def convergent_matrix(exp: CFExpansion, k: int) -> Mat2:
    """M_k = ((q_k, -p_k), ((-1)^(k-1) q_{k-1}, (-1)^k p_{k-1}))."""
    if not 0 <= k < exp.depth:
        raise IndexOutOfRange(f"k={k} outside [0, {exp.depth - 1}]")
    sg = 1 if k % 2 else -1  # (-1)^(k-1)
    return Mat2(exp.q(k), -exp.p(k), exp.q(k - 1) * sg, exp.p(k - 1) * (-sg))


def normalize_slope(z1: PComplex, z2: PComplex) -> tuple[tuple[PComplex, PComplex], bool]:
    """Apply J when |z1| > |z2| so the slope has modulus at most 1.

    Overlapping intervals count as |slope| <= 1 only within a relative slack
    of 2^(-prec/2); otherwise PrecisionInsufficient.
    """
    a_lo, a_hi = z1.abs_lower(), z1.abs_upper()
    b_lo, b_hi = z2.abs_lower(), z2.abs_upper()
    if a_lo > b_hi:
        return (-z2, z1), True
    if a_hi <= b_lo:
        return (z1, z2), False
    prec = max(z1.prec_bits, z2.prec_bits)
    if a_hi <= _DOWN.mul(b_lo, _DOWN.add(1, _pow2(-(prec // 2)))):
        return (z1, z2), False
    raise PrecisionInsufficient("cannot decide whether |z1| > |z2|")


def normalize_rational(a: OKInt, b: OKInt) -> tuple[tuple[OKInt, OKInt], bool]:
    """J-normalise an exact slope a/b so that |a| <= |b|."""
    if a.norm() > b.norm():
        return (-b, a), True
    return (a, b), False


def _unit_inverse(g: OKInt) -> OKInt:
    return g.conj()  # norm 1


def target_matrix_rational(a: OKInt, b: OKInt) -> Mat2:
    """N = ((a, a'), (b, b')) with det 1 and |b'| <= |b|."""
    if max(1, a.norm()) > b.norm():
        raise ValueError("need max(1, |a|) <= |b|")
    g, x, y = extended_gcd(a, b)
    if not g.is_unit():
        raise NotCoprime(f"gcd({a}, {b}) = {g} is not a unit")
    gi = _unit_inverse(g)
    bp, ap = x * gi, -(y * gi)
    m = round_quotient(bp, b)
    bp, ap = bp - m * b, ap - m * a
    N = Mat2(a, ap, b, bp)
    assert N.det() == a.ring.one() and bp.norm() <= b.norm()
    return N


def target_matrix_irrational(exp_y: CFExpansion, j: int) -> Mat2:
    """N_j = ((t_j, (-1)^(j-1) t_{j-1}), (s_j, (-1)^(j-1) s_{j-1})); j = 0 is allowed."""
    if not 0 <= j < exp_y.depth:
        raise IndexOutOfRange(f"j={j} outside [0, {exp_y.depth - 1}]")
    sg = 1 if j % 2 else -1
    return Mat2(exp_y.p(j), exp_y.p(j - 1) * sg, exp_y.q(j), exp_y.q(j - 1) * sg)


def build_gamma(N: Mat2, ell: OKInt, M_k: Mat2) -> Mat2:
    return N @ Mat2.U(ell) @ M_k


# --------------------------------------------------------------------------- rho and ell


def rho(k: int, N: Mat2, z2: PComplex, y2: PComplex, exp_z: CFExpansion) -> PComplex:
    """(-1)^(k-1) y2/(z2 s eps_{k-1}) - (-1)^(k-1) eps_k/eps_{k-1} - s'/s."""
    prec = max(z2.prec_bits, y2.prec_bits, exp_z.prec)
    s, sp = N.v2.to_complex(prec), N.u2.to_complex(prec)
    ek, ekm1 = exp_z.eps(k), exp_z.eps(k - 1)
    sg = 1 if k % 2 else -1
    out = y2 / (z2 * s * ekm1) * sg - (ek / ekm1) * sg
    if N.u2:
        out = out - sp / s
    return out


def _lattice_box(rho_: PComplex, R: RingSpec, radius: float) -> list[OKInt]:
    """Lattice points in a box around rho; exact rational bounds (rho may be huge)."""
    c = float(R.omega_im_coef) * math.sqrt(R.d)
    re, im, rad = gmpy2.mpq(rho_.re), gmpy2.mpq(rho_.im), gmpy2.mpq(radius)
    beta = im / gmpy2.mpq(c)
    span_b = rad / gmpy2.mpq(c) + 1
    b_lo, b_hi = math.floor(beta - span_b), math.ceil(beta + span_b)
    wre = gmpy2.mpq(R.omega_re.numerator, R.omega_re.denominator)
    out = []
    for b in range(b_lo, b_hi + 1):
        alpha = re - b * wre
        for a in range(math.floor(alpha - rad - 1), math.ceil(alpha + rad + 1) + 1):
            out.append(OKInt(a, b, R.d))
    return out


def _sqdist_form(ell: OKInt, r: PComplex) -> tuple[gmpy2.mpfr, gmpy2.mpfr]:
    """|ell|^2 - 2 Re(ell * conj(rho)) (= |ell - rho|^2 - |rho|^2) with an error bound."""
    prec = r.prec_bits + 16
    e = ell.to_complex(prec)
    c = ctx(prec)
    lin = c.fmma(e.re, r.re, e.im, r.im)
    val = c.sub(ell.norm(), c.mul(2, lin))
    err = _UP.mul(_UP.mul(2, e.abs_upper()), r.err_radius)
    err = _UP.add(err, _UP.mul(_UP.add(_UP.abs(val), 4), _pow2(-r.prec_bits)))
    return val, err


def _sq_modulus_bounds(x: PComplex) -> tuple[gmpy2.mpq, gmpy2.mpq]:
    """Exact rational bounds on |x|^2 over the ball (|x| may need more than 64 bits)."""
    m2 = gmpy2.mpq(x.re) ** 2 + gmpy2.mpq(x.im) ** 2
    if x.err_radius == 0:
        return m2, m2
    m_up = gmpy2.mpq(ctx(64).sqrt(m2)) * (1 + gmpy2.mpq(1, 1 << 50))
    r = gmpy2.mpq(x.err_radius)
    return max(m2 - 2 * m_up * r, gmpy2.mpq(0)), m2 + 2 * m_up * r + r * r


def choose_ell(rho_: PComplex, R: RingSpec) -> OKInt:
    """Closest lattice point to rho among those with |ell| <= |rho|.

    Such a point always exists within 2*cover_radius of rho, so that is the
    effective C3 here. Undecidable comparisons raise PrecisionInsufficient,
    except once the ball is narrower than 2^(-prec/2): then rho is taken to
    sit exactly on the boundary in question (it can, e.g. for quadratic
    irrationals) and ties go to the smaller norm, then the smaller (a, b).
    """
    C3 = 2 * math.sqrt(float(R.cover_radius_sq))
    n_lo, n_hi = _sq_modulus_bounds(rho_)
    exact_ties = rho_.err_radius < _pow2(-(rho_.prec_bits // 2))
    ok, unsure = [], []
    for ell in _lattice_box(rho_, R, C3):
        dist_lo = (ell.to_complex(rho_.prec_bits) - rho_).abs_lower()
        if dist_lo > C3 + 1e-9:
            continue
        n = ell.norm()
        if n <= n_lo or (exact_ties and n <= n_hi):
            ok.append(ell)
        elif n <= n_hi:
            unsure.append(ell)
    if not ok:
        raise PrecisionInsufficient("no lattice point certified inside |ell| <= |rho|")
    key = lambda e: (e.norm(), e.a, e.b)
    scored = sorted(((_sqdist_form(e, rho_), key(e), e) for e in ok), key=lambda t: (t[0][0], t[1]))
    (bv, be), _, best = scored[0]
    tied = [best]
    for (v, e), _, ell in scored[1:]:
        if v - bv > _UP.add(be, e):
            continue  # certified farther
        if not exact_ties:
            raise PrecisionInsufficient("ell choice not decidable at this precision")
        tied.append(ell)
    for u in unsure:
        v, e = _sqdist_form(u, rho_)
        if v - bv <= _UP.add(be, e):
            raise PrecisionInsufficient("ell choice not decidable at this precision")
    return min(tied, key=key)


# --------------------------------------------------------------------------- targets and results


@dataclass(frozen=True)
class TargetSpec:
    """Target point y in C^2: the origin, a K-rational slope a/b, or a generic point."""

    cls: str
    y1: object = None  # sources with .at(prec)
    y2: object = None
    a: OKInt | None = None
    b: OKInt | None = None

    @classmethod
    def origin(cls) -> "TargetSpec":
        return cls(ORIGIN)

    @classmethod
    def rational(cls, a: OKInt, b: OKInt, y2) -> "TargetSpec":
        g, _, _ = extended_gcd(a, b)
        if not g.is_unit():
            raise NotCoprime(f"gcd({a}, {b}) = {g} is not a unit")
        return cls(RATIONAL, None, y2, a, b)

    @classmethod
    def irrational(cls, y1, y2) -> "TargetSpec":
        return cls(IRRATIONAL, y1, y2)

    def values(self, prec: int, R: RingSpec) -> tuple[PComplex, PComplex]:
        if self.cls == ORIGIN:
            zero = PComplex.from_rational(0, 0, prec)
            return zero, zero
        y2 = self.y2.at(prec)
        if self.cls == RATIONAL:
            return self.a.to_complex(prec) * y2 / self.b.to_complex(prec), y2
        return self.y1.at(prec), y2


@dataclass(frozen=True)
class GammaResult:
    cls: str
    gamma: Mat2
    k: int
    j: int | None
    ell: OKInt
    rho: PComplex | None
    residual: tuple[PComplex, PComplex]
    log_height: float
    log_err: float
    height_bounds: tuple[float, float]  # log of predicted lower / upper height
    predicted_bound: float  # log of the residual bound without its constant
    checks: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def height(self) -> float:
        return math.exp(self.log_height)

    @property
    def err(self) -> float:
        return math.exp(self.log_err)

    @property
    def measured_constant(self) -> float:
        return math.exp(self.log_err - self.predicted_bound)


# --------------------------------------------------------------------------- residuals


@dataclass(frozen=True)
class Residual:
    lam1: PComplex
    lam2: PComplex
    agree: bool  # the two evaluation paths overlap

    def sup_mid(self) -> gmpy2.mpfr:
        return max(self.lam1.abs_mid(), self.lam2.abs_mid())

    def sup_upper(self) -> gmpy2.mpfr:
        return max(self.lam1.abs_upper(), self.lam2.abs_upper())


def residual(gamma: Mat2, z: tuple[PComplex, PComplex], y: tuple[PComplex, PComplex]) -> Residual:
    """gamma z - y, computed directly and as z2 (v xi + u) - y, cross-checked."""
    z1, z2 = z
    w1, w2 = gamma.act(z1, z2)
    d1, d2 = w1 - y[0], w2 - y[1]
    prec = max(z1.prec_bits, z2.prec_bits)
    try:
        xi = z1 / z2
        c = lambda x: x.to_complex(prec)
        l1 = z2 * (c(gamma.v1) * xi + c(gamma.u1)) - y[0]
        l2 = z2 * (c(gamma.v2) * xi + c(gamma.u2)) - y[1]
        agree = (d1 - l1).contains_zero() and (d2 - l2).contains_zero()
    except DivisionNearZero:
        agree = True  # z2 ~ 0: the slope form is undefined
    return Residual(d1, d2, agree)


def _log(x) -> float:
    x = gmpy2.mpfr(x)
    return float(gmpy2.log(x)) if x > 0 else -math.inf


def _lognorm(x: OKInt) -> float:
    n = x.norm()
    return 0.5 * math.log(n) if n else -math.inf


def _logsum(*logs: float) -> float:
    m = max(logs)
    if m == -math.inf:
        return m
    return m + math.log(sum(math.exp(v - m) for v in logs))


# --------------------------------------------------------------------------- constructions


def gamma_origin(exp_z: CFExpansion, k: int, z: tuple[PComplex, PComplex], j_applied: bool = False,
                 consts: CFConstants | None = None) -> GammaResult:
    """gamma = M_k (times J when the slope was normalised); y = 0."""
    R = exp_z.ring
    c = consts or constants(R)
    M = convergent_matrix(exp_z, k)
    gamma = M.power_J(1 if j_applied else 0)
    zero = PComplex.from_rational(0, 0, exp_z.prec)
    res = residual(gamma, z, (zero, zero))
    zn = normalize_slope(*z)[0] if j_applied else z
    sg = 1 if k % 2 else -1
    expect = (zn[1] * exp_z.eps(k), zn[1] * exp_z.eps(k - 1) * sg)
    ident = all((a - b).contains_zero() for a, b in zip((res.lam1, res.lam2), expect))
    lz = _log(max(z[0].abs_mid(), z[1].abs_mid()))
    lq = _lognorm(exp_z.q(k))
    log_err = _log(res.sup_mid())
    bound = lz + math.log(float(c.C1)) - lq
    return GammaResult(
        ORIGIN, gamma, k, None, R.zero(), None, (res.lam1, res.lam2), gamma.log_height(), log_err,
        (lq, _logsum(lq, 0.0)), lz - lq,
        checks={"det": gamma.det() == R.one(), "cross": res.agree, "identity": ident,
                "lbmu": log_err <= bound + 1e-12},
    )


def _construct(exp_z: CFExpansion, N: Mat2, k: int, zn, yn):
    """Common core on normalised data: rho, ell, gamma'' = N U^ell M_k and checks."""
    R = exp_z.ring
    M = convergent_matrix(exp_z, k)
    r = rho(k, N, zn[1], yn[1], exp_z)
    ell = choose_ell(r, R)
    g = build_gamma(N, ell, M)
    res = residual(g, zn, yn)
    sg = 1 if k % 2 else -1
    prec = r.prec_bits
    fact = zn[1] * N.v2.to_complex(prec) * exp_z.eps(k - 1) * (ell.to_complex(prec) - r) * sg
    s, sp = N.v2, N.u2
    closed = s * exp_z.q(k) + exp_z.q(k - 1) * (s * ell + sp) * sg
    checks = {
        "det": g.det() == R.one(),
        "cross": res.agree,
        "lambda2_factor": (res.lam2 - fact).contains_zero(),
        "closed_form": g.v2 == closed,
        "ell_le_rho": ell.norm() <= _sq_modulus_bounds(r)[1],
    }
    return M, r, ell, g, res, checks


def _finish(cls, gamma2: Mat2, ez: int, ey: int, z, y, k, j, ell, r, checks, hb, pb, diag) -> GammaResult:
    R = gamma2.ring
    gamma = jpow(R, -ey) @ gamma2.power_J(ez)
    res = residual(gamma, z, y)
    checks = dict(checks, det_final=gamma.det() == R.one())
    return GammaResult(cls, gamma, k, j, ell, r, (res.lam1, res.lam2), gamma.log_height(),
                       _log(res.sup_mid()), hb, pb, checks, diag)


def gamma_rational(exp_z: CFExpansion, target: TargetSpec, k: int, z, omega: float = DEFAULT_OMEGA,
                   j_applied: bool = False, consts: CFConstants | None = None) -> GammaResult:
    """gamma = N U^ell M_k for a target with K-rational slope a/b."""
    R = exp_z.ring
    c = consts or constants(R)
    prec = exp_z.prec
    y = target.values(prec, R)
    zn = normalize_slope(*z)[0] if j_applied else z
    (a, b), ey = normalize_rational(target.a, target.b)
    yn = (-y[1], y[0]) if ey else y
    N = target_matrix_rational(a, b)
    M, r, ell, g2, res, checks = _construct(exp_z, N, k, zn, yn)
    C3 = 2 * math.sqrt(float(R.cover_radius_sq))
    lq, lqm = _lognorm(exp_z.q(k)), _lognorm(exp_z.q(k - 1))
    lz2, lb = _log(zn[1].abs_mid()), _lognorm(b)
    lam2_bound = math.log(float(c.C1) * C3) + lz2 + lb - lq
    checks["lambda2_bound"] = _log(res.lam2.abs_mid()) <= lam2_bound + 1e-12
    # height sandwich: exact lower bound, upper bound up to a constant
    sg = 1 if k % 2 else -1
    lower_v = (ell * exp_z.q(k - 1) + exp_z.q(k) * sg) * b
    lo = math.sqrt(lower_v.norm()) - math.sqrt((N.u2 * exp_z.q(k - 1)).norm())
    checks["height_lower"] = g2.height() >= lo - 1e-9 * max(1.0, abs(lo))
    up = _logsum(_lognorm(ell) + lqm, lq) + N.log_height()
    diag = {"delta_prime_b": 1, "height_upper_ratio": g2.log_height() - up,
            "mu_height_pred": (lqm + omega ** (c.r1 - 1) * lq)}
    lower_log = math.log(lo) if lo > 0 else -math.inf
    return _finish(RATIONAL, g2, 1 if j_applied else 0, 1 if ey else 0, z, y, k, None, ell, r,
                   checks, (lower_log, up), lb + lz2 - lq, diag)


def gamma_irrational(exp_z: CFExpansion, exp_y: CFExpansion, jk: tuple[int, int], z, y,
                     omega: float = DEFAULT_OMEGA, j_applied: tuple[bool, bool] = (False, False),
                     consts: CFConstants | None = None) -> GammaResult:
    """gamma = N_j U^ell M_k for a target with slope outside K."""
    if exp_y.terminated:
        raise ValueError("target slope lies in K; use the rational construction")
    j, k = jk
    R = exp_z.ring
    c = consts or constants(R)
    zn = normalize_slope(*z)[0] if j_applied[0] else z
    yn = normalize_slope(*y)[0] if j_applied[1] else y
    N = target_matrix_irrational(exp_y, j)
    M, r, ell, g2, res, checks = _construct(exp_z, N, k, zn, yn)
    ls, lq, lqm = _lognorm(exp_y.q(j)), _lognorm(exp_z.q(k)), _lognorm(exp_z.q(k - 1))
    ls1 = _lognorm(exp_y.q(j + 1)) if j + 1 < exp_y.depth else ls
    e = omega ** (c.r1 - 1)
    pred = _logsum((e - 1) * lq - ls - ls1, ls - lq)
    C3 = 2 * math.sqrt(float(R.cover_radius_sq))
    ly2, lz2 = _log(yn[1].abs_mid()), _log(zn[1].abs_mid())
    lo = abs(math.exp(ly2 - lz2 - math.log(float(c.C1)) + lq + lqm) - math.exp(ls + lq)) \
        - (C3 + 3) * math.exp(ls + lqm)
    up = _logsum(lqm + e * lq, ls + lq)
    checks["lambda2_bound"] = _log(res.lam2.abs_mid()) <= math.log(float(c.C1) * C3) + lz2 + ls - lq + 1e-12
    checks["height_lower"] = lo <= 0 or g2.log_height() >= math.log(lo) - 1e-9
    diag = {"height_vs_qq": g2.log_height() - lq - lqm, "height_upper_ratio": g2.log_height() - up}
    return _finish(IRRATIONAL, g2, 1 if j_applied[0] else 0, 1 if j_applied[1] else 0, z, y, k, j,
                   ell, r, checks, (math.log(lo) if lo > 0 else -math.inf, up), pred, diag)


# --------------------------------------------------------------------------- index selection


def _admissible(nq: list[int], ns: list[int], j: int, k: int) -> bool:
    s3 = ns[j] ** 3
    return nq[k - 1] < s3 <= nq[k] < ns[j + 1] ** 3


def select_indices_bruteforce(exp_z: CFExpansion, exp_y: CFExpansion) -> list[tuple[int, int]]:
    nq = [exp_z.q(k).norm() for k in range(exp_z.depth)]
    ns = [exp_y.q(j).norm() for j in range(exp_y.depth)]
    return [(j, k) for j in range(len(ns) - 1) for k in range(1, len(nq)) if _admissible(nq, ns, j, k)]


def select_indices(exp_z: CFExpansion, exp_y: CFExpansion) -> list[tuple[int, int]]:
    """Pairs (j, k) with |q_{k-1}|^(1/3) < |s_j| <= |q_k|^(1/3) < |s_{j+1}|, compared on exact norms."""
    nq = [exp_z.q(k).norm() for k in range(exp_z.depth)]
    ns = [exp_y.q(j).norm() for j in range(exp_y.depth)]
    increasing = lambda v: all(x < y for x, y in zip(v, v[1:]))
    if not (increasing(nq) and increasing(ns)):
        return select_indices_bruteforce(exp_z, exp_y)
    out = []
    for j in range(len(ns) - 1):
        k = bisect.bisect_left(nq, ns[j] ** 3)  # first k with |q_k|^2 >= |s_j|^6
        if 1 <= k < len(nq) and _admissible(nq, ns, j, k):
            out.append((j, k))
    return out
