"""SL2(Z[i]) inside SL4(Z) via a + ib -> ((a, -b), (b, a)), and the matching C^2 = R^4 action."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass

import gmpy2
import sympy

from .errors import UnsupportedRing
from .exponents import OrbitRecord, estimate_mu
from .field import OKInt, ring
from .matrices import Mat2, residual
from .pcomplex import PComplex


def _require_gaussian(*xs: OKInt) -> None:
    for x in xs:
        if x.d != 1:
            raise UnsupportedRing("the R^4 embedding is only defined for d = 1")


@dataclass(frozen=True)
class Mat4Z:
    rows: tuple[tuple[int, ...], ...]

    def __matmul__(self, o: "Mat4Z") -> "Mat4Z":
        cols = list(zip(*o.rows))
        return Mat4Z(tuple(tuple(sum(a * b for a, b in zip(r, c)) for c in cols) for r in self.rows))

    def det(self) -> int:
        return int(sympy.Matrix(self.rows).det(method="bareiss"))

    def height(self) -> int:
        return max(abs(x) for r in self.rows for x in r)

    @classmethod
    def identity(cls) -> "Mat4Z":
        return cls(tuple(tuple(int(i == j) for j in range(4)) for i in range(4)))


def embed_scalar(x: OKInt) -> tuple[tuple[int, int], tuple[int, int]]:
    _require_gaussian(x)
    return ((x.a, -x.b), (x.b, x.a))


def embed_matrix(g: Mat2) -> Mat4Z:
    _require_gaussian(*g.entries())
    B = [[embed_scalar(x) for x in row] for row in ((g.v1, g.u1), (g.v2, g.u2))]
    return Mat4Z(tuple(tuple(B[I][J][i][j] for J in range(2) for j in range(2))
                       for I in range(2) for i in range(2)))


def height_comparable(g: Mat2) -> bool:
    """|g|/sqrt2 <= |embed(g)| <= sqrt2 |g|, compared exactly on squares."""
    h1sq = g.height_norm()
    h2sq = embed_matrix(g).height() ** 2
    return 2 * h2sq >= h1sq and h2sq <= 2 * h1sq


# --------------------------------------------------------------------------- actions


@dataclass(frozen=True)
class RealBall:
    mid: gmpy2.mpq
    rad: gmpy2.mpq


def vec_c2_to_r4(z: tuple[PComplex, PComplex]) -> tuple[RealBall, ...]:
    """(Re z1, Im z1, Re z2, Im z2); each coordinate inherits its entry's radius."""
    out = []
    for w in z:
        r = gmpy2.mpq(w.err_radius)
        out += [RealBall(gmpy2.mpq(w.re), r), RealBall(gmpy2.mpq(w.im), r)]
    return tuple(out)


def act_r4(m: Mat4Z, v: tuple[RealBall, ...]) -> tuple[RealBall, ...]:
    """Integer matrix times a ball vector, in exact rational arithmetic."""
    return tuple(RealBall(sum(a * x.mid for a, x in zip(r, v)),
                          sum(abs(a) * x.rad for a, x in zip(r, v))) for r in m.rows)


@dataclass(frozen=True)
class Compatibility:
    ok: bool
    max_gap: float  # largest |difference of midpoints| / allowed radius


def compatibility_check(g: Mat2, z: tuple[PComplex, PComplex]) -> Compatibility:
    """embed(g) vec(z) agrees with vec(g z) up to the combined error radii."""
    lhs = act_r4(embed_matrix(g), vec_c2_to_r4(z))
    rhs = vec_c2_to_r4(g.act(*z))
    ok, worst = True, 0.0
    for a, b in zip(lhs, rhs):
        gap, allow = abs(a.mid - b.mid), a.rad + b.rad
        ok &= gap <= allow
        if gap:
            worst = max(worst, math.inf if allow == 0 else float(gap / allow))
    return Compatibility(ok, worst)


# --------------------------------------------------------------------------- random words


def generators() -> list[Mat2]:
    R = ring(1)
    one, i = R.one(), R.w()
    gens = [Mat2.U(one), Mat2.U(i), Mat2.J(R)]
    return gens + [g.inverse() for g in gens]


def random_word(rng: random.Random, length: int) -> list[Mat2]:
    gens = generators()
    return [rng.choice(gens) for _ in range(length)]


def product(word: list[Mat2]) -> Mat2:
    out = Mat2.identity(ring(1))
    for g in word:
        out = out @ g
    return out


@dataclass(frozen=True)
class EmbedTrial:
    homomorphism: bool
    det_one: bool
    height_ok: bool
    compatible: bool

    @property
    def passed(self) -> bool:
        return self.homomorphism and self.det_one and self.height_ok and self.compatible


def embed_trial(rng: random.Random, max_len: int = 12, prec: int = 128) -> EmbedTrial:
    """One random product g = w1 ... wn: checks rho(g) = rho(w1)...rho(wn) and the rest."""
    word = random_word(rng, rng.randint(1, max_len))
    g = product(word)
    img = Mat4Z.identity()
    for w in word:
        img = img @ embed_matrix(w)
    z = tuple(PComplex.from_rational(rng.uniform(-2, 2), rng.uniform(-2, 2), prec) for _ in range(2))
    return EmbedTrial(img == embed_matrix(g), embed_matrix(g).det() == 1, height_comparable(g),
                      compatibility_check(g, z).ok)


# --------------------------------------------------------------------------- exponent comparison


def r4_record(g: Mat2, z, y) -> OrbitRecord:
    """Height and error of g measured in R^4 sup norms."""
    res = residual(g, z, y)
    comps = [abs(v) for lam in (res.lam1, res.lam2) for v in (lam.re, lam.im)]
    err = max(comps)
    return OrbitRecord(math.log(embed_matrix(g).height()), float(gmpy2.log(err)) if err else -math.inf)


@dataclass(frozen=True)
class MonotonicityReport:
    mu_c2: float
    mu_r4: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.mu_r4 >= self.mu_c2 - self.tolerance


def monotonicity_check(gammas, z, y, tolerance: float = 0.05) -> MonotonicityReport:
    """The R^4 exponent of a stream is at least its C^2 exponent (up to the fit tolerance)."""
    c2 = [OrbitRecord(g.log_height(), float(gmpy2.log(residual(g, z, y).sup_mid()))) for g in gammas]
    r4 = [r4_record(g, z, y) for g in gammas]
    return MonotonicityReport(estimate_mu(c2).value, estimate_mu(r4).value, tolerance)
