"""Empirical Diophantine exponents, brute-force oracles and predicted bounds."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import gmpy2
import numpy as np

from .cf import CFConstants, CFExpansion, constants
from .errors import EnumerationBudgetExceeded, InsufficientData
from .field import OKInt, RingSpec, extended_gcd, nearest_integer
from .matrices import (
    DEFAULT_OMEGA, GammaResult, Mat2, TargetSpec, normalize_slope,
    residual,
)
from .pcomplex import PComplex, PrecisionPolicy

# --------------------------------------------------------------------------- records


@dataclass(frozen=True)
class OrbitRecord:
    """One approximation event, stored in log space so huge heights stay exact enough."""

    log_height: float
    log_err: float
    k: int | None = None
    j: int | None = None
    ell: str = ""
    tag: str = ""
    predicted_bound: float = math.nan  # log of the constant-free residual bound
    measured_constant: float = math.nan

    def __post_init__(self):
        if self.log_height < 0:
            raise ValueError("height must be >= 1")

    @property
    def height(self) -> float:
        return math.exp(self.log_height)

    @property
    def err(self) -> float:
        return math.exp(self.log_err)

    @classmethod
    def from_gamma(cls, g: GammaResult) -> "OrbitRecord":
        return cls(g.log_height, g.log_err, g.k, g.j, str(g.ell), g.cls, g.predicted_bound,
                   g.measured_constant)

    @classmethod
    def synthetic(cls, height: float, err: float, tag: str = "synthetic") -> "OrbitRecord":
        return cls(math.log(height), math.log(err) if err > 0 else -math.inf, tag=tag)


# --------------------------------------------------------------------------- estimators


@dataclass(frozen=True)
class MuEstimate:
    value: float
    window_decades: float
    window_count: int
    fit_slope: float  # least-squares slope of log err vs log height (about -mu)
    fit_residual: float  # RMS residual of that fit


def _usable(records) -> list[OrbitRecord]:
    return [r for r in records if r.log_height > 0 and math.isfinite(r.log_err)]


def _lsq(xs, ys) -> tuple[float, float, float]:
    A = np.vstack([xs, np.ones_like(xs)]).T
    (slope, icept), *_ = np.linalg.lstsq(A, ys, rcond=None)
    rms = float(np.sqrt(np.mean((A @ np.array([slope, icept]) - ys) ** 2)))
    return float(slope), float(icept), rms


def estimate_mu(records, window_decades: float = 1.0, min_records: int = 10) -> MuEstimate:
    """max of -log err / log height over the top ``window_decades`` of heights."""
    recs = _usable(records)
    if len({r.log_height for r in recs}) < min_records:
        raise InsufficientData(f"need {min_records} records with distinct heights, got {len(recs)}")
    top = max(r.log_height for r in recs)
    cut = top - window_decades * math.log(10)
    win = [r for r in recs if r.log_height >= cut]
    value = max(-r.log_err / r.log_height for r in win)
    slope, _, rms = _lsq(np.array([r.log_height for r in recs]), np.array([r.log_err for r in recs]))
    return MuEstimate(value, window_decades, len(win), slope, rms)


@dataclass(frozen=True)
class MuHatEstimate:
    value: float
    T_grid: tuple[float, ...]  # log T
    per_T_best: tuple[tuple[float, float], ...]  # (log T, log min err over height <= T)
    tail_start: float  # log T where the tail window begins
    excluded: tuple[float, ...] = ()
    warnings: tuple[str, ...] = ()

    def per_T_exponent(self) -> list[tuple[float, float]]:
        return [(lt, -le / lt) for lt, le in self.per_T_best if lt > 0]


def estimate_mu_hat(records, T_grid=None, ratio: float = 2.0, tail_fraction: float = 0.5,
                    min_records: int = 10) -> MuHatEstimate:
    """Uniform exponent: min over the tail of the T grid of -log best(T) / log T.

    ``best(T)`` is the smallest error among records of height at most T. The
    default grid is geometric with the given ratio between the smallest and
    largest heights; the tail is the upper ``tail_fraction`` of its log span.
    """
    recs = sorted(_usable(records), key=lambda r: r.log_height)
    if len(recs) < min_records:
        raise InsufficientData(f"need {min_records} records, got {len(recs)}")
    lo, hi = recs[0].log_height, recs[-1].log_height
    if hi <= lo:
        raise InsufficientData("records do not span a range of heights")
    if T_grid is None:
        step = math.log(ratio)
        n = int(math.floor((hi - lo) / step + 1e-12))
        grid = [lo + i * step for i in range(n + 1)]
        if grid[-1] < hi:
            grid.append(hi)
    else:
        grid = sorted(math.log(T) for T in T_grid)
    notes = []
    excluded = [g for g in grid if g < lo or g <= 0]
    if excluded:
        notes.append(f"{len(excluded)} grid points below the smallest height were excluded")
    grid = [g for g in grid if g >= lo and g > 0]
    if not grid:
        raise InsufficientData("no usable grid points")
    # prefix minima of log err over increasing height
    hs = np.array([r.log_height for r in recs])
    pm = np.minimum.accumulate(np.array([r.log_err for r in recs]))
    best = [(g, float(pm[np.searchsorted(hs, g, side="right") - 1])) for g in grid]
    tail_start = grid[0] + (1 - tail_fraction) * (grid[-1] - grid[0])
    tail = [(g, b) for g, b in best if g >= tail_start - 1e-12]
    value = min(-b / g for g, b in tail)
    gaps = np.diff(np.unique(hs))
    if gaps.size and gaps.max() > 0.25 * (hi - lo):
        notes.append("heights are clumped: the largest gap exceeds a quarter of the log span")
    for msg in notes:
        warnings.warn(msg, stacklevel=2)
    return MuHatEstimate(value, tuple(grid), tuple(best), tail_start, tuple(excluded), tuple(notes))


@dataclass(frozen=True)
class ExponentReport:
    mu_emp: float
    mu_hat_emp: float
    mu: MuEstimate
    mu_hat: MuHatEstimate

    @property
    def consistent(self) -> bool:
        """mu_hat <= mu up to the fit tolerance (the spread of the fit)."""
        return self.mu_hat_emp <= self.mu_emp + max(0.05, self.mu.fit_residual / max(1.0, self.mu.window_count))


def exponent_report(records, window_decades: float = 1.0, ratio: float = 2.0,
                    tail_fraction: float = 0.5) -> ExponentReport:
    mu = estimate_mu(records, window_decades)
    mh = estimate_mu_hat(records, ratio=ratio, tail_fraction=tail_fraction)
    return ExponentReport(mu.value, mh.value, mu, mh)


@dataclass(frozen=True)
class ConstantSpread:
    pointwise: float  # max/min of the per-record constants
    windowed: float  # max/min of the sliding-window maxima
    window: int


def constant_spread(values, window: int = 5) -> ConstantSpread:
    """Stability of an implied constant along a stream.

    The constant of an upper bound is a supremum, so the stable quantity is
    the running window maximum; single records can sit far below it when the
    residual happens to be small.
    """
    v = [float(x) for x in values]
    if len(v) < window or min(v) <= 0:
        raise InsufficientData(f"need {window} positive values")
    w = [max(v[i:i + window]) for i in range(len(v) - window + 1)]
    return ConstantSpread(max(v) / min(v), max(w) / min(w), window)


# --------------------------------------------------------------------------- Dirichlet oracle


@dataclass(frozen=True)
class DirichletResult:
    Q: float
    q: OKInt
    p: OKInt
    err: float
    n_scanned: int
    pigeonhole_bound: float  # certified upper bound for err from the box principle

    @property
    def constant(self) -> float:
        """err * |q|, the implied constant in err << 1/|q|."""
        return self.err * math.sqrt(self.q.norm())


def _disc(R: RingSpec, Q: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coordinates (a, b) of all q in O_K with |q| <= Q, and their norms."""
    c = float(R.omega_im_coef) * math.sqrt(R.d)
    B = int(Q / c) + 1
    A = int(Q + B * abs(float(R.omega_re))) + 1
    a, b = np.meshgrid(np.arange(-A, A + 1, dtype=np.int64), np.arange(-B, B + 1, dtype=np.int64))
    a, b = a.ravel(), b.ravel()
    nrm = a * a + R.trace * a * b + R.nrm * b * b
    keep = nrm <= math.floor(Q * Q)
    return a[keep], b[keep], nrm[keep]


def _lattice_dist_rows(R: RingSpec, wr: np.ndarray, wi: np.ndarray) -> np.ndarray:
    """Distance from w to O_K, testing the two nearest rows of the lattice."""
    c = float(R.omega_im_coef) * math.sqrt(R.d)
    beta = wi / c
    out = np.full(wr.shape, np.inf)
    for off in (0, 1):
        b = np.floor(beta) + off
        a = np.rint(wr - b * float(R.omega_re))
        dr = wr - a - b * float(R.omega_re)
        di = wi - b * c
        out = np.minimum(out, np.hypot(dr, di))
    return out


def _lattice_dist_coords(R: RingSpec, wr: np.ndarray, wi: np.ndarray) -> np.ndarray:
    """Same distance via the norm form on a 3x3 neighbourhood in (1, w) coordinates."""
    c = float(R.omega_im_coef) * math.sqrt(R.d)
    beta = wi / c
    alpha = wr - beta * float(R.omega_re)
    a0, b0 = np.rint(alpha), np.rint(beta)
    best = np.full(wr.shape, np.inf)
    for da in (-1, 0, 1):
        for db in (-1, 0, 1):
            x, y = alpha - (a0 + da), beta - (b0 + db)
            best = np.minimum(best, x * x + R.trace * x * y + R.nrm * y * y)
    return np.sqrt(np.maximum(best, 0.0))


def _diam_fundamental(R: RingSpec) -> float:
    w = complex(R.w())
    return max(abs(1 + w), abs(1 - w))


def pigeonhole_bound(R: RingSpec, Q: float) -> float:
    """diam(F)/m with m = ceil(sqrt(n)) - 1 and n = #{q : |q| <= Q/2}."""
    n = _disc(R, Q / 2)[0].size
    m = math.isqrt(n - 1)  # = ceil(sqrt(n)) - 1
    return _diam_fundamental(R) / m if m > 0 else math.inf


SCAN_BUDGET = 5 * 10**7


def _scan(z: PComplex, R: RingSpec, Qmax: float):
    if 4 * Qmax * Qmax > SCAN_BUDGET:
        raise EnumerationBudgetExceeded(f"a scan to Q = {Qmax} exceeds {SCAN_BUDGET} ring elements")
    a, b, nrm = _disc(R, Qmax)
    nz = nrm > 0
    a, b, nrm = a[nz], b[nz], nrm[nz]
    c = float(R.omega_im_coef) * math.sqrt(R.d)
    qr, qi = a + b * float(R.omega_re), b * c
    zr, zi = float(z.re), float(z.im)
    err = _lattice_dist_rows(R, qr * zr - qi * zi, qr * zi + qi * zr)
    return a, b, nrm, err


def _refine(z: PComplex, R: RingSpec, a, b, order, top: int = 32):
    """Exact re-evaluation of the best float candidates; deterministic tie-break.

    ``order`` lists candidate indices sorted by (float error, norm).
    """
    prec = max(z.prec_bits, 128)
    scored = []
    for i in order[:top]:
        q = OKInt(int(a[i]), int(b[i]), R.d)
        w = q.to_complex(prec) * z
        p = nearest_integer(w, R)
        e = (w - p.to_complex(prec)).abs_mid()
        scored.append((e, q.norm(), -q.a, q.b, q, p))
    scored.sort(key=lambda t: t[:4])
    e0 = gmpy2.mpq(scored[0][0])
    tied = [s for s in scored if gmpy2.mpq(s[0]) <= e0 * (1 + gmpy2.mpq(1, 1 << 96))]
    e, _, _, _, q, p = min(tied, key=lambda t: t[1:4])
    return q, p, float(e)


def dirichlet_search(z: PComplex, Q: float, R: RingSpec) -> DirichletResult:
    """Exhaustive minimum of |qz - p| over 0 < |q| <= Q (Theta(Q^2) ring elements).

    Ties (e.g. unit multiples) go to the smallest |q|, then the largest real
    coordinate a, then the smallest b.
    """
    return dirichlet_profile(z, [Q], R)[0]


def dirichlet_profile(z: PComplex, Qs, R: RingSpec) -> list[DirichletResult]:
    """dirichlet_search for several Q from one scan at max(Qs)."""
    Qs = list(Qs)
    if min(Qs) < 2:
        raise ValueError("Q must be >= 2")
    a, b, nrm, err = _scan(z, R, max(Qs))
    order = np.lexsort((nrm, err))
    snrm = nrm[order]
    out = []
    for Q in Qs:
        cap = math.floor(Q * Q)
        q, p, e = _refine(z, R, a, b, order[np.flatnonzero(snrm <= cap)[:32]])
        out.append(DirichletResult(Q, q, p, e, int(np.count_nonzero(nrm <= cap)), pigeonhole_bound(R, Q)))
    return out


def dirichlet_rescan(z: PComplex, Q: float, R: RingSpec, seed: int = 0, chunk: int = 65536) -> float:
    """Independent float re-scan in shuffled order and chunks; returns the best error."""
    a, b, nrm = _disc(R, Q)
    nz = nrm > 0
    a, b = a[nz], b[nz]
    perm = np.random.default_rng(seed).permutation(a.size)
    c = float(R.omega_im_coef) * math.sqrt(R.d)
    zr, zi = float(z.re), float(z.im)
    best = math.inf
    for s in range(0, a.size, chunk):
        idx = perm[s:s + chunk]
        qr, qi = a[idx] + b[idx] * float(R.omega_re), b[idx] * c
        d = _lattice_dist_coords(R, qr * zr - qi * zi, qr * zi + qi * zr)
        best = min(best, float(d.min()))
    return best


def fit_slope(xs, ys) -> float:
    return _lsq(np.asarray(xs, float), np.asarray(ys, float))[0]


# --------------------------------------------------------------------------- omega_K


def omega_K_profile(exp: CFExpansion, start: int = 1) -> list[tuple[int, float]]:
    """(n, log|q_{n+1}| / log|q_n|) for n >= max(start, 1)."""
    out = []
    for n in range(max(start, 1), exp.depth - 1):
        ln = 0.5 * math.log(exp.q(n).norm())
        if ln > 0:
            out.append((n, 0.5 * math.log(exp.q(n + 1).norm()) / ln))
    return out


def omega_K_estimate(exp: CFExpansion, tail: int | None = None) -> float:
    """Growth proxy for omega_K: max of log|q_{n+1}|/log|q_n| over n >= tail (default: second half)."""
    if exp.depth < 10:
        raise InsufficientData("expansion depth must be at least 10")
    prof = omega_K_profile(exp, exp.depth // 2 if tail is None else tail)
    if not prof:
        raise InsufficientData("empty tail window")
    return max(v for _, v in prof)


# --------------------------------------------------------------------------- predicted bounds


@dataclass(frozen=True)
class PredictedBounds:
    origin_mu: object
    origin_mu_hat: tuple  # (1/omega_xi, 1)
    irrational_mu_lower: object
    irrational_mu_hat_lower: object
    irrational_upper: object
    rational_mu_lower: object
    rational_mu_hat_lower: object
    rational_mu_upper: object
    tau: object
    flags: dict = field(default_factory=dict)

    @property
    def origin(self):
        return self.origin_mu

    @property
    def irrational(self) -> tuple:
        return (self.irrational_mu_hat_lower, self.irrational_upper)

    @property
    def rational(self):
        return self.rational_mu_lower


def _num(x):
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    return float(x)


def predicted_bounds(omega_xi, omega_y, consts: CFConstants) -> PredictedBounds:
    """Closed-form exponent bounds at the given irrationality measures.

    Exact (Fraction) when both measures are ints or Fractions, float otherwise.
    """
    w, wy = _num(omega_xi), _num(omega_y)
    if w < 1 or wy < 1:
        raise ValueError("irrationality measures are >= 1")
    r1 = consts.r1
    one = Fraction(1) if isinstance(w, Fraction) and isinstance(wy, Fraction) else 1.0
    wr1m, wr1 = w ** (r1 - 1), w ** r1
    flags = {
        "omega_ge_3": w >= 3,
        "exponent_nonpositive": one / (3 * w) + one * 4 / 3 - wr1m <= 0,
        "tau_ge_1": w >= 2.0 ** (1.0 / (r1 - 1)) if r1 > 1 else False,
    }
    return PredictedBounds(
        origin_mu=one,
        origin_mu_hat=(one / w, one),
        irrational_mu_lower=(1 + 4 * w - 3 * wr1) / (3 * w * (wr1m + 1)),
        irrational_mu_hat_lower=((2 - wr1m) * wy + 1) / ((2 * wy + 1) * (w + wr1)),
        irrational_upper=one / 2,
        rational_mu_lower=one / (wr1m + 1),
        rational_mu_hat_lower=one / (wr1 + 1),
        rational_mu_upper=w / (w + 1),
        tau=wy / (2 * wy + 1) * wr1m,
        flags=flags,
    )


# --------------------------------------------------------------------------- inhomogeneous pairs


@dataclass(frozen=True)
class InhomogeneousPair:
    q: OKInt
    p: OKInt
    err: float
    height: float  # |gamma| of the matrix the row came from
    k: int
    row: int


def inhomogeneous_pair(xi, y, T: float, R: RingSpec, max_terms: int = 80,
                       omega: float = DEFAULT_OMEGA, policy: PrecisionPolicy | None = None) -> InhomogeneousPair:
    """A pair (q, p) with |q xi + p - y| small and max(|p|, |q|) <= T.

    Uses z = (xi, 1) and the target (y, y) of slope 1, then takes the better
    row of the largest constructed gamma with |gamma| <= T. For y = 0 the
    convergent matrices are used instead.
    """
    from .inputs import FixedSource
    from .orbit import sweep_origin, sweep_rational

    xs = xi if hasattr(xi, "at") else FixedSource(xi)
    ys = y if hasattr(y, "at") else FixedSource(y)
    one = FixedSource(PComplex.from_rational(1))
    y0 = ys.at(64)
    homogeneous = y0.re == 0 and y0.im == 0 and y0.err_radius == 0
    if homogeneous:
        sw = sweep_origin((xs, one), R, max_terms, policy)
    else:
        sw = sweep_rational((xs, one), TargetSpec.rational(R.one(), R.one(), ys), R, max_terms, omega, policy)
    best = None
    for g in sw.results:
        if g.gamma.height() > T:
            break
        best = g
    if best is None:
        raise InsufficientData(f"no constructed matrix has height <= {T}")
    rows = []
    for i, (lam, (qv, pv)) in enumerate(zip(best.residual, ((best.gamma.v1, best.gamma.u1),
                                                             (best.gamma.v2, best.gamma.u2)))):
        rows.append((float(lam.abs_mid()), i, qv, pv))
    e, i, qv, pv = min(rows, key=lambda t: (t[0], t[1]))
    return InhomogeneousPair(qv, pv, e, best.gamma.height(), best.k, i)


# --------------------------------------------------------------------------- residual floor


@dataclass(frozen=True)
class FloorReport:
    H: float
    n_matrices: int
    min_err: float
    argmin: Mat2 | None
    admissible: tuple[int, ...]  # k where the floor applies
    informational: tuple[int, ...]  # k failing the height or size threshold
    floors: dict  # k -> floor value
    margin: float  # min_err / floor at the tightest admissible k
    floor_scale: float = 1.0

    @property
    def passed(self) -> bool:
        return not self.admissible or self.margin >= 1.0


def _ball(R: RingSpec, H: float) -> list[OKInt]:
    a, b, _ = _disc(R, H)
    return [OKInt(int(x), int(y), R.d) for x, y in zip(a, b)]


def enumerate_sl2_ball(R: RingSpec, H: float, budget: int = 10**7):
    """Every gamma in SL2(O_K) with |gamma| <= H.

    Bottom rows (v2, u2) with unit gcd are enumerated first; top rows are a
    particular Bezout solution plus multiples m (v2, u2) for m in a disc.
    """
    pts = _ball(R, H)
    if len(pts) ** 2 > budget:
        raise EnumerationBudgetExceeded(f"{len(pts) ** 2} bottom rows exceed the budget {budget}")
    H2 = H * H
    count = 0
    for v2 in pts:
        for u2 in pts:
            if not v2 and not u2:
                continue
            g, X, Y = extended_gcd(v2, u2)
            if not g.is_unit():
                continue
            gi = g.conj()
            v1p, u1p = Y * gi, -(X * gi)
            w, cpart = (v2, v1p) if v2.norm() >= u2.norm() else (u2, u1p)
            # need |cpart + m w| <= H, i.e. m within H/|w| of -cpart/w
            centre = -complex(cpart) / complex(w)
            rad = H / math.sqrt(w.norm()) + 1e-9
            for m in _disc_around(R, centre, rad):
                v1, u1 = v1p + m * v2, u1p + m * u2
                if v1.norm() <= H2 and u1.norm() <= H2:
                    count += 1
                    if count > budget:
                        raise EnumerationBudgetExceeded(f"more than {budget} matrices")
                    yield Mat2(v1, u1, v2, u2)


def _disc_around(R: RingSpec, centre: complex, rad: float) -> list[OKInt]:
    c = float(R.omega_im_coef) * math.sqrt(R.d)
    out = []
    for b in range(math.floor((centre.imag - rad) / c), math.ceil((centre.imag + rad) / c) + 1):
        x0 = centre.real - b * float(R.omega_re)
        for a in range(math.floor(x0 - rad) - 1, math.ceil(x0 + rad) + 2):
            m = OKInt(a, b, R.d)
            if abs(complex(m) - centre) <= rad:
                out.append(m)
    return out


def residual_floor_check(z, target: TargetSpec, H: float, exp_z: CFExpansion,
                         consts: CFConstants | None = None, floor_scale: float = 1.0,
                         budget: int = 10**7) -> FloorReport:
    """Check that no gamma with |gamma| <= H beats |z2/(3b)|/|q_k| at admissible k.

    k is admissible when H <= |y2/z2| |q_k q_{k+1}| / (3 C1) and, as the
    argument behind the floor needs, |q_k| > 36 C1 |b z2| / |y2|.
    """
    R = exp_z.ring
    c = consts or constants(R)
    C1 = float(c.C1)
    prec = exp_z.prec
    y = target.values(prec, R)
    zn, _ = normalize_slope(*z)
    b = target.b if target.a.norm() <= target.b.norm() else target.a
    absb = math.sqrt(b.norm())
    z2, y2 = float(zn[1].abs_mid()), float(y[1].abs_mid())
    n, best, arg = 0, math.inf, None
    for g in enumerate_sl2_ball(R, H, budget):
        n += 1
        e = float(residual(g, z, y).sup_mid())
        if e < best:
            best, arg = e, g
    adm, info, floors = [], [], {}
    for k in range(exp_z.depth - 1):
        lq, lq1 = math.sqrt(exp_z.q(k).norm()), math.sqrt(exp_z.q(k + 1).norm())
        if lq == 0:
            continue
        fl = floor_scale * z2 / (3 * absb) / lq
        floors[k] = fl
        ok = H <= y2 / z2 * lq * lq1 / (3 * C1) and lq > 36 * C1 * absb * z2 / y2
        (adm if ok else info).append(k)
    margin = best / floors[adm[0]] if adm else math.inf
    return FloorReport(H, n, best, arg, tuple(adm), tuple(info), floors, margin, floor_scale)
