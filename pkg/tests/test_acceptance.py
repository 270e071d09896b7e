"""End-to-end acceptance checks; each test records one PASS/FAIL line for the terminal summary."""
import math
import random
import time
from fractions import Fraction

import pytest
import sympy

from sl2approx.cf import check_hypothesis, constants, error_sandwich_check, expand, reconstruct, same_ratio
from sl2approx.cli import main
from sl2approx.embedding import embed_trial, monotonicity_check
from sl2approx.exponents import (
    constant_spread, dirichlet_profile, dirichlet_rescan, estimate_mu, estimate_mu_hat, fit_slope, predicted_bounds,
    residual_floor_check,
)
from sl2approx.field import OKInt, ring
from sl2approx.inputs import ExprSource, RandomSource, parse_complex, parse_expr_exact, parse_krational
from sl2approx.matrices import TargetSpec, convergent_matrix, select_indices, select_indices_bruteforce
from sl2approx.orbit import slope_source, sweep_irrational, sweep_origin, sweep_rational
from sl2approx.pcomplex import PComplex


def _line(report_line, n, ok, detail):
    report_line(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {detail}")


def _scaled(slope_text, seed, R):
    """(s t, t) for a seeded Gaussian-rational scale t, so z2 is not 1."""
    rng = random.Random(seed)
    t = sympy.Rational(rng.randint(1, 9), rng.randint(1, 9)) + sympy.I * sympy.Rational(rng.randint(-9, 9), 7)
    s = parse_expr_exact(slope_text, R)
    return ExprSource(sympy.expand(s * t)), ExprSource(t)


@pytest.fixture(scope="module")
def corpus():
    """100 seeded random points per ring, expanded to depth 50, with the build time."""
    t0 = time.perf_counter()
    out = {}
    for d in (1, 3):
        R = ring(d)
        out[d] = [expand(RandomSource(f"corpus:{d}:{i}", Fraction(4)), R, 50) for i in range(100)]
    return out, time.perf_counter() - t0


def test_criterion_1_exact_identities(corpus, report_line):
    exps, build = corpus
    t0 = time.perf_counter()
    bad_det = bad_mat = bad_rec = 0
    for d, lst in exps.items():
        for exp in lst:
            for n in range(exp.depth):
                sign = 1 if n % 2 == 0 else -1
                if exp.q(n) * exp.p(n - 1) - exp.p(n) * exp.q(n - 1) != OKInt(sign, 0, d):
                    bad_det += 1
                if convergent_matrix(exp, n).det() != OKInt(1, 0, d):
                    bad_mat += 1
                num, den = reconstruct(exp.a, n)
                if not same_ratio(num, den, exp.p(n), exp.q(n)):
                    bad_rec += 1
    elapsed = build + time.perf_counter() - t0
    ok = bad_det == bad_mat == bad_rec == 0 and elapsed < 120
    _line(report_line, 1, ok, f"det-identity failures {bad_det}, Mat2 det failures {bad_mat}, "
          f"reconstruction failures {bad_rec}, runtime {elapsed:.1f}s (< 120s)")
    assert ok


def test_criterion_2_growth_constants(corpus, report_line):
    exps, _ = corpus
    viol = {1: 0, 3: 0}
    mono = {1: 0, 3: 0}
    ratios = {}
    for d, lst in exps.items():
        for exp in lst:
            rep = check_hypothesis(exp)
            viol[d] += len(rep.growth_violations)
            mono[d] += rep.monotone_violation is not None
            ratios[d] = min(ratios.get(d, math.inf), rep.min_ratio)
    ok = not any(viol.values()) and not any(mono.values())
    _line(report_line, 2, ok, f"d=1 monotone/growth violations {mono[1]}/{viol[1]} (min ratio {ratios[1]:.3f} "
          f">= 1.618), d=3 {mono[3]}/{viol[3]} (min ratio {ratios[3]:.3f} >= 4/3)")
    assert ok


def test_criterion_3_error_bounds(corpus, report_line):
    exps, _ = corpus
    upper_fail = sandwich_pass = total = early = 0
    for d, lst in exps.items():
        c = constants(ring(d))
        for exp in lst:
            rep = error_sandwich_check(exp, 1.1, tail=5, consts=c)
            total += 1
            upper_fail += not rep.upper_ok
            sandwich_pass += rep.passed
            early += bool(rep.early_failures)
    frac = sandwich_pass / total
    ok = upper_fail == 0 and frac >= 0.95
    _line(report_line, 3, ok, f"upper-bound failures on tail n>=5: {upper_fail}/{total}; sandwich at omega=1.1 "
          f"passes {frac:.0%} (>= 95%); expansions with excluded early-index failures: {early}")
    assert ok


ORIGIN_SLOPES = [
    "sqrt(2)", "sqrt(3)", "sqrt(5) - 2", "sqrt(7)/3", "pi/4", "pi - 3", "1/pi", "E/3", "2**(1/3)",
    "(sqrt(2) + i*sqrt(3))/3", "pi*i/5", "i*sqrt(2)", "(1 + i)*pi/7", "sqrt(11)/5 + i/pi",
    "0.314159265358979323846264338328", "2.71828182845904523536028747135*i/3", "pi**2/10 + i*sqrt(3)/4",
    "3**(1/3)*i", "(pi - 3)*(1 + 2*i)", "sqrt(6)/3 + i*sqrt(2)/5",
]


def test_criterion_4_origin_exponent(report_line):
    R = ring(1)
    c = constants(R)
    t0 = time.perf_counter()
    mus, hats, checks_ok = [], [], True
    for i, s in enumerate(ORIGIN_SLOPES):
        sw = sweep_origin(_scaled(s, i, R), R, 41, consts=c)
        recs = sw.records()
        checks_ok &= sw.all_checks_pass
        mus.append(estimate_mu(recs).value)
        hats.append(estimate_mu_hat(recs).value)
    elapsed = time.perf_counter() - t0
    ok = all(0.90 <= m <= 1.10 for m in mus) and min(hats) >= 0.85 and checks_ok and elapsed < 60
    _line(report_line, 4, ok, f"mu in [{min(mus):.3f}, {max(mus):.3f}] (need [0.90, 1.10]); min mu_hat "
          f"{min(hats):.3f} (>= 0.85); identities {checks_ok}; runtime {elapsed:.1f}s (< 60s)")
    assert ok


RATIONAL_TARGETS = ["0", "1/(1+i)", "1/2", "i/3", "(1+i)/3"]
RATIONAL_Z = ["sqrt(2)", "sqrt(3)", "(sqrt(2) + i*sqrt(3))/3", "pi/4", "sqrt(5)*i/3", "random:0",
              "random:1", "random:2", "random:3", "random:4"]


def test_criterion_5_rational_slope(report_line):
    R = ring(1)
    c = constants(R)
    one = parse_complex("1", R)
    mus, spreads, bound_ok = [], [], True
    for tt in RATIONAL_TARGETS:
        a, b = parse_krational(tt, R)
        tgt = TargetSpec.rational(a, b, one)
        for zs in RATIONAL_Z:
            z = (parse_complex(zs, R, seed="c5"), one)
            sw = sweep_rational(z, tgt, R, 60, consts=c)
            bound_ok &= sw.all_checks_pass
            recs = sw.records()
            mus.append(estimate_mu(recs).value)
            spreads.append(constant_spread([g.measured_constant for g in sw.results if g.k >= 10], 5))
    worst = max(sp.windowed for sp in spreads)
    ok = all(0.40 <= m <= 0.60 for m in mus) and worst <= 4 and bound_ok
    _line(report_line, 5, ok, f"{len(mus)} runs: mu in [{min(mus):.3f}, {max(mus):.3f}] (need [0.40, 0.60]); "
          f"construction bounds/identities {bound_ok}; worst max/min of the 5-record sup constant over k>=10 "
          f"{worst:.2f} (<= 4); per-record spread up to {max(sp.pointwise for sp in spreads):.2f}")
    assert ok


def test_criterion_6_irrational_slope(report_line):
    R = ring(1)
    c = constants(R)
    one = parse_complex("1", R)
    mus, agree, total, checks_ok = [], 0, 0, True
    for i in range(10):
        z = (RandomSource(f"c6:z:{i}"), one)
        y = (RandomSource(f"c6:y:{i}"), one)
        sw = sweep_irrational(z, y, R, 80, 40, consts=c)
        checks_ok &= sw.all_checks_pass
        mus.append(estimate_mu(sw.records()).value)
        total += 1
        agree += select_indices(sw.exp_z, sw.exp_y) == select_indices_bruteforce(sw.exp_z, sw.exp_y)
    ok = all(0.30 <= m <= 0.60 for m in mus) and agree == total and checks_ok
    _line(report_line, 6, ok, f"mu in [{min(mus):.3f}, {max(mus):.3f}] (need [0.30, 0.60]); index selection "
          f"agrees with brute force {agree}/{total}; construction checks {checks_ok}")
    assert ok


def test_criterion_7_dirichlet_oracle(report_line):
    R = ring(1)
    Qs = [2 ** e for e in range(4, 11)]
    zs = [ExprSource(sympy.sqrt(2))] + [RandomSource(f"c7:{i}") for i in range(5)]
    slopes, rescan_ok = [], True
    for src in zs:
        z = src.at(256)
        prof = dirichlet_profile(z, Qs, R)
        slopes.append(fit_slope([math.log(r.Q) for r in prof], [math.log(r.err) for r in prof]))
        again = dirichlet_rescan(z, Qs[-1], R, seed=7)
        rescan_ok &= math.isclose(again, prof[-1].err, rel_tol=1e-9)
        rescan_ok &= all(r.err <= r.pigeonhole_bound for r in prof)
    ok = max(slopes) <= -0.9 and rescan_ok
    _line(report_line, 7, ok, f"log-log slopes in [{min(slopes):.3f}, {max(slopes):.3f}] (<= -0.9); "
          f"shuffled re-scan and box-principle bound agree {rescan_ok}")
    assert ok


def test_criterion_8_residual_floor(report_line):
    R = ring(1)
    c = constants(R)
    one = parse_complex("1", R)
    t0 = time.perf_counter()
    parts = []
    ok = True
    for ytext in ("0", "1/(1+i)"):
        a, b = parse_krational(ytext, R)
        tgt = TargetSpec.rational(a, b, one)
        exp = expand(slope_source(parse_complex("sqrt(2)", R), one), R, 30)
        z = (parse_complex("sqrt(2)", R).at(exp.prec), one.at(exp.prec))
        rep = residual_floor_check(z, tgt, 3, exp, c)
        planted = residual_floor_check(z, tgt, 3, exp, c, floor_scale=2 * rep.margin)
        ok &= rep.passed and bool(rep.admissible) and not planted.passed
        parts.append(f"y slope {ytext}: {rep.n_matrices} matrices, margin {rep.margin:.3g}, "
                     f"control fails {not planted.passed}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 300
    _line(report_line, 8, ok, "; ".join(parts) + f"; runtime {elapsed:.1f}s (< 300s)")
    assert ok


def test_criterion_9_embedding(report_line):
    rng = random.Random(9)
    trials = [embed_trial(rng) for _ in range(1000)]
    counts = {k: sum(getattr(t, k) for t in trials) for k in ("homomorphism", "det_one", "height_ok", "compatible")}
    R = ring(1)
    one = parse_complex("1", R)
    zsrc = (parse_complex("sqrt(2) + i/3", R), one)
    sw = sweep_origin(zsrc, R, 41)
    zero = PComplex.from_rational(0, 0, sw.prec)
    z = (zsrc[0].at(sw.prec), one.at(sw.prec))
    mono = monotonicity_check([g.gamma for g in sw.results], z, (zero, zero))
    ok = all(v == 1000 for v in counts.values()) and mono.passed
    _line(report_line, 9, ok, ", ".join(f"{k} {v}/1000" for k, v in counts.items())
          + f"; R^4 exponent {mono.mu_r4:.3f} >= C^2 exponent {mono.mu_c2:.3f} - {mono.tolerance}")
    assert ok


def test_criterion_10_predicted_bounds(report_line):
    ok = True
    for d in (1, 3):
        pb = predicted_bounds(1, 1, constants(ring(d)))
        vals = [pb.origin_mu, pb.irrational_mu_hat_lower, pb.irrational_upper, pb.rational_mu_lower,
                pb.rational_mu_hat_lower, pb.rational_mu_upper]
        ok &= all(isinstance(v, Fraction) for v in vals)
        ok &= vals == [1, Fraction(1, 3), Fraction(1, 2), Fraction(1, 2), Fraction(1, 2), Fraction(1, 2)]
    _line(report_line, 10, ok, "origin 1, irrational [1/3, 1/2], rational 1/2 as exact fractions for d=1 and d=3")
    assert ok


def test_criterion_11_reproducibility(tmp_path, report_line):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("d = 1\nz = random\ntarget = rational\ny = 1/(1+i)\nmax_terms = 40\nseed = 11\n")
    outs = []
    for n in range(2):
        out = tmp_path / f"orbit{n}.csv"
        assert main(["orbit", "--config", str(cfg), "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    ok = outs[0] == outs[1] and outs[0].count(b"\n") > 30
    _line(report_line, 11, ok, f"two orbit runs with one config hash are byte-identical: {outs[0] == outs[1]} "
          f"({len(outs[0])} bytes)")
    assert ok
