import itertools
import warnings
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from sl2approx.cf import constants, expand
from sl2approx.errors import EnumerationBudgetExceeded, InsufficientData
from sl2approx.exponents import (
    OrbitRecord, constant_spread, dirichlet_profile, dirichlet_rescan, dirichlet_search,
    enumerate_sl2_ball, estimate_mu, estimate_mu_hat, exponent_report, fit_slope,
    inhomogeneous_pair, omega_K_estimate, pigeonhole_bound, predicted_bounds, residual_floor_check,
)
from sl2approx.field import OKInt, ring
from sl2approx.inputs import parse_complex
from sl2approx.matrices import Mat2, TargetSpec
from sl2approx.pcomplex import PComplex

G = ring(1)


def _stream(slope, n=40, base=1.7):
    return [OrbitRecord.synthetic(base ** i, base ** (-slope * i)) for i in range(1, n + 1)]


@pytest.mark.parametrize("s", [Fraction(1, 3), Fraction(1, 2), Fraction(1)])
def test_estimators_recover_synthetic_slope(s):
    recs = _stream(float(s))
    assert estimate_mu(recs).value == pytest.approx(float(s), abs=1e-9)
    assert estimate_mu_hat(recs).value == pytest.approx(float(s), abs=0.05)
    rep = exponent_report(recs)
    assert rep.consistent
    assert rep.mu.fit_slope == pytest.approx(-float(s), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(1.2, 5.0))
def test_mu_hat_never_exceeds_mu_on_power_streams(s, base):
    recs = _stream(s, n=30, base=base)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert estimate_mu_hat(recs).value <= estimate_mu(recs).value + 1e-9


def test_uniform_exponent_sees_lacunary_gaps():
    # errors drop only at every other height: the uniform exponent halves
    recs = []
    for i in range(1, 41):
        h = 2.0 ** i
        e = 2.0 ** (-(i if i % 2 else i - 1))
        recs.append(OrbitRecord.synthetic(h, e))
    assert estimate_mu(recs).value == pytest.approx(1.0)
    assert estimate_mu_hat(recs, ratio=2.0).value < 1.0


def test_insufficient_and_clumped_data():
    with pytest.raises(InsufficientData):
        estimate_mu(_stream(1.0, n=5))
    clumped = _stream(1.0, n=10, base=1.01) + [OrbitRecord.synthetic(1e12, 1e-12)]
    with pytest.warns(UserWarning, match="clumped"):
        estimate_mu_hat(clumped)


def test_constant_spread_windowed_max():
    v = [1, 10, 1, 10, 1, 10, 1, 10]
    cs = constant_spread(v, window=2)
    assert cs.pointwise == 10 and cs.windowed == 1
    with pytest.raises(InsufficientData):
        constant_spread([1, 2], window=5)


def test_dirichlet_on_ring_element_is_exact():
    r = dirichlet_search(PComplex.from_rational(3, -2, 128), 8, G)
    assert r.q == OKInt(1, 0) and r.err == 0 and r.p == OKInt(3, -2)


def test_dirichlet_sqrt2_matches_pell_convergent():
    r = dirichlet_search(parse_complex("sqrt(2)").at(256), 577, G)
    assert r.q == OKInt(408, 0) and r.p == OKInt(577, 0)
    assert r.err <= r.pigeonhole_bound


@pytest.mark.parametrize("d", [1, 3, 7, 11])
def test_dirichlet_profile_and_rescan_agree(d):
    R = ring(d)
    z = parse_complex("random", R, seed=f"dir{d}").at(256)
    Qs = [4, 8, 16, 32]
    prof = dirichlet_profile(z, Qs, R)
    errs = [p.err for p in prof]
    assert errs == sorted(errs, reverse=True)
    for p in prof:
        assert p.q.norm() <= p.Q ** 2
        assert p.err <= p.pigeonhole_bound
        assert dirichlet_rescan(z, p.Q, R, seed=3) == pytest.approx(p.err, rel=1e-9, abs=1e-12)
    assert dirichlet_search(z, 16, R) == prof[2]


def test_dirichlet_budget_guard():
    with pytest.raises(EnumerationBudgetExceeded):
        dirichlet_search(PComplex.from_rational(0, 0), 1e6, G)


def test_pigeonhole_bound_decreases():
    assert pigeonhole_bound(G, 64) < pigeonhole_bound(G, 16) < pigeonhole_bound(G, 4)


def test_fit_slope_exact_line():
    assert fit_slope([1, 2, 3], [5, 3, 1]) == pytest.approx(-2.0)


def test_omega_K_for_quadratic_irrational_is_near_one():
    e = expand(parse_complex("sqrt(2)"), G, 40)
    assert 1.0 <= omega_K_estimate(e) < 1.1
    with pytest.raises(InsufficientData):
        omega_K_estimate(expand(parse_complex("sqrt(2)"), G, 5))


@pytest.mark.parametrize("d", [1, 3])
def test_predicted_bounds_at_one_are_exact(d):
    pb = predicted_bounds(1, 1, constants(ring(d)))
    assert pb.origin_mu == 1
    assert pb.origin_mu_hat == (1, 1)
    assert pb.irrational_mu_lower == Fraction(1, 3)
    assert pb.irrational_mu_hat_lower == Fraction(1, 3)
    assert pb.irrational_upper == Fraction(1, 2)
    assert pb.rational_mu_lower == Fraction(1, 2)
    assert pb.rational_mu_hat_lower == Fraction(1, 2)
    assert pb.rational_mu_upper == Fraction(1, 2)
    assert pb.tau == Fraction(1, 3)


def test_predicted_bounds_degrade_with_omega():
    c = constants(G)
    a, b = predicted_bounds(1, 1, c), predicted_bounds(Fraction(6, 5), 1, c)
    assert b.rational_mu_lower < a.rational_mu_lower
    assert b.irrational_mu_lower < a.irrational_mu_lower
    assert b.rational_mu_upper > a.rational_mu_upper
    with pytest.raises(ValueError):
        predicted_bounds(Fraction(1, 2), 1, c)


def test_inhomogeneous_pair_homogeneous_case_matches_dirichlet():
    pair = inhomogeneous_pair(parse_complex("sqrt(2)"), PComplex.from_rational(0), 1000, G)
    ref = dirichlet_search(parse_complex("sqrt(2)").at(256), pair.height, G)
    assert pair.err == pytest.approx(ref.err, rel=1e-9)


def test_inhomogeneous_pair_error_decays():
    xi, y = parse_complex("sqrt(2)"), parse_complex("1/3+i/5")
    errs = [inhomogeneous_pair(xi, y, T, G).err for T in (1e3, 1e6, 1e9)]
    assert errs[2] < errs[1] < errs[0] < 1
    with pytest.raises(InsufficientData):
        inhomogeneous_pair(xi, y, 1.0, G)


def _naive_ball(R, H):
    rng = range(-int(H) - 2, int(H) + 3)
    pts = [OKInt(a, b, R.d) for a in rng for b in rng if OKInt(a, b, R.d).norm() <= H * H]
    for v1, u1, v2, u2 in itertools.product(pts, repeat=4):
        if v1 * u2 - u1 * v2 == R.one():
            yield Mat2(v1, u1, v2, u2)


@pytest.mark.parametrize("d", [1, 3])
def test_sl2_enumeration_matches_naive(d):
    R = ring(d)
    fast = list(enumerate_sl2_ball(R, 2.0))
    assert len(fast) == len(set(fast))
    assert set(fast) == set(_naive_ball(R, 2.0))


def test_sl2_enumeration_budget():
    with pytest.raises(EnumerationBudgetExceeded):
        list(enumerate_sl2_ball(G, 3.0, budget=100))


def test_floor_check_small_ball():
    src = parse_complex("sqrt(2)+i*sqrt(3)/7")
    e = expand(src, G, 25)
    z = (e.z, PComplex.from_rational(1, 0, e.prec))
    target = TargetSpec.rational(G.zero(), G.one(), parse_complex("1"))
    rep = residual_floor_check(z, target, 1.0, e)
    assert rep.n_matrices == len(list(enumerate_sl2_ball(G, 1.0)))
    assert rep.admissible and rep.passed
    assert not residual_floor_check(z, target, 1.0, e, floor_scale=2 * rep.margin).passed
