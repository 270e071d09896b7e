from fractions import Fraction

import gmpy2
import pytest
from hypothesis import given, settings, strategies as st

from sl2approx.errors import DivisionNearZero, PrecisionInsufficient
from sl2approx.pcomplex import PComplex, PrecisionPolicy, with_retry

rationals = st.fractions(min_value=-10**6, max_value=10**6, max_denominator=10**6)
precs = st.sampled_from([32, 53, 64, 128, 256])


def _contains(ball: PComplex, re: Fraction, im: Fraction) -> bool:
    dr = gmpy2.mpq(ball.re) - gmpy2.mpq(re.numerator, re.denominator)
    di = gmpy2.mpq(ball.im) - gmpy2.mpq(im.numerator, im.denominator)
    return dr * dr + di * di <= gmpy2.mpq(ball.err_radius) ** 2


def _ball(re, im, prec):
    return PComplex.from_rational(re, im, prec)


@settings(max_examples=200, deadline=None)
@given(rationals, rationals, rationals, rationals, precs)
def test_arithmetic_encloses_exact_result(a, b, c, d, prec):
    x, y = _ball(a, b, prec), _ball(c, d, prec)
    assert _contains(x + y, a + c, b + d)
    assert _contains(x - y, a - c, b - d)
    assert _contains(x * y, a * c - b * d, a * d + b * c)
    if c or d:
        n = c * c + d * d
        try:
            q = x / y
        except DivisionNearZero:
            return
        assert _contains(q, (a * c + b * d) / n, (b * c - a * d) / n)


@given(rationals, rationals)
def test_conj_and_neg_keep_radius(a, b):
    x = _ball(a, b, 64)
    assert (-x).err_radius == x.err_radius
    assert _contains(x.conj(), a, -b)


def test_exact_inputs_have_zero_radius():
    assert PComplex.from_rational(3, -5, 53).err_radius == 0
    assert PComplex.from_rational(Fraction(1, 3), 0, 53).err_radius > 0


def test_division_by_ball_around_zero():
    tiny = PComplex.from_rational(0, 0, 64, radius=gmpy2.mpfr(2) ** -10)
    with pytest.raises(DivisionNearZero):
        PComplex.from_rational(1, 0, 64) / tiny


def test_abs_bounds_bracket_midpoint():
    x = PComplex.from_rational(Fraction(1, 3), Fraction(2, 7), 64)
    assert x.abs_lower() <= x.abs_mid() <= x.abs_upper()


def test_retry_doubles_until_success():
    seen = []

    def fn(prec):
        seen.append(prec)
        if prec < 256:
            raise PrecisionInsufficient("more")
        return prec

    assert with_retry(fn, PrecisionPolicy(64, 1024)) == 256
    assert seen == [64, 128, 256]


def test_retry_gives_up_past_cap():
    def fn(prec):
        raise PrecisionInsufficient("never")

    with pytest.raises(PrecisionInsufficient):
        with_retry(fn, PrecisionPolicy(64, 128))


def test_policy_validation():
    with pytest.raises(ValueError):
        PrecisionPolicy(16, 64)
    with pytest.raises(ValueError):
        PrecisionPolicy(128, 64)
