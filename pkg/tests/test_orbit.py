import math

import pytest
from hypothesis import given, settings, strategies as st

from sl2approx.field import OKInt, ring
from sl2approx.inputs import parse_complex
from sl2approx.matrices import TargetSpec, residual
from sl2approx.orbit import slope_source, sweep_irrational, sweep_origin, sweep_rational

G = ring(1)
ONE = parse_complex("1")


def test_origin_heights_strictly_increase():
    sw = sweep_origin((parse_complex("sqrt(2)+i*sqrt(5)/3"), ONE), G, 30)
    hs = [g.log_height for g in sw.results]
    assert all(a < b for a, b in zip(hs, hs[1:]))
    assert sw.all_checks_pass


def test_slope_normalisation_is_transparent():
    # |z1| > |z2| forces J; the final gamma still acts on the original pair
    z = (parse_complex("3+sqrt(2)*i"), parse_complex("1/2"))
    sw = sweep_origin(z, G, 15)
    assert sw.all_checks_pass
    zv = (z[0].at(sw.prec), z[1].at(sw.prec))
    zero = parse_complex("0").at(sw.prec)
    for g in sw.results:
        assert float(residual(g.gamma, zv, (zero, zero)).sup_mid()) == pytest.approx(g.err, rel=1e-9)


def test_k_rational_slope_ends_on_an_exact_zero():
    sw = sweep_origin((parse_complex("1+i"), ONE), G, 10)
    assert sw.exp_z.terminated and len(sw.results) == sw.exp_z.depth - 1 == 1
    last = sw.results[-1]
    assert last.residual[0].contains_zero() and not last.residual[1].contains_zero()
    assert sw.all_checks_pass


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1, 3]))
def test_rational_residual_within_predicted_bound(seed, d):
    R = ring(d)
    target = TargetSpec.rational(R.one(), OKInt(2, 1, d), ONE)
    sw = sweep_rational((parse_complex("random", R, seed=seed), ONE), target, R, 25)
    assert sw.all_checks_pass
    consts = [g.measured_constant for g in sw.results]
    # the residual is at most a fixed multiple of |b z2| / |q_k|
    cap = max(consts)
    assert all(g.log_err <= g.predicted_bound + math.log(cap) + 1e-9 for g in sw.results)
    assert cap < 50


def test_irrational_sweep_checks():
    z = (parse_complex("sqrt(2)+i*sqrt(7)/3"), ONE)
    y = (parse_complex("sqrt(5)/3+i/7"), ONE)
    sw = sweep_irrational(z, y, G, 50, 30)
    assert sw.results and sw.all_checks_pass
    assert all(g.j >= 1 for g in sw.results)


def test_irrational_sweep_without_pairs_warns():
    z = (parse_complex("sqrt(2)+i*sqrt(7)/3"), ONE)
    y = (parse_complex("sqrt(5)/3+i/7"), ONE)
    with pytest.warns(UserWarning, match="no admissible"):
        sw = sweep_irrational(z, y, G, 3, 30)
    assert sw.results == ()


def test_irrational_sweep_rejects_rational_target():
    with pytest.raises(ValueError):
        sweep_irrational((parse_complex("sqrt(2)"), ONE), (parse_complex("1/2"), ONE), G, 10, 10)


def test_slope_source_flip():
    s = slope_source(parse_complex("2"), parse_complex("4"), flipped=True).at(64)
    assert float(s.re) == -2.0
