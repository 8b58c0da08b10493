from fractions import Fraction

import pytest
from hypothesis import assume, given, strategies as st

from oracles import naive_laurent_product
from qcis.series import (LaurentSeries, PoleTooDeep, ZeroSeries, default_terms, exp_series,
                         solve_log_derivative, taylor_to_series)

rationals = st.fractions(min_value=-20, max_value=20, max_denominator=12)


@st.composite
def laurent(draw, min_val=-4, max_val=3, trunc=12):
    v = draw(st.integers(min_val, max_val))
    coeffs = draw(st.lists(rationals, min_size=1, max_size=6))
    return LaurentSeries(v, coeffs, trunc)


def as_dict(s):
    return dict(s.terms())


def test_default_truncation_env(monkeypatch):
    monkeypatch.setenv("QCIS_TRUNC", "17")
    assert default_terms() == 17
    monkeypatch.delenv("QCIS_TRUNC")
    assert default_terms() == 40


def test_normalization_and_zero():
    s = LaurentSeries(-2, [0, 0, 3, 1], 5)
    assert s.valuation == 0 and s.leading() == 3
    z = LaurentSeries.zero(7)
    assert z.is_zero() and z.valuation == 7
    with pytest.raises(ZeroSeries):
        z.leading()
    with pytest.raises(IndexError):
        s[5]


def test_printing():
    s = LaurentSeries.from_dict({-2: 1, 2: Fraction(1, 5)}, 4)
    assert str(s) == "u^-2 + 1/5*u^2 + O(u^4)"


@given(laurent(), laurent())
def test_product_matches_naive_convolution(a, b):
    prod = a * b
    ref = naive_laurent_product(as_dict(a), as_dict(b))
    assert prod.trunc == min(a.trunc + b.valuation, b.trunc + a.valuation)
    for k in range(min(prod.valuation, min(ref, default=prod.trunc)), prod.trunc):
        assert prod[k] == ref.get(k, 0)


@given(laurent(), laurent(), laurent())
def test_ring_axioms(a, b, c):
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert a + b == b + a


@given(laurent())
def test_inverse(a):
    assume(not a.is_zero())
    inv = a.invert()
    one = a * inv
    assert one[0] == 1
    assert all(one[k] == 0 for k in range(one.valuation, one.trunc) if k != 0)
    # relative precision is kept
    assert inv.precision() == a.precision()


@given(laurent(), laurent())
def test_derivation_leibniz(a, b):
    lhs = (a * b).derive()
    rhs = a.derive() * b + a * b.derive()
    assert lhs.agrees_with(rhs)


def test_derive_drops_constant_and_lowers_trunc():
    s = LaurentSeries.from_dict({0: 5, 1: 2, 3: 1}, 6)
    d = s.derive()
    assert d.trunc == 5 and as_dict(d) == {0: 2, 2: 3}


@given(st.lists(rationals, min_size=1, max_size=6))
def test_log_derivative_round_trip(hc):
    h = LaurentSeries(0, hc, 10)
    rho, g = solve_log_derivative(h, 10)
    assert rho == 0 and g[0] == 1
    lhs = g.derive()
    rhs = h * g
    assert lhs.agrees_with(rhs)


def test_log_derivative_with_residue():
    f = LaurentSeries.from_dict({-1: 3, 0: 1}, 8)
    rho, g = solve_log_derivative(f)
    assert rho == 3
    # psi = u^3 exp(u): g = exp(u)
    assert all(g[k] == Fraction(1, __import__("math").factorial(k)) for k in range(g.trunc))
    with pytest.raises(PoleTooDeep):
        solve_log_derivative(LaurentSeries.from_dict({-2: 1}, 5))


def test_exp_series():
    e = exp_series(LaurentSeries.from_dict({1: 1}, 8))
    assert [e[k] for k in range(6)] == [Fraction(1, f) for f in (1, 1, 2, 6, 24, 120)]
    assert taylor_to_series([1, 1, 1, 1]) == LaurentSeries(0, [1, 1, Fraction(1, 2), Fraction(1, 6)], 4)


@given(laurent())
def test_json_round_trip(a):
    assert LaurentSeries.from_json(a.to_json()) == a


def test_power_and_shift():
    u = LaurentSeries.monomial(1, 1, 10)
    assert (u ** 3) == u.shift(2)
    x = LaurentSeries.from_dict({0: 1, 1: 1}, 6)
    assert (x ** 2)[1] == 2
