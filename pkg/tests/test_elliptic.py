import cmath
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from oracles import theta_invariants, theta_wp, theta_zeta, wp_laurent_sympy
from qcis.elliptic import (DegenerateCurve, EllipticElement, EllipticInvariants, Lattice, NearPole,
                           embed, square_lattice, square_lattice_with_g2, taylor_at, wp_coefficients,
                           wp_prime_series, wp_series)

INV = EllipticInvariants(4, 1)


def test_degenerate_curve_rejected():
    with pytest.raises(DegenerateCurve):
        EllipticInvariants(3, 1)   # 27 - 27 = 0


def test_first_laurent_coefficients():
    # wp = u^-2 + g2/20 u^2 + g3/28 u^4 + g2^2/1200 u^6 + ...
    s = wp_series(INV, 10)
    assert s[-2] == 1 and s[0] == 0
    assert s[2] == Fraction(4, 20) and s[4] == Fraction(1, 28)
    assert s[6] == Fraction(16, 1200)


def test_coefficients_match_sympy_recursion():
    u, wp, _ = wp_laurent_sympy(4, 1, 6)
    s = wp_series(INV, 12)
    for k in range(2, 11, 2):
        assert s[k] == Fraction(str(wp.coeff(u, k)))


@pytest.mark.parametrize("g2,g3", [(4, 1), (Fraction(3, 2), Fraction(-2, 7)), (0, 5), (7, 0)])
def test_weierstrass_relation_exact(g2, g3):
    inv = EllipticInvariants(g2, g3)
    p = wp_series(inv, 46)
    dp = wp_prime_series(inv, 46)
    rel = dp * dp - p * p * p * 4 + p * inv.g2 + inv.g3
    assert rel.is_zero() and rel.trunc >= 40
    assert (dp.derive() - p * p * 6 + inv.g2 / 2).is_zero()


def test_ring_reduction_and_derivation():
    p, dp = EllipticElement.p(INV), EllipticElement.dp(INV)
    assert dp * dp == p ** 3 * 4 - p * 4 - 1
    assert dp.derive() == p * p * 6 - 2
    assert str(dp * Fraction(-3, 2)) == "-3/2*wp'"


@given(st.integers(0, 4), st.integers(0, 1), st.integers(0, 3), st.integers(0, 1))
def test_embedding_is_a_ring_map(a1, b1, a2, b2):
    x = EllipticElement(INV, {(a1, b1): Fraction(1)})
    y = EllipticElement(INV, {(a2, b2): Fraction(2)})
    T = 14
    assert embed(x * y, INV, T).agrees_with(embed(x, INV, T) * embed(y, INV, T))
    assert embed(x.derive(), INV, T).agrees_with(embed(x, INV, T + 2).derive())


def test_taylor_at_ordinary_point():
    # base (0, i) on 4x^3 - 4x - 1 = -1
    from qcis.scalars import QI
    base = (Fraction(0), QI(0, 1))
    t = taylor_at(EllipticElement.p(INV), base, 4)
    assert t[0] == 0 and t[1] == QI(0, 1)        # wp(x0) = 0, wp'(x0) = i
    assert t[2] * 2 == -2                         # wp'' = 6 wp^2 - g2/2 = -2


LATTICES = [(1, 1j), (1, 0.3 + 1.1j), (2 - 0.5j, 0.4 + 1.7j), (1, cmath.exp(1j * math.pi / 3))]


@pytest.mark.parametrize("w1,w2", LATTICES)
def test_lattice_wp_against_theta(w1, w2):
    lat = Lattice(w1, w2)
    rng = random.Random(5)
    for _ in range(6):
        z = rng.uniform(-1, 1) * w1 + rng.uniform(-1, 1) * w2
        ref = theta_wp(z, w1, w2)
        assert abs(lat.wp(z) - ref) <= 1e-10 * max(1, abs(ref))
        rz = theta_zeta(z, w1, w2)
        assert abs(lat.zeta(z) - rz) <= 1e-9 * max(1, abs(rz))


@pytest.mark.parametrize("w1,w2", LATTICES)
def test_lattice_invariants_against_theta(w1, w2):
    lat = Lattice(w1, w2)
    g2, g3 = theta_invariants(w1, w2)
    scale = max(abs(g2), abs(g3) ** (2 / 3), 1)
    assert abs(lat.g2 - g2) < 1e-10 * scale
    assert abs(lat.g3 - g3) < 1e-10 * scale ** 1.5


def test_special_lattices():
    assert abs(square_lattice().g3) < 1e-10
    hexa = Lattice(1, cmath.exp(1j * math.pi / 3))
    assert abs(hexa.g2) < 1e-10
    lat = square_lattice_with_g2(4.0)
    assert abs(lat.g2 - 4) < 1e-10


@pytest.mark.parametrize("w1,w2", LATTICES)
def test_periodicity_parity_and_legendre(w1, w2):
    lat = Lattice(w1, w2)
    z = 0.31 * w1 + 0.17 * w2
    for w in (w1, w2):
        assert abs(lat.wp(z + w) - lat.wp(z)) < 1e-9 * abs(lat.wp(z))
    assert abs(lat.wp(-z) - lat.wp(z)) < 1e-12 * abs(lat.wp(z))
    assert abs(lat.zeta(-z) + lat.zeta(z)) < 1e-10
    e1, e2 = lat.quasi_periods()
    assert abs(lat.zeta(z + w1) - lat.zeta(z) - e1) < 1e-9
    assert abs(e1 * w2 - e2 * w1 - 2j * math.pi) < 1e-9
    p, dp = lat.wp_pair(z)
    assert abs(dp ** 2 - (4 * p ** 3 - lat.g2 * p - lat.g3)) < 1e-9 * abs(p) ** 3


def test_near_pole():
    with pytest.raises(NearPole):
        square_lattice().wp(1 + 1j)


def test_float_coefficients():
    c = wp_coefficients(4.0, 1.0, 5)
    assert abs(c[0] - 0.2) < 1e-15 and abs(c[1] - 1 / 28) < 1e-15
