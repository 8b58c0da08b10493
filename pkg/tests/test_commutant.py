import random
from fractions import Fraction

import pytest

from oracles import brute_force_commutant_system
from qcis.commutant import (NotFound, algebraic_type_test, basis_residual, centralizer_action,
                            centralizer_commutativity_check, check_base_point, commuting_system,
                            find_base_point, find_commuting, interpolate, is_regular_semisimple,
                            nullspace_dimension, polynomial_of, rank, solution_basis, spectral_polynomial)
from qcis.elliptic import EllipticInvariants
from qcis.lame import build_lame
from qcis.linalg import solve_affine
from qcis.opalg import adjoint, commutator
from qcis.scalars import QI

INV = EllipticInvariants(4, 1)


@pytest.fixture(scope="module")
def pair1():
    L = build_lame(1, INV)
    return L, find_commuting(L, 3)


def test_base_points():
    assert find_base_point(INV) == (0, QI(0, 1))
    assert find_base_point(EllipticInvariants(4, 0)) == (0, 0)
    check_base_point(INV, (Fraction(0), QI(0, 1)))
    with pytest.raises(Exception):
        check_base_point(INV, (Fraction(0), Fraction(1)))


def test_rank_of_lame():
    assert rank(build_lame(2, INV)).rank == 2


def test_solution_basis_solves_equation():
    L = build_lame(1, INV)
    sb = solution_basis(L, Fraction(3, 2), trunc=14)
    assert len(sb.basis) == 2
    assert all(r.is_zero() for r in basis_residual(L, sb))


def test_order_three_operator(pair1):
    L, Q = pair1
    assert str(Q) == "D^3 - 3*wp*D - 3/2*wp'"
    assert commutator(L, Q).is_zero()
    assert adjoint(Q) == -Q


def test_spectral_polynomial_m1(pair1):
    L, Q = pair1
    P = spectral_polynomial(L, Q)
    # Q^2 = L^3 - g2/4 L - g3/4
    assert P.coeffs == (Fraction(-1, 4), Fraction(-1), 0, 1)
    assert Q * Q == polynomial_of(L, P.coeffs)


def test_spectral_polynomial_square_curve():
    inv = EllipticInvariants(4, 0)
    L = build_lame(1, inv)
    P = spectral_polynomial(L, find_commuting(L, 3))
    assert P.coeffs == (0, -1, 0, 1)


def test_even_order_rejected(pair1):
    with pytest.raises(ValueError):
        find_commuting(pair1[0], 2)


@pytest.mark.parametrize("m", ["1/2", "3/2", "1/3"])
def test_non_integer_m_has_no_small_commutant(m):
    L = build_lame(Fraction(m), INV)
    for s in (1, 3, 5):
        with pytest.raises(NotFound):
            find_commuting(L, s)


@pytest.mark.parametrize("m,s", [("1", 3), ("2", 5), ("1/2", 3), ("1/2", 5), ("3/2", 5)])
def test_system_matches_brute_force(m, s):
    L = build_lame(Fraction(m), INV)
    S = commuting_system(L, s)
    x, _ = solve_affine(S.rows, S.rhs, len(S.unknowns))
    nullity, consistent, nunk = brute_force_commutant_system(m, 4, 1, s, s, trunc=s + 14)
    assert nunk == len(S.unknowns)
    assert nullity == nullspace_dimension(S)
    assert consistent == (x is not None)


def test_centralizer_action_and_semisimplicity(pair1):
    L, Q = pair1
    P = spectral_polynomial(L, Q)
    base = find_base_point(INV)
    rng = random.Random(1)
    for _ in range(4):
        lam = Fraction(rng.randint(-9, 9), rng.randint(1, 4))
        M = centralizer_action(L, Q, lam, base)
        sq = [[sum(M[i][k] * M[k][j] for k in range(2)) for j in range(2)] for i in range(2)]
        val = P(lam)
        assert sq == [[val, 0], [0, val]]
        assert is_regular_semisimple(M) == (val != 0)


def test_interpolation():
    pts = [(Fraction(x), Fraction(x ** 3 - 2 * x + 5)) for x in range(4)]
    assert interpolate(pts) == [5, -2, 0, 1]


def test_algebraic_type_verdicts():
    v = algebraic_type_test(build_lame(1, INV), max_order=3)
    assert v.kind == "AlgebraicType" and v.witness.order == 3
    v = algebraic_type_test(build_lame(Fraction(1, 2), INV), max_order=5)
    assert v.kind == "NoWitnessUpTo" and v.tried == [1, 3, 5]


def test_commutativity_report(pair1):
    L, Q = pair1
    rep = centralizer_commutativity_check(L, [Q, Q * L, L * L + L * 3])
    assert rep.passed
