import itertools
from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from qcis.cm import (CMOperator, ReducibleIntegral, ResiduePatternError, CMBetheState, build_cm,
                     cm_bethe_residual, cm_bethe_values, cm_commutator, cm_eigen_check, cm_wronskian,
                     compose, numeric_residual, plane_wave_check, random_lattice, rank_n2,
                     residual_on_lattices, residue_pattern, solve_cm_bethe, solve_higher_integral,
                     state_from_lame, w)
from qcis.elliptic import EllipticInvariants, square_lattice
from qcis.lame import bethe_values, sigma, solve_bethe

LAT = square_lattice()


@pytest.fixture(scope="module")
def l3():
    return solve_higher_integral(3, 1, 3)


def test_build_small_cases():
    assert str(build_cm(1, 1)[1]) == "d1^2"
    L1, L2 = build_cm(2, 1)
    assert str(L1) == "d1 + d2"
    assert str(L2) == "d1^2 + d2^2 - 4*wp_12"


@pytest.mark.parametrize("n", [2, 3])
def test_symmetry_and_exact_commutation(n):
    L1, L2 = build_cm(n, Fraction(3, 2))
    for perm in itertools.permutations(range(1, n + 1)):
        assert L2.permute(perm) == L2
    assert cm_commutator(L1, L2).is_zero()
    assert cm_commutator(L2, L2).is_zero()


def test_generator_sign_convention():
    g, s = w(2, 1, 1)
    assert g == ("w", 1, 2, 1) and s == -1
    assert w(2, 1, 0) == (("w", 1, 2, 0), 1)


def test_second_derivative_is_reduced():
    d1 = CMOperator.partial(2, 1)
    wp = CMOperator.wp(2, 1, 2)
    op = compose(d1, compose(d1, wp))
    assert all(g[3] <= 1 for (_, mono) in op.terms for g, _ in mono if g[0] == "w")


def test_numeric_residual_sees_the_ideal():
    rng = np.random.default_rng(3)
    lat = random_lattice(rng)
    # (wp')^2 - 4 wp^3 + g2 wp + g3 on the pair (1, 2)
    g2, g3 = CMOperator.coefficient(2, {((("g2",), 1),): 1}), CMOperator.coefficient(2, {((("g3",), 1),): 1})
    wp, dwp = CMOperator.wp(2, 1, 2), CMOperator.wp(2, 1, 2, 1)
    rel = compose(dwp, dwp) - compose(wp, compose(wp, wp)).scale(4) + compose(g2, wp) + g3
    assert numeric_residual(CMOperator(2), lat) == 0
    assert numeric_residual(rel, lat, relative=True) < 1e-9
    assert numeric_residual(wp, lat) > 1e-2


def test_l2_recovered():
    assert solve_higher_integral(2, 1, 2) == build_cm(2, 1)[1]


def test_n2_order3_is_reducible():
    with pytest.raises(ReducibleIntegral) as exc:
        solve_higher_integral(2, 1, 3)
    assert exc.value.combination == "3/2*L1*L2 - 1/2*L1^3"


def test_l3(l3):
    L1, L2 = build_cm(3, 1)
    assert l3.order == 3 and l3.is_symmetric()
    assert cm_commutator(L1, l3).is_zero()
    assert residual_on_lattices(cm_commutator(L2, l3), samples=200, lattices=3) < 1e-8
    # a wrong coefficient is caught
    bad = l3 + CMOperator.wp(3, 1, 2).scale(Fraction(1, 100)).symmetrize()
    assert residual_on_lattices(cm_commutator(L2, bad), samples=30) > 1e-3


def test_l3_m2_commutes():
    L1, L2 = build_cm(3, 2)
    L3 = solve_higher_integral(3, 2, 3)
    assert residual_on_lattices(cm_commutator(L2, L3), samples=60, relative=True) < 1e-10


def test_residue_pattern_enforced():
    pat = residue_pattern(3, 1)
    assert len(pat) == 3
    with pytest.raises(ResiduePatternError):
        CMBetheState(3, 1, (0.1, 0.2), tuple(pat[:2]), (0, 0, 0), LAT)
    with pytest.raises(ResiduePatternError):
        CMBetheState(2, 1, (0.1,), tuple(pat[:1] * 0) + ((1.0, -1.0, 0.0),), (0, 0), LAT)


def test_n2_reduces_to_lame():
    for m, seed in ((1, 0), (2, 0), (2, 1)):
        ans = solve_bethe(m, LAT, seed=seed).ansatz
        st = state_from_lame(ans)
        # the CM vector leads with the origin condition, which is c0-fixing in lame
        assert np.max(np.abs(cm_bethe_values(st)[1:] - bethe_values(ans))) < 1e-9
        assert cm_bethe_residual(st) < 1e-9


@pytest.mark.parametrize("n,m", [(2, 1), (2, 2), (3, 1)])
def test_cm_bethe_newton(n, m):
    st = solve_cm_bethe(n, m, LAT, seed=0)
    assert cm_bethe_residual(st) < 1e-10


def test_plane_wave():
    v = [0.3 + 0.1j, -0.7j, 1.1]
    chk = plane_wave_check(3, v, LAT)
    assert abs(chk.pi_values[0] - sum(v)) < 1e-12
    assert abs(chk.pi_values[1] - sum(x * x for x in v)) < 1e-12
    assert chk.residual < 1e-12


def test_cm_eigen_check_two_t_values():
    ans = solve_bethe(1, LAT, seed=0).ansatz
    for t in (0.4 - 0.2j, -1.1 + 0.5j):
        st = state_from_lame(ans, t)
        chk = cm_eigen_check(st)
        assert chk.residual < 1e-6
        assert abs(chk.pi_values[0] - 2 * t) < 1e-8
        partner = state_from_lame(sigma(ans), t)
        chk2 = cm_eigen_check(partner)
        assert abs(chk2.pi_values[1] - chk.pi_values[1]) < 1e-8
        assert abs(cm_wronskian(st)) > 1e-3


def test_cm_eigen_check_perturbed():
    st = solve_cm_bethe(2, 2, LAT, seed=0)
    moved = replace(st, poles=(st.poles[0] + 0.1,) + tuple(st.poles[1:]))
    assert cm_eigen_check(st).residual < 1e-6
    assert cm_eigen_check(moved).residual > 1e-3


def test_rank_n2():
    assert rank_n2(1, EllipticInvariants(4, 1)) == 2
