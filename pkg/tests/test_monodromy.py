import numpy as np
import pytest

from qcis.elliptic import square_lattice
from qcis.monodromy import (MonodromyResult, PathNearPole, coalescing, commutativity_scan,
                            commutator_defect, default_basepoint, generic_lambdas,
                            irreducibility_probe, monodromy_group, relation_defect, transport)

LAT = square_lattice()
B = default_basepoint(LAT)


def test_contractible_square_is_identity():
    z = 0.2 + 0.2j
    sq = [z, z + 0.3, z + 0.3 + 0.3j, z + 0.3j, z]
    M = transport(1, 1 / 3, LAT, sq)
    assert np.linalg.norm(M - np.eye(2)) < 1e-8


def test_there_and_back():
    path = [B, -0.1 - 0.4j, 0.3 - 0.2j, 0.35 + 0.3j]
    M = transport(2, 0.5 + 0.2j, LAT, path) @ transport(2, 0.5 + 0.2j, LAT, path[::-1])
    assert np.linalg.norm(M - np.eye(2)) < 1e-8


def test_unit_determinant():
    M = transport(0.5, 1.2 - 0.4j, LAT, [B, B + LAT.omega1])
    assert abs(np.linalg.det(M) - 1) < 1e-8


def test_path_near_pole():
    with pytest.raises(PathNearPole):
        transport(1, 1.0, LAT, [-0.1 - 0.001j, 0.1 - 0.001j])


def test_free_case():
    lam = 0.7 + 0.3j
    r = monodromy_group(0, lam, LAT)
    assert r.diagnostics["commutator_defect"] < 1e-8
    k = np.sqrt(lam)
    ev = sorted(np.linalg.eigvals(r.MA), key=lambda z: z.real)
    want = sorted([np.exp(k * LAT.omega1), np.exp(-k * LAT.omega1)], key=lambda z: z.real)
    assert np.allclose(ev, want, atol=1e-8)


@pytest.mark.parametrize("m", [1, 2])
def test_integer_m_commutes(m):
    r = monodromy_group(m, 1 / 3, LAT)
    d = r.diagnostics
    assert d["commutator_defect"] < 1e-6
    assert max(d["det_defects"]) < 1e-8
    assert d["relation_defect"] < 1e-6
    assert d["local_monodromy_defect"] < 1e-6
    assert "note" in d


def test_half_integer_m_does_not_commute():
    r = monodromy_group(0.5, 1 / 3, LAT)
    assert r.diagnostics["commutator_defect"] > 1e-2
    assert irreducibility_probe(r) > 1e-2
    assert r.diagnostics["relation_defect"] < 1e-6


def test_basepoint_independence():
    r1 = monodromy_group(0.5, 0.4 + 0.9j, LAT)
    r2 = monodromy_group(0.5, 0.4 + 0.9j, LAT, basepoint=0.3 + 0.2j)
    for key in ("A", "B", "AB"):
        assert np.allclose(r1.diagnostics["traces"][key], r2.diagnostics["traces"][key], atol=1e-6)


def test_matrix_diagnostics():
    I = np.eye(2, dtype=complex)
    res = MonodromyResult(I, I, I, 0j, 0.0, 0j)
    assert irreducibility_probe(res) == 0.0
    assert commutator_defect(I, I) == 0.0
    assert relation_defect(I, I, I) == 0.0
    J = np.array([[1, 1], [0, 1]], dtype=complex)
    assert coalescing(J, I)


def test_branch_point_flagged():
    lam = LAT.wp(LAT.omega1 / 2)  # a root of P_1 on this lattice (up to sign convention)
    rows = commutativity_scan(1, [lam, -lam, 1 / 3 + 0.5j], LAT)
    assert any(r["flagged"] for r in rows[:2])
    assert not rows[2]["flagged"]


def test_generic_lambdas_deterministic():
    assert generic_lambdas(5, seed=2) == generic_lambdas(5, seed=2)
    assert all(z.imag >= 0.3 for z in generic_lambdas(10))
