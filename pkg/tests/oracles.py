"""Independent reference computations used only by the tests."""
from __future__ import annotations

from fractions import Fraction

import mpmath as mp
import sympy as sp

mp.mp.dps = 30


def _theta_setup(w1, w2):
    w1, w2 = mp.mpc(w1), mp.mpc(w2)
    q = mp.exp(1j * mp.pi * w2 / w1)
    return w1, q


def theta_wp(z, w1, w2) -> complex:
    """wp through Jacobi theta functions (full periods ``w1, w2``)."""
    w1, q = _theta_setup(w1, w2)
    v = mp.pi * mp.mpc(z) / w1
    t2, t3 = mp.jtheta(2, 0, q), mp.jtheta(3, 0, q)
    val = (mp.pi / w1) ** 2 * (t2 ** 2 * t3 ** 2 * mp.jtheta(4, v, q) ** 2 / mp.jtheta(1, v, q) ** 2
                               - (t2 ** 4 + t3 ** 4) / 3)
    return complex(val)


def theta_zeta(z, w1, w2) -> complex:
    w1, q = _theta_setup(w1, w2)
    v = mp.pi * mp.mpc(z) / w1
    eta1 = -(mp.pi ** 2 / (3 * w1)) * mp.jtheta(1, 0, q, 3) / mp.jtheta(1, 0, q, 1)
    return complex(eta1 * mp.mpc(z) / w1 + (mp.pi / w1) * mp.jtheta(1, v, q, 1) / mp.jtheta(1, v, q))


def theta_invariants(w1, w2):
    """(g2, g3) from theta constants."""
    w1, q = _theta_setup(w1, w2)
    t2, t3, t4 = (mp.jtheta(k, 0, q) for k in (2, 3, 4))
    c = (mp.pi / w1) ** 4
    g2 = c * (t2 ** 8 + t3 ** 8 + t4 ** 8) * 2 / 3
    e = [c ** 0.5 * (t3 ** 4 + t4 ** 4) / 3, c ** 0.5 * (t2 ** 4 - t4 ** 4) / 3, -c ** 0.5 * (t2 ** 4 + t3 ** 4) / 3]
    g3 = 4 * e[0] * e[1] * e[2]
    return complex(g2), complex(g3)


def naive_laurent_product(a: dict, b: dict) -> dict:
    out = {}
    for i, x in a.items():
        for j, y in b.items():
            out[i + j] = out.get(i + j, 0) + x * y
    return {k: v for k, v in out.items() if v != 0}


def wp_laurent_sympy(g2, g3, order: int):
    """wp as a sympy Laurent polynomial from wp'^2 = 4 wp^3 - g2 wp - g3,
    solved by undetermined coefficients one power at a time."""
    u = sp.Symbol("u")
    cs = sp.symbols(f"c1:{order + 1}")
    wp = u ** -2 + sum(c * u ** (2 * k) for k, c in enumerate(cs, start=1))
    expr = sp.expand(sp.diff(wp, u) ** 2 - 4 * wp ** 3 + sp.Rational(g2) * wp + sp.Rational(g3))
    sol = {}
    for k, c in enumerate(cs, start=1):
        eq = sp.expand(expr.coeff(u, 2 * k - 4).subs(sol))
        sol[c] = sp.solve(eq, c)[0]
    return u, sp.expand(wp.subs(sol)), sol


def _lp_mul(a: dict, b: dict, cut: int) -> dict:
    out = {}
    for i, x in a.items():
        for j, y in b.items():
            if i + j < cut:
                out[i + j] = out.get(i + j, 0) + x * y
    return {k: v for k, v in out.items() if v != 0}


def _lp_diff(a: dict) -> dict:
    return {k - 1: k * v for k, v in a.items() if k != 0}


def _op_compose(A: list, B: list, cut: int) -> list:
    """Operators as lists of Laurent dicts; plain Leibniz rule."""
    from math import comb
    out = [dict() for _ in range(len(A) + len(B) - 1)]
    for i, a in enumerate(A):
        for j, b in enumerate(B):
            bk = b
            for k in range(i + 1):
                if k:
                    bk = _lp_diff(bk)
                for e, v in _lp_mul(a, bk, cut).items():
                    slot = out[i - k + j]
                    slot[e] = slot.get(e, 0) + comb(i, k) * v
    return out


def brute_force_commutant_system(m, g2, g3, s: int, wbound: int, trunc: int = 14):
    """The order-``s`` commuting system assembled on truncated Laurent
    polynomials in ``u`` (no elliptic-ring arithmetic involved); ranks by sympy.

    Returns ``(nullity, consistent, unknowns)`` for the homogeneous nullspace
    and the inhomogeneous system with a monic ``D^s``.
    """
    c = {2: Fraction(g2) / 20, 3: Fraction(g3) / 28}
    for k in range(4, trunc):
        c[k] = Fraction(3, (2 * k + 1) * (k - 3)) * sum(c[j] * c[k - j] for j in range(2, k - 1))
    cut_in = 2 * trunc - 2
    wp = {-2: Fraction(1)}
    wp.update({2 * k - 2: c[k] for k in range(2, trunc)})
    dwp = _lp_diff(wp)
    mm = Fraction(m)
    L = [_lp_mul({0: -mm * (mm + 1)}, wp, cut_in), {}, {0: Fraction(1)}]
    unknowns = []
    for j in range(s):
        for b in (0, 1):
            a = 0
            while 2 * a + 3 * b <= wbound - j:
                unknowns.append((j, a, b))
                a += 1
    cut = cut_in - 2 * (wbound + 4)   # exponents below this are exact

    def power(a, b):
        out = {0: Fraction(1)}
        for _ in range(a):
            out = _lp_mul(out, wp, cut_in)
        for _ in range(b):
            out = _lp_mul(out, dwp, cut_in)
        return out

    def comm(M):
        left = _op_compose(L, M, cut_in)
        right = _op_compose(M, L, cut_in)
        out = {}
        for j in range(max(len(left), len(right))):
            lj = left[j] if j < len(left) else {}
            rj = right[j] if j < len(right) else {}
            for e in set(lj) | set(rj):
                if e < cut:
                    v = lj.get(e, 0) - rj.get(e, 0)
                    if v != 0:
                        out[(j, e)] = v
        return out

    cols = [comm([{}] * j + [power(a, b)]) for j, a, b in unknowns]
    base = comm([{}] * s + [{0: Fraction(1)}])
    keys = sorted(set(base).union(*[set(col) for col in cols]))
    A = sp.Matrix([[sp.Rational(col.get(k, 0)) for col in cols] for k in keys])
    bvec = sp.Matrix([sp.Rational(-base.get(k, 0)) for k in keys])
    r = A.rank()
    return len(unknowns) - r, r == A.row_join(bvec).rank(), len(unknowns)
