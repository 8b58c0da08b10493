"""Elliptic Calogero-Moser operators in ``n`` variables.

Operators live in a free differential ring on the generators
``w[i,j,k] = wp^(k)(x_i - x_j)`` (``i < j``, ``k`` in ``{0, 1}``) together with
symbolic constants ``g2`` and ``g3``.  Coefficients sit to the left of the
partial derivatives.  Only the rule ``w'' = 6 w^2 - g2/2`` is applied; the
Weierstrass relation and the addition theorem are left alone, so membership in
the ideal of elliptic identities is tested numerically.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .elliptic import EllipticInvariants, Lattice
from .lame import (HermiteAnsatz, build_lame, cauchy_taylor, hermite_f, local_solution,
                   seed_poles)
from .linalg import solve_affine
from .scalars import as_fraction

G2 = ("g2",)
G3 = ("g3",)
_WEIGHT = {"g2": 4, "g3": 6}


class AnsatzTooSmall(RuntimeError):
    pass


class ReducibleIntegral(RuntimeError):
    """Raised for ``j > n``: the solution is a polynomial in lower integrals."""

    def __init__(self, n, j, operator, combination):
        self.n, self.j = n, j
        self.operator = operator
        self.combination = combination
        super().__init__(f"order {j} > n = {n}: integral reduces to {combination}")


class ResiduePatternError(ValueError):
    pass


def w(i: int, j: int, k: int = 0):
    """Generator for ``wp^(k)(x_i - x_j)`` with 1-based indices, plus a sign."""
    if i == j:
        raise ValueError("w needs distinct indices")
    if i < j:
        return ("w", i, j, k), 1
    return ("w", j, i, k), (-1) ** k


def gen_weight(g) -> int:
    return 2 + g[3] if g[0] == "w" else _WEIGHT[g[0]]


def mono_weight(mono) -> int:
    return sum(gen_weight(g) * e for g, e in mono)


def mono_mul(a, b):
    d = dict(a)
    for g, e in b:
        d[g] = d.get(g, 0) + e
    return tuple(sorted(d.items()))


def poly_mul(a: dict, b: dict) -> dict:
    out = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            m = mono_mul(ma, mb)
            out[m] = out.get(m, 0) + ca * cb
    return {m: c for m, c in out.items() if c != 0}


def poly_add(a: dict, b: dict, scale=1) -> dict:
    out = dict(a)
    for m, c in b.items():
        out[m] = out.get(m, 0) + scale * c
    return {m: c for m, c in out.items() if c != 0}


def _gen_derivative(g, l: int) -> dict:
    """``d/dx_l`` of a generator as a polynomial."""
    if g[0] != "w":
        return {}
    _, i, j, k = g
    if l == i:
        s = 1
    elif l == j:
        s = -1
    else:
        return {}
    if k == 0:
        return {((("w", i, j, 1), 1),): Fraction(s)}
    # w'' = 6 w^2 - g2/2
    return {((("w", i, j, 0), 2),): Fraction(6 * s), ((G2, 1),): Fraction(-s, 2)}


@lru_cache(maxsize=None)
def _mono_derivative(mono, l: int):
    out = {}
    for idx, (g, e) in enumerate(mono):
        dg = _gen_derivative(g, l)
        if not dg:
            continue
        rest = list(mono)
        if e == 1:
            rest.pop(idx)
        else:
            rest[idx] = (g, e - 1)
        rest = tuple(rest)
        for m, c in dg.items():
            mm = mono_mul(rest, m)
            out[mm] = out.get(mm, 0) + e * c
    return tuple((m, c) for m, c in out.items() if c != 0)


@lru_cache(maxsize=None)
def _mono_partial(mono, gamma):
    """``d^gamma`` of a monomial as a tuple of (mono, coeff) pairs."""
    cur = {mono: Fraction(1)}
    for l, times in enumerate(gamma, start=1):
        for _ in range(times):
            nxt = {}
            for m, c in cur.items():
                for mm, cc in _mono_derivative(m, l):
                    nxt[mm] = nxt.get(mm, 0) + c * cc
            cur = {m: c for m, c in nxt.items() if c != 0}
    return tuple(cur.items())


class CMOperator:
    """``sum coeff * mono * d^dexp`` with exact rational coefficients."""

    __slots__ = ("n", "m", "terms")

    def __init__(self, n: int, terms=None, m=None):
        self.n = n
        self.m = m
        clean = {}
        for (dexp, mono), c in (terms or {}).items():
            if len(dexp) != n:
                raise ValueError("multi-exponent length does not match n")
            if c != 0:
                clean[(tuple(dexp), tuple(mono))] = Fraction(c) if not isinstance(c, Fraction) else c
        self.terms = clean

    # -- constructors -------------------------------------------------------
    @classmethod
    def partial(cls, n: int, i: int, power: int = 1) -> "CMOperator":
        d = [0] * n
        d[i - 1] = power
        return cls(n, {(tuple(d), ()): 1})

    @classmethod
    def const(cls, n: int, c) -> "CMOperator":
        return cls(n, {((0,) * n, ()): as_fraction(c)})

    @classmethod
    def coefficient(cls, n: int, poly: dict) -> "CMOperator":
        return cls(n, {((0,) * n, m): c for m, c in poly.items()})

    @classmethod
    def wp(cls, n: int, i: int, j: int, k: int = 0) -> "CMOperator":
        g, s = w(i, j, k)
        return cls(n, {((0,) * n, ((g, 1),)): s})

    # -- structure ----------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def order(self) -> int:
        return max((sum(d) for d, _ in self.terms), default=-1)

    def principal(self) -> "CMOperator":
        k = self.order
        return CMOperator(self.n, {key: c for key, c in self.terms.items() if sum(key[0]) == k})

    def coefficient_polys(self) -> dict:
        out = {}
        for (d, mono), c in self.terms.items():
            out.setdefault(d, {})[mono] = c
        return out

    def __eq__(self, other):
        if not isinstance(other, CMOperator):
            return NotImplemented
        return self.n == other.n and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    # -- arithmetic ---------------------------------------------------------
    def _lift(self, other):
        if isinstance(other, CMOperator):
            if other.n != self.n:
                raise ValueError("operators in different numbers of variables")
            return other
        return CMOperator.const(self.n, other)

    def __add__(self, other):
        o = self._lift(other)
        t = dict(self.terms)
        for k, c in o.terms.items():
            t[k] = t.get(k, 0) + c
        return CMOperator(self.n, t, self.m)

    __radd__ = __add__

    def __neg__(self):
        return CMOperator(self.n, {k: -c for k, c in self.terms.items()}, self.m)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def scale(self, c) -> "CMOperator":
        c = as_fraction(c)
        return CMOperator(self.n, {k: v * c for k, v in self.terms.items()}, self.m)

    def __mul__(self, other):
        if isinstance(other, CMOperator):
            return compose(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        if isinstance(other, CMOperator):
            return compose(other, self)
        return self.scale(other)

    def __pow__(self, k: int):
        out = CMOperator.const(self.n, 1)
        for _ in range(k):
            out = compose(out, self)
        return out

    def permute(self, perm) -> "CMOperator":
        """Relabel ``x_i -> x_perm[i-1]`` (``perm`` is a permutation of ``1..n``)."""
        out = {}
        for (d, mono), c in self.terms.items():
            nd = [0] * self.n
            for i, e in enumerate(d):
                nd[perm[i] - 1] = e
            sign = 1
            nm = []
            for g, e in mono:
                if g[0] == "w":
                    ng, s = w(perm[g[1] - 1], perm[g[2] - 1], g[3])
                    sign *= s ** e
                    nm.append((ng, e))
                else:
                    nm.append((g, e))
            key = (tuple(nd), mono_mul((), tuple(nm)))
            out[key] = out.get(key, 0) + sign * c
        return CMOperator(self.n, out, self.m)

    def symmetrize(self) -> "CMOperator":
        total = CMOperator(self.n)
        for p in itertools.permutations(range(1, self.n + 1)):
            total = total + self.permute(p)
        return total

    def is_symmetric(self) -> bool:
        return all(self.permute(p) == self for p in itertools.permutations(range(1, self.n + 1)))

    def specialize(self, g2, g3) -> "CMOperator":
        """Substitute rational values for the symbolic ``g2, g3``."""
        g2, g3 = as_fraction(g2), as_fraction(g3)
        out = {}
        for (d, mono), c in self.terms.items():
            keep = []
            for g, e in mono:
                if g == G2:
                    c = c * g2 ** e
                elif g == G3:
                    c = c * g3 ** e
                else:
                    keep.append((g, e))
            key = (d, tuple(keep))
            out[key] = out.get(key, 0) + c
        return CMOperator(self.n, out, self.m)

    def __str__(self):
        return format_cm(self)

    def __repr__(self):
        return f"CMOperator({self})"


def compose(A: CMOperator, B: CMOperator) -> CMOperator:
    """``A o B`` using ``d^alpha b = sum C(alpha, gamma) (d^gamma b) d^(alpha - gamma)``."""
    if A.n != B.n:
        raise ValueError("operators in different numbers of variables")
    n = A.n
    out = {}
    for (alpha, ma), ca in A.terms.items():
        for (beta, mb), cb in B.terms.items():
            for gamma in itertools.product(*(range(a + 1) for a in alpha)):
                binom = 1
                for a, g in zip(alpha, gamma):
                    binom *= math.comb(a, g)
                dexp = tuple(a - g + b for a, g, b in zip(alpha, gamma, beta))
                for mono, c in _mono_partial(mb, gamma):
                    key = (dexp, mono_mul(ma, mono))
                    out[key] = out.get(key, 0) + ca * cb * binom * c
    return CMOperator(n, out)


def cm_commutator(A: CMOperator, B: CMOperator) -> CMOperator:
    return compose(A, B) - compose(B, A)


def build_cm(n: int, m, inv: EllipticInvariants | None = None):
    """``(L1, L2)``: total momentum and the Hamiltonian with ``i != j`` summed twice."""
    m = as_fraction(m)
    L1 = CMOperator(n)
    L2 = CMOperator(n)
    for i in range(1, n + 1):
        L1 = L1 + CMOperator.partial(n, i)
        L2 = L2 + CMOperator.partial(n, i, 2)
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            L2 = L2 - CMOperator.wp(n, i, j).scale(2 * m * (m + 1))
    L1.m = L2.m = m
    return L1, L2


# --------------------------------------------------------------------------
# Printing
# --------------------------------------------------------------------------
def _gen_name(g) -> str:
    if g[0] == "w":
        return f"wp{chr(39) if g[3] else ''}_{g[1]}{g[2]}"
    return g[0]


def format_poly(poly: dict) -> str:
    parts = []
    for mono, c in sorted(poly.items(), key=lambda t: (-mono_weight(t[0]), t[0])):
        factors = [_gen_name(g) + (f"^{e}" if e > 1 else "") for g, e in mono]
        body = "*".join(factors)
        if not body:
            parts.append(str(c))
        elif c == 1:
            parts.append(body)
        elif c == -1:
            parts.append("-" + body)
        else:
            parts.append(f"{c}*{body}")
    return " + ".join(parts).replace("+ -", "- ") if parts else "0"


def format_cm(A: CMOperator) -> str:
    """Render as ``coeff*d1^2*d2 + ...``, highest order first."""
    if A.is_zero():
        return "0"
    polys = A.coefficient_polys()
    parts = []
    for d in sorted(polys, key=lambda d: (-sum(d), [-e for e in d])):
        dpart = "*".join(f"d{i + 1}" + (f"^{e}" if e > 1 else "") for i, e in enumerate(d) if e)
        text = format_poly(polys[d])
        if not dpart:
            parts.append(text)
        elif text == "1":
            parts.append(dpart)
        elif text == "-1":
            parts.append("-" + dpart)
        elif " + " in text or " - " in text:
            parts.append(f"({text})*{dpart}")
        else:
            parts.append(f"{text}*{dpart}")
    return " + ".join(parts).replace("+ -", "- ")


# --------------------------------------------------------------------------
# Numeric evaluation
# --------------------------------------------------------------------------
def random_lattice(rng) -> Lattice:
    tau = complex(rng.uniform(-0.4, 0.4), rng.uniform(0.9, 1.6))
    return Lattice(1.0, tau)


def random_points(n: int, lat: Lattice, count: int, rng, clearance: float = 0.3):
    """Points of ``C^n`` whose pairwise differences keep away from the lattice."""
    pts = []
    while len(pts) < count:
        u = rng.uniform(0, 1, size=n)
        v = rng.uniform(0, 1, size=n)
        x = u * lat.omega1 + v * lat.omega2
        ok = all(lat.distance_to_lattice(x[i] - x[j]) >= clearance * lat.rmin
                 for i in range(n) for j in range(i + 1, n))
        if ok:
            pts.append(x)
    return pts


def generator_values(n: int, lat: Lattice, x) -> dict:
    vals = {G2: complex(lat.g2), G3: complex(lat.g3)}
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            p, q = lat.wp_pair(x[i - 1] - x[j - 1])
            vals[("w", i, j, 0)] = complex(p)
            vals[("w", i, j, 1)] = complex(q)
    return vals


def eval_poly(poly: dict, vals: dict) -> complex:
    total = 0j
    for mono, c in poly.items():
        term = complex(c)
        for g, e in mono:
            term *= vals[g] ** e
        total += term
    return total


def numeric_residual(expr: CMOperator, lat: Lattice, samples: int = 20, seed: int = 0,
                     relative: bool = False) -> float:
    """Max ``|coefficient|`` of ``expr`` over random points and derivative monomials.

    With ``relative=True`` each coefficient is divided by the largest of its
    individual term magnitudes (a measure of cancellation).
    """
    if expr.is_zero():
        return 0.0
    rng = np.random.default_rng(seed)
    polys = expr.coefficient_polys()
    worst = 0.0
    for x in random_points(expr.n, lat, samples, rng):
        vals = generator_values(expr.n, lat, x)
        for poly in polys.values():
            v = abs(eval_poly(poly, vals))
            if relative:
                v /= max(abs(eval_poly({mono: c}, vals)) for mono, c in poly.items())
            worst = max(worst, v)
    return worst


def residual_on_lattices(expr: CMOperator, samples: int = 200, lattices: int = 3, seed: int = 0,
                         relative: bool = False) -> float:
    """``numeric_residual`` spread over ``lattices`` random lattices (``samples`` points in total)."""
    rng = np.random.default_rng(seed)
    per = -(-samples // lattices)
    worst = 0.0
    for k in range(lattices):
        lat = random_lattice(rng)
        worst = max(worst, numeric_residual(expr, lat, per, seed + 1000 * (k + 1), relative))
    return worst


# --------------------------------------------------------------------------
# Higher integrals
# --------------------------------------------------------------------------
def _generators(n: int):
    gens = [("w", i, j, k) for i in range(1, n + 1) for j in range(i + 1, n + 1) for k in (0, 1)]
    return gens + [G2, G3]


def _monomials(n: int, max_weight: int):
    """Nonconstant monomials of weight at most ``max_weight``."""
    gens = _generators(n)
    out = []

    def rec(idx, cur, wt):
        if idx == len(gens):
            if cur:
                out.append(tuple(cur))
            return
        g = gens[idx]
        gw = gen_weight(g)
        e = 0
        while wt + e * gw <= max_weight:
            rec(idx + 1, cur + ([(g, e)] if e else []), wt + e * gw)
            e += 1

    rec(0, [], 0)
    return out


def _multi_exponents(n: int, total: int):
    if n == 1:
        yield (total,)
        return
    for a in range(total, -1, -1):
        for rest in _multi_exponents(n - 1, total - a):
            yield (a,) + rest


def integral_ansatz(n: int, j: int):
    """Symmetrized lower-order terms: ``d^alpha`` with ``|alpha| <= j - 2`` and a
    nonconstant coefficient of weight at most ``j - |alpha|``.

    Constant-coefficient lower terms are left out: they are the freedom of
    adding polynomials in lower integrals, and we set them to zero.
    """
    seen = set()
    basis = []
    for d in range(j - 1):
        for mono in _monomials(n, j - d):
            for alpha in _multi_exponents(n, d):
                T = CMOperator(n, {(alpha, mono): 1}).symmetrize()
                if T.is_zero():
                    continue
                key = frozenset(T.terms)
                if key in seen:
                    continue
                seen.add(key)
                basis.append(T)
    return basis


def power_sum(n: int, j: int) -> CMOperator:
    out = CMOperator(n)
    for i in range(1, n + 1):
        out = out + CMOperator.partial(n, i, j)
    return out


def _rationalize(x: float, max_den: int) -> Fraction:
    return Fraction(x).limit_denominator(max_den)


@dataclass
class IntegralReport:
    operator: CMOperator
    ansatz_size: int
    fit_residual: float
    singular_ratio: float
    check_residual: float = float("nan")


def solve_integral(n: int, m, j: int, samples: int = 60, seed: int = 0, lattices: int = 3,
                   max_den: int = 10 ** 4, tol: float = 1e-8) -> IntegralReport:
    """Fit the ansatz so that ``[L2, L^j]`` vanishes at random points, then rationalize."""
    m = as_fraction(m)
    _, L2 = build_cm(n, m)
    top = power_sum(n, j)
    basis = integral_ansatz(n, j)
    base_comm = cm_commutator(L2, top)
    comms = [cm_commutator(L2, T) for T in basis]
    keys = set(base_comm.coefficient_polys())
    for C in comms:
        keys |= set(C.coefficient_polys())
    keys = sorted(keys)
    rng = np.random.default_rng(seed)
    rows, rhs = [], []
    per = max(1, -(-samples // lattices))
    for _ in range(lattices):
        lat = random_lattice(rng)
        for x in random_points(n, lat, per, rng):
            vals = generator_values(n, lat, x)
            bp = base_comm.coefficient_polys()
            cps = [C.coefficient_polys() for C in comms]
            for d in keys:
                scale = 1.0
                row = [eval_poly(cp.get(d, {}), vals) for cp in cps]
                b = -eval_poly(bp.get(d, {}), vals)
                scale = max([abs(v) for v in row] + [abs(b), 1.0])
                rows.append([v / scale for v in row])
                rhs.append(b / scale)
    if basis:
        A = np.array(rows, dtype=complex)
        b = np.array(rhs, dtype=complex)
        sol, *_ = np.linalg.lstsq(A, b, rcond=None)
        fit = float(np.max(np.abs(A @ sol - b))) if len(b) else 0.0
        sv = np.linalg.svd(A, compute_uv=False)
        ratio = float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0
        if fit > 1e-6:
            raise AnsatzTooSmall(f"no commuting operator of order {j} in the ansatz (fit residual {fit:.2e})")
        if ratio < 1e-10:
            raise AnsatzTooSmall(f"ansatz for order {j} is not determined (singular ratio {ratio:.2e})")
        coeffs = [_rationalize(float(c.real), max_den) for c in sol]
    else:
        fit, ratio, coeffs = float(np.max(np.abs(rhs))) if rhs else 0.0, 1.0, []
        if fit > 1e-6:
            raise AnsatzTooSmall(f"no commuting operator of order {j} in the ansatz (fit residual {fit:.2e})")
    op = top
    for c, T in zip(coeffs, basis):
        op = op + T.scale(c)
    op.m = m
    return IntegralReport(op, len(basis), fit, ratio)


def lower_integral_combination(n: int, m, op: CMOperator):
    """Exact rational ``c_ab`` with ``op = sum c_ab L1^a L2^b`` (``a + 2b <= order``), or ``None``."""
    L1, L2 = build_cm(n, m)
    j = op.order
    products = []
    for b in range(j // 2 + 1):
        for a in range(j - 2 * b + 1):
            products.append(((a, b), compose(L1 ** a, L2 ** b)))
    keys = sorted(set().union(op.terms, *(P.terms for _, P in products)))
    rows = [[P.terms.get(k, Fraction(0)) for _, P in products] for k in keys]
    rhs = [op.terms.get(k, Fraction(0)) for k in keys]
    x, _ = solve_affine(rows, rhs, len(products))
    if x is None:
        return None
    return {ab: c for (ab, _), c in zip(products, x) if c != 0}


def format_combination(comb: dict) -> str:
    parts = []
    for (a, b), c in sorted(comb.items()):
        fac = "*".join(([f"L1^{a}" if a > 1 else "L1"] if a else []) + ([f"L2^{b}" if b > 1 else "L2"] if b else []))
        fac = fac or "1"
        parts.append(f"{c}*{fac}" if c != 1 else fac)
    return " + ".join(parts).replace("+ -", "- ") if parts else "0"


def solve_higher_integral(n: int, m, j: int, inv: EllipticInvariants | None = None,
                          samples: int = 200, seed: int = 0, tol: float = 1e-10) -> CMOperator:
    """``L^j = sum d_i^j + lower`` commuting with ``L1`` and ``L2``.

    Checked at ``samples`` random points on three random lattices (relative
    cancellation below ``tol``); the
    returned operator keeps ``g2, g3`` symbolic (call ``specialize(inv)`` to
    substitute).  For ``j > n`` :class:`ReducibleIntegral` is raised with the
    expression in ``L1, L2``.
    """
    if n > 3:
        raise ValueError("only n <= 3 is supported")
    if j < 1:
        raise ValueError("order must be positive")
    if j == 1:
        return build_cm(n, m)[0]
    rep = solve_integral(n, m, j, seed=seed)
    op = rep.operator
    L1, L2 = build_cm(n, m)
    if not cm_commutator(L1, op).is_zero():
        raise AnsatzTooSmall("fitted operator fails translation invariance")
    # relative: the coefficients grow with m(m+1), rounding does not cancel
    res = residual_on_lattices(cm_commutator(L2, op), samples=samples, seed=seed + 7, relative=True)
    if res > tol:
        raise AnsatzTooSmall(f"rationalized operator misses commutativity (residual {res:.2e})")
    if j > n:
        comb = lower_integral_combination(n, m, op)
        raise ReducibleIntegral(n, j, op, None if comb is None else format_combination(comb))
    return op


# --------------------------------------------------------------------------
# Bethe states
# --------------------------------------------------------------------------
def alpha(n: int, k: int) -> np.ndarray:
    v = np.zeros(n)
    v[k - 1], v[k] = 1.0, -1.0
    return v


def residue_pattern(n: int, m: int):
    """``m(n-k)`` copies of ``alpha_k`` for ``k = 1..n-1``."""
    out = []
    for k in range(1, n):
        out += [tuple(alpha(n, k))] * (m * (n - k))
    return out


def origin_residue(n: int, m: int) -> np.ndarray:
    return -m * sum((n - k) * alpha(n, k) for k in range(1, n))


@dataclass
class CMBetheState:
    n: int
    m: int
    poles: tuple
    residues: tuple
    c: tuple
    lattice: Lattice
    t: complex = 0j
    residuals: tuple = field(default_factory=tuple)

    def __post_init__(self):
        want = sorted(residue_pattern(self.n, self.m))
        got = sorted(tuple(float(x) for x in r) for r in self.residues)
        if len(self.poles) != len(self.residues) or got != want:
            raise ResiduePatternError(
                f"residues must be {self.m}(n-k) copies of alpha_k; got {len(self.residues)} residues")
        if len(self.c) != self.n or abs(sum(self.c)) > 1e-9:
            raise ResiduePatternError("the constant term must lie in the hyperplane sum y_i = 0")


def cm_f(state: CMBetheState, z: complex) -> np.ndarray:
    """The ``h``-valued function with the state's poles and residues."""
    lat = state.lattice
    out = np.array(state.c, dtype=complex) + origin_residue(state.n, state.m) * lat.zeta(z)
    for a, r in zip(state.poles, state.residues):
        out = out + np.array(r) * lat.zeta(z - a)
    return out


def cm_bethe_values(state: CMBetheState) -> np.ndarray:
    """``<f(a+x) + f(a-x), Res_a f> / |Res_a f|^2`` at ``x = 0``; origin first."""
    lat = state.lattice
    pts = [0j] + [complex(a) for a in state.poles]
    res = [origin_residue(state.n, state.m)] + [np.array(r) for r in state.residues]
    out = []
    for i, (a, r) in enumerate(zip(pts, res)):
        reg = np.array(state.c, dtype=complex)
        for k, (b, s) in enumerate(zip(pts, res)):
            if k != i:
                reg = reg + s * lat.zeta(a - b)
        out.append(2 * np.dot(reg, r) / np.dot(r, r))
    return np.array(out)


def cm_bethe_residual(state: CMBetheState) -> float:
    return float(np.max(np.abs(cm_bethe_values(state))))


def state_from_lame(ans: HermiteAnsatz, t: complex = 0j) -> CMBetheState:
    """The ``n = 2`` state ``f = f_lame * alpha_1``."""
    a1 = alpha(2, 1)
    c = tuple(complex(x) for x in ans.c0 * a1)
    return CMBetheState(2, ans.m, tuple(ans.poles), tuple(tuple(a1) for _ in ans.poles), c, ans.lattice, t)


def lame_from_state(state: CMBetheState) -> HermiteAnsatz:
    if state.n != 2:
        raise ValueError("only n = 2 states reduce to a single Lame ansatz")
    return HermiteAnsatz(state.m, tuple(state.poles), complex(state.c[0]), state.lattice)


def _h_basis(n: int) -> np.ndarray:
    return np.array([alpha(n, k) for k in range(1, n)])


class NoConvergence(RuntimeError):
    pass


def solve_cm_bethe(n: int, m: int, lat: Lattice, seed: int = 0, tol: float = 1e-10,
                   maxiter: int = 80, t: complex = 0j) -> CMBetheState:
    """Newton iteration (least-squares steps) on poles and the constant in ``h``."""
    if m < 1 or n < 2:
        raise ValueError("solve_cm_bethe needs n >= 2 and m >= 1")
    res = residue_pattern(n, m)
    npoles = len(res)
    H = _h_basis(n)
    poles = np.array(seed_poles(npoles, lat, seed), dtype=complex)
    cvec = np.zeros(n - 1, dtype=complex)

    def make(pv, cv):
        return CMBetheState(n, m, tuple(pv), tuple(res), tuple(cv @ H), lat, t)

    def F(v):
        return cm_bethe_values(make(v[:npoles], v[npoles:]))

    v = np.concatenate([poles, cvec])
    h = 1e-6
    err = np.inf
    for _ in range(maxiter):
        g = F(v)
        err = float(np.max(np.abs(g)))
        if err < tol:
            break
        J = np.empty((len(g), len(v)), dtype=complex)
        for k in range(len(v)):
            e = np.zeros(len(v), dtype=complex)
            e[k] = h
            J[:, k] = (F(v + e) - F(v - e)) / (2 * h)
        step, *_ = np.linalg.lstsq(J, -g, rcond=None)
        lim = 0.2 * lat.rmin
        big = np.max(np.abs(step[:npoles]))
        if big > lim:
            step *= lim / big
        v = v + step
    else:
        raise NoConvergence(f"seed {seed}: residual {err:.2e}")
    st = make(v[:npoles], v[npoles:])
    st.residuals = tuple(float(abs(x)) for x in cm_bethe_values(st))
    return st


# --------------------------------------------------------------------------
# Eigenfunction checks
# --------------------------------------------------------------------------
def _series_mul(a: np.ndarray, b: np.ndarray, T: int) -> np.ndarray:
    """Product of n-variate Taylor arrays, truncated to total degree < T."""
    n = a.ndim
    out = np.zeros_like(a, dtype=complex)
    idx = [i for i in itertools.product(range(T), repeat=n) if sum(i) < T]
    nz_a = [(i, a[i]) for i in idx if a[i] != 0]
    for i, ca in nz_a:
        rem = T - sum(i)
        for j in idx:
            if sum(j) < rem and b[j] != 0:
                out[tuple(x + y for x, y in zip(i, j))] += ca * b[j]
    return out


def _series_derive(a: np.ndarray, axis: int) -> np.ndarray:
    out = np.zeros_like(a)
    sl_src = [slice(None)] * a.ndim
    sl_dst = [slice(None)] * a.ndim
    sl_src[axis] = slice(1, None)
    sl_dst[axis] = slice(0, -1)
    k = np.arange(1, a.shape[axis]).reshape([-1 if d == axis else 1 for d in range(a.ndim)])
    out[tuple(sl_dst)] = a[tuple(sl_src)] * k
    return out


def _difference_series(coeffs, n: int, i: int, j: int, T: int) -> np.ndarray:
    """``sum_k c_k (u_i - u_j)^k`` as an n-variate array."""
    out = np.zeros((T,) * n, dtype=complex)
    for k, c in enumerate(coeffs[:T]):
        for a in range(k + 1):
            idx = [0] * n
            idx[i - 1] += a
            idx[j - 1] += k - a
            out[tuple(idx)] += c * math.comb(k, a) * (-1) ** (k - a)
    return out


def _exp_linear(v, n: int, T: int) -> np.ndarray:
    """Taylor array of ``exp(<v, u>)``."""
    out = np.zeros((T,) * n, dtype=complex)
    for idx in itertools.product(range(T), repeat=n):
        if sum(idx) < T:
            val = 1.0 + 0j
            for vi, e in zip(v, idx):
                val *= vi ** e / math.factorial(e)
            out[idx] = val
    return out


def apply_cm_series(op: CMOperator, psi: np.ndarray, x0, lat: Lattice, radius: float, T: int) -> np.ndarray:
    """Apply ``op`` to an n-variate Taylor array at ``x0``; coefficients expanded by Cauchy integrals."""
    n = op.n
    gen_series = {G2: complex(lat.g2), G3: complex(lat.g3)}
    used = {g for (_, mono) in op.terms for g, _ in mono if g[0] == "w"}
    for g in sorted(used):
        _, i, j, k = g
        fn = lat.wp_prime if k else lat.wp
        gen_series[g] = _difference_series(cauchy_taylor(fn, x0[i - 1] - x0[j - 1], radius, T), n, i, j, T)
    out = np.zeros_like(psi)
    for d, poly in op.coefficient_polys().items():
        dpsi = psi
        for axis, e in enumerate(d):
            for _ in range(e):
                dpsi = _series_derive(dpsi, axis)
        coef = np.zeros_like(psi)
        for mono, c in poly.items():
            term = np.zeros_like(psi)
            term[(0,) * n] = complex(c)
            for g, e in mono:
                s = gen_series[g]
                for _ in range(e):
                    if isinstance(s, complex):
                        term = term * s
                    else:
                        term = _series_mul(term, s, T)
            coef = coef + term
        out = out + _series_mul(coef, dpsi, T)
    return out


@dataclass(frozen=True)
class CMEigenCheck:
    pi_values: tuple
    residual: float
    x0: tuple
    radius: float


def plane_wave_check(n: int, v, lat: Lattice, trunc: int = 8, ops=None) -> CMEigenCheck:
    """``m = 0``: ``psi = exp(<x, v>)`` with ``pi_1 = sum v``, ``pi_2 = sum v^2``."""
    v = [complex(x) for x in v]
    L1, L2 = build_cm(n, 0)
    ops = ops or [L1, L2]
    psi = _exp_linear(v, n, trunc + 3)
    x0 = tuple(0.1 * k for k in range(n))
    pis, worst = [], 0.0
    for L in ops:
        Lpsi = apply_cm_series(L, psi, x0, lat, 0.1, trunc + 3)
        pi = Lpsi[(0,) * n] / psi[(0,) * n]
        pis.append(pi)
        worst = max(worst, _truncated_max(Lpsi - pi * psi, trunc))
    return CMEigenCheck(tuple(pis), worst, x0, 0.1)


def _truncated_max(a: np.ndarray, T: int, radius: float = 1.0) -> float:
    worst = 0.0
    for idx in itertools.product(range(a.shape[0]), repeat=a.ndim):
        s = sum(idx)
        if s < T:
            worst = max(worst, abs(a[idx]) * radius ** s)
    return worst


def cm_eigen_check(state: CMBetheState, t: complex | None = None, trunc: int = 10, ops=None) -> CMEigenCheck:
    """Apply ``L1, L2`` (or ``ops``) to ``psi_{f,t}`` at a generic base point.

    Implemented for ``n = 2``, where ``Phi = f_lame(x1 - x2) (dx1 - dx2)``:
    ``psi = exp(t (x1 + x2)) * exp(int f_lame)(x1 - x2)``.  The residual is
    measured in coordinates scaled by the Cauchy radius, as in the Lame check.
    """
    if state.n != 2:
        raise NotImplementedError("cm_eigen_check handles n = 2 (and m = 0 via plane_wave_check)")
    t = state.t if t is None else t
    lat = state.lattice
    ans = lame_from_state(state)
    T = trunc + 3
    psi1, _, y0, r = local_solution(ans, T)
    g = [complex(psi1[k]) for k in range(T)]
    rel = _difference_series(g, 2, 1, 2, T)
    psi = _series_mul(_exp_linear([t, t], 2, T), rel, T)
    x0 = (y0 / 2, -y0 / 2)
    L1, L2 = build_cm(2, state.m)
    ops = ops or [L1, L2]
    # the Cauchy circle in x1 - x2 must avoid poles; the generators use difference y0
    pis, worst = [], 0.0
    for L in ops:
        Lpsi = apply_cm_series(L, psi, x0, lat, r, T)
        pi = Lpsi[0, 0] / psi[0, 0]
        pis.append(pi)
        k = L.order
        worst = max(worst, _truncated_max(Lpsi - pi * psi, trunc, r / 2) * (r / 2) ** k)
    return CMEigenCheck(tuple(pis), worst, x0, r)


def cm_wronskian(state: CMBetheState) -> complex:
    """Wronskian in ``x1 - x2`` of the ``f`` and ``sigma(f)`` solutions at the base point."""
    from .lame import best_base_point, sigma, wronskian
    ans = lame_from_state(state)
    y0 = best_base_point(ans)
    return wronskian(ans, sigma(ans), y0)


def relative_lame(m, inv: EllipticInvariants):
    """``n = 2``: with ``s = x1 + x2``, ``y = x1 - x2`` one has
    ``L2 = 2 d_s^2 + 2 (d_y^2 - m(m+1) wp(y))``; the ordinary part is ``L_m``."""
    return build_lame(m, inv)


def rank_n2(m, inv: EllipticInvariants) -> int:
    from .commutant import rank
    return rank(relative_lame(m, inv)).rank
