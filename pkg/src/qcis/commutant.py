"""Commutants of ordinary operators over ``Q[p, p']`` and their spectral curves.

The pieces fit together as follows.

* :func:`solution_basis` expands the formal solutions of ``(L - lam) psi = 0``
  at an ordinary point of the curve, echelonized as ``psi_k = u^k + O(u^N)``.
* :func:`find_commuting` makes an ansatz ``Q = D^s + sum b_j D^j`` with
  ``b_j`` weighted-homogeneous-bounded in ``p`` (weight 2) and ``p'``
  (weight 3) and solves ``[L, Q] = 0`` as an exact rational linear system.
* :func:`spectral_polynomial` recovers the monic ``P`` with ``Q^2 = P(L)``
  from the action of ``Q`` on solution spaces, then re-verifies the identity
  by full operator expansion.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import isqrt

from .elliptic import EllipticElement, EllipticInvariants, taylor_at
from .linalg import nullspace, rank as matrix_rank, solve_affine
from .opalg import DiffOp, EllipticRing, SeriesRing, adjoint, apply_series, commutator, compose
from .scalars import QI, realify
from .series import LaurentSeries, default_terms


class SingularPoint(ValueError):
    """Leading coefficient of ``L`` vanishes at the base point."""


class NotFound(LookupError):
    """Bounded commutant search found no operator of the requested order."""


class NonScalarAction(ArithmeticError):
    """``Q^2`` failed to act as a scalar on too many solution spaces."""


class InterpolationMismatch(ArithmeticError):
    """Interpolated ``P`` does not satisfy ``Q^2 = P(L)`` exactly."""


# --------------------------------------------------------------------------
# base points
# --------------------------------------------------------------------------
def _rational_sqrt(r: Fraction):
    if r < 0:
        return None
    n, d = r.numerator, r.denominator
    sn, sd = isqrt(n), isqrt(d)
    if sn * sn == n and sd * sd == d:
        return Fraction(sn, sd)
    return None


def find_base_point(inv: EllipticInvariants, max_height: int = 50):
    """Smallest-height point ``(p0, q0)`` with ``q0^2 = 4p0^3 - g2 p0 - g3``.

    ``p0`` is rational and ``q0`` is rational or purely imaginary Gaussian
    rational; real ``q0`` wins ties.  ``p0 = a/d^2`` is scanned by
    ``max(|a|, d)``.
    """
    for h in range(max_height + 1):
        found = []
        for d in range(1, max(h, 1) + 1):
            for a in range(-h, h + 1):
                if max(abs(a), d) != max(h, 1):
                    continue
                p0 = Fraction(a, d * d)
                r = inv.cubic(p0)
                s = _rational_sqrt(r)
                if s is not None:
                    found.append((0, d, abs(a), -a, p0, s))
                    continue
                s = _rational_sqrt(-r)
                if s is not None:
                    found.append((1, d, abs(a), -a, p0, QI(0, s)))
        if found:
            found.sort(key=lambda t: t[:4])
            return found[0][4], found[0][5]
    raise ValueError("no small base point found; pass one explicitly")


def check_base_point(inv: EllipticInvariants, base) -> None:
    p0, q0 = base
    if q0 * q0 != inv.cubic(p0):
        raise ValueError(f"base point {base} is not on the curve")


# --------------------------------------------------------------------------
# formal solutions and rank
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class SolutionBasis:
    base: tuple
    lam: object
    basis: tuple
    trunc: int

    @property
    def order(self) -> int:
        return len(self.basis)


def _local_coefficients(L: DiffOp, base, trunc: int) -> list:
    if isinstance(L.ring, SeriesRing):
        return [a.truncate(trunc) for a in L.coeffs]
    return [taylor_at(a, base, trunc) for a in L.coeffs]


def solution_basis(L: DiffOp, lam, base=None, trunc: int | None = None,
                   coeffs: list | None = None) -> SolutionBasis:
    """Echelonized formal solutions of ``(L - lam) psi = 0`` at ``base``.

    Over the series ring the expansion point is ``u = 0`` and ``base`` is
    ignored.  ``coeffs`` may carry pre-expanded local coefficients.
    """
    trunc = default_terms() if trunc is None else trunc
    N = L.order
    if isinstance(L.ring, EllipticRing):
        if base is None:
            base = find_base_point(L.ring.inv)
        check_base_point(L.ring.inv, base)
    a = coeffs if coeffs is not None else _local_coefficients(L, base, trunc)
    if any(c.valuation < 0 for c in a if not c.is_zero()):
        raise SingularPoint("coefficients have poles at the expansion point")
    lead = a[N][0]
    if lead == 0:
        raise SingularPoint("leading coefficient vanishes at the expansion point")
    # falling[j][n] = n (n-1) ... (n-j+1)
    rows = [[a[j][k] for k in range(trunc)] for j in range(N + 1)]
    basis = []
    for k0 in range(N):
        c = [Fraction(0)] * trunc
        c[k0] = Fraction(1)
        for n in range(trunc - N):
            s = -lam * c[n]
            for j in range(N + 1):
                aj = rows[j]
                for k in range(n + 1):
                    idx = n - k + j
                    if j == N and k == 0:
                        continue
                    if aj[k] == 0 or c[idx] == 0:
                        continue
                    s = s + aj[k] * _falling(idx, j) * c[idx]
            c[n + N] = -s / (lead * _falling(n + N, N))
        basis.append(LaurentSeries(0, c, trunc))
    return SolutionBasis(base, lam, tuple(basis), trunc)


def _falling(n: int, j: int) -> int:
    out = 1
    for i in range(j):
        out *= n - i
    return out


def basis_residual(L: DiffOp, sb: SolutionBasis) -> list:
    """``(L - lam) psi_k`` for each basis element, via an independent apply."""
    a = _local_coefficients(L, sb.base, sb.trunc)
    out = []
    for psi in sb.basis:
        out.append(apply_series(a, psi) - psi.scale(sb.lam))
    return out


@dataclass(frozen=True)
class RankReport:
    rank: int | None
    order: int
    failure: str | None = None


def rank(L: DiffOp) -> RankReport:
    """Dimension of the formal solution space at a generic point."""
    lead = L.leading()
    if isinstance(L.ring, SeriesRing):
        if lead.valuation == 0:
            return RankReport(L.order, L.order)
        return RankReport(None, L.order, f"leading coefficient {lead} is not a unit on the formal disc "
                                         f"(valuation {lead.valuation})")
    if lead.is_constant() and not lead.is_zero():
        return RankReport(L.order, L.order)
    return RankReport(None, L.order, f"leading coefficient {lead} vanishes somewhere on the curve")


# --------------------------------------------------------------------------
# commutant search
# --------------------------------------------------------------------------
def _monomials(max_weight: int):
    out = []
    for b in (0, 1):
        a = 0
        while 2 * a + 3 * b <= max_weight:
            out.append((a, b))
            a += 1
    return sorted(out)


@dataclass
class CommutingSystem:
    """Linear system for ``[L, D^s + sum x_k M_k] = 0``."""

    unknowns: list           # (j, (a, b)) for M_k = p^a p'^b D^j
    rows: list               # commutator equations
    rhs: list
    skew_rows: list          # Q + Q* = 0
    top_rows: list           # no D^(s-1) term
    ring: EllipticRing
    s: int

    def operator(self, x) -> DiffOp:
        coeffs = [self.ring.zero() for _ in range(self.s + 1)]
        coeffs[self.s] = self.ring.const(1)
        for (j, (a, b)), v in zip(self.unknowns, x):
            if v != 0:
                coeffs[j] = coeffs[j] + EllipticElement(self.ring.inv, {(a, b): v})
        return DiffOp(self.ring, coeffs)


def _flatten(op: DiffOp) -> dict:
    out = {}
    for j, c in enumerate(op.coeffs):
        for mono, v in c.terms.items():
            out[(j, mono)] = v
    return out


def commuting_system(L: DiffOp, s: int, wbound: int | None = None) -> CommutingSystem:
    """Assemble the undetermined-coefficient system for order ``s``."""
    if not isinstance(L.ring, EllipticRing):
        raise TypeError("commutant search runs over the elliptic ring")
    wbound = s if wbound is None else wbound
    ring = L.ring
    unknowns = []
    for j in range(s):
        for mono in _monomials(wbound - j):
            unknowns.append((j, mono))
    cols = []
    skew_cols = []
    for j, (a, b) in unknowns:
        M = DiffOp(ring, [ring.zero()] * j + [EllipticElement(ring.inv, {(a, b): Fraction(1)})])
        cols.append(_flatten(commutator(L, M)))
        skew_cols.append(_flatten(M + adjoint(M)))
    base = _flatten(commutator(L, DiffOp.D(ring, s)))
    Ds = DiffOp.D(ring, s)
    skew_base = _flatten(Ds + adjoint(Ds))

    def assemble(columns, const):
        keys = sorted(set(const).union(*[c.keys() for c in columns]))
        rows = [[col.get(k, Fraction(0)) for col in columns] for k in keys]
        rhs = [-const.get(k, Fraction(0)) for k in keys]
        return rows, rhs

    rows, rhs = assemble(cols, base)
    skew_rows, skew_rhs = assemble(skew_cols, skew_base)
    if any(v != 0 for v in skew_rhs):
        skew_rows = None  # D^s is not skew: s even
    top_rows = [[Fraction(1) if u[0] == s - 1 and k == i else Fraction(0) for k in range(len(unknowns))]
                for i, u in enumerate(unknowns) if u[0] == s - 1]
    return CommutingSystem(unknowns, rows, rhs, skew_rows or [], top_rows, ring, s)


def find_commuting(L: DiffOp, s: int, wbound: int | None = None) -> DiffOp:
    """Monic order-``s`` operator commuting with ``L`` inside the weight ansatz.

    Among solutions the one without a ``D^(s-1)`` term is chosen, skew-adjoint
    when such a solution exists; remaining freedom is fixed by zeroing free
    variables of the reduced echelon form.

    Raises :class:`NotFound` when the system is inconsistent.  For odd ``s``
    no polynomial in ``L`` has a monic ``D^s`` term, so consistency is the
    same as a genuinely new element of the commutant.
    """
    if L.order != 2 or L.leading() != L.ring.const(1):
        raise ValueError("find_commuting expects L = D^2 + lower order terms")
    if s % 2 == 0:
        raise ValueError("target order must be odd")
    sys_ = commuting_system(L, s, wbound)
    n = len(sys_.unknowns)
    attempts = []
    if sys_.skew_rows:
        attempts.append(sys_.rows + sys_.skew_rows + sys_.top_rows)
    attempts.append(sys_.rows + sys_.top_rows)
    for rows in attempts:
        rhs = sys_.rhs + [Fraction(0)] * (len(rows) - len(sys_.rows))
        x, _ = solve_affine(rows, rhs, n)
        if x is not None:
            Q = sys_.operator(x)
            if not commutator(L, Q).is_zero():
                raise ArithmeticError("linear solve returned a non-commuting operator")
            return Q
    raise NotFound(f"no order-{s} operator commutes with L within weight bound "
                   f"{s if wbound is None else wbound}")


# --------------------------------------------------------------------------
# action on fibers and the spectral polynomial
# --------------------------------------------------------------------------
def centralizer_action(L: DiffOp, Q: DiffOp, lam, base=None, trunc: int | None = None,
                       sb: SolutionBasis | None = None):
    """Matrix of ``Q`` on the echelon solution basis of ``(L - lam) psi = 0``.

    Column ``k`` holds the coordinates of ``Q psi_k``.  The image is checked to
    lie in the span of the basis up to the available truncation.
    """
    if sb is None:
        sb = solution_basis(L, lam, base, trunc)
    N = sb.order
    qa = _local_coefficients(Q, sb.base, sb.trunc)
    cols = []
    for psi in sb.basis:
        phi = apply_series(qa, psi)
        coords = [phi[i] for i in range(N)]
        recon = None
        for i, c in enumerate(coords):
            t = sb.basis[i].scale(c)
            recon = t if recon is None else recon + t
        diff = phi - recon
        if not diff.is_zero():
            raise NonScalarAction("Q does not preserve the solution space (is [L, Q] = 0?)")
        if phi.trunc <= N:
            raise NonScalarAction("truncation too low to read off the action")
        cols.append([realify(c) for c in coords])
    return [[cols[k][i] for k in range(N)] for i in range(N)]


def _matmul(A, B):
    n, m, p = len(A), len(B), len(B[0])
    return [[sum((A[i][k] * B[k][j] for k in range(m)), Fraction(0)) for j in range(p)] for i in range(n)]


def _scalar_of(M):
    c = M[0][0]
    for i, row in enumerate(M):
        for j, v in enumerate(row):
            if (i == j and v != c) or (i != j and v != 0):
                return None
    return c


@dataclass(frozen=True)
class SpectralCurve:
    """``mu^2 = P(lambda)``; ``coeffs`` ascending, exact, monic."""

    coeffs: tuple

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, lam):
        out = Fraction(0)
        for c in reversed(self.coeffs):
            out = out * lam + c
        return out

    def is_monic(self) -> bool:
        return self.coeffs[-1] == 1

    def discriminant(self) -> Fraction:
        import sympy

        t = sympy.Symbol("t")
        poly = sum(sympy.Rational(c.numerator, c.denominator) * t ** k for k, c in enumerate(self.coeffs))
        d = sympy.discriminant(poly, t)
        return Fraction(int(d.p), int(d.q))

    def __str__(self):
        terms = []
        for k in range(self.degree, -1, -1):
            c = self.coeffs[k]
            if c == 0:
                continue
            mono = "" if k == 0 else ("t" if k == 1 else f"t^{k}")
            if mono and c == 1:
                terms.append(mono)
            elif mono and c == -1:
                terms.append("-" + mono)
            elif mono:
                terms.append(f"{c}*{mono}")
            else:
                terms.append(str(c))
        return " + ".join(terms).replace("+ -", "- ") or "0"

    def to_json(self) -> dict:
        return {"degree": self.degree, "coeffs": [[c.numerator, c.denominator] for c in self.coeffs]}


def interpolate(points) -> list:
    """Exact Newton interpolation; ascending coefficients of degree ``len-1``."""
    xs = [Fraction(x) for x, _ in points]
    dd = [Fraction(y) for _, y in points]
    n = len(xs)
    coef = [dd[0]]
    for level in range(1, n):
        dd = [(dd[i + 1] - dd[i]) / (xs[i + level] - xs[i]) for i in range(n - level)]
        coef.append(dd[0])
    poly = [Fraction(0)] * n
    # Horner on the Newton form
    for k in range(n - 1, -1, -1):
        new = [Fraction(0)] * n
        for i, c in enumerate(poly):
            if c:
                if i + 1 < n:
                    new[i + 1] += c
                new[i] -= c * xs[k]
        new[0] += coef[k]
        poly = new
    return poly


def polynomial_of(L: DiffOp, coeffs) -> DiffOp:
    """``sum coeffs[k] L^k`` by Horner."""
    out = DiffOp.zero(L.ring)
    for c in reversed(coeffs):
        out = compose(out, L) + DiffOp.mult(L.ring, c)
    return out


def spectral_polynomial(L: DiffOp, Q: DiffOp, base=None, trunc: int | None = None) -> SpectralCurve:
    """Monic ``P`` with ``Q^2 = P(L)`` for a commuting pair of orders 2 and odd."""
    if L.order != 2:
        raise ValueError("L must have order 2")
    if Q.order % 2 == 0:
        raise ValueError(f"order(Q) = {Q.order} is even; expected an odd order")
    if not commutator(L, Q).is_zero():
        raise ValueError("L and Q do not commute")
    deg = Q.order
    if base is None:
        base = find_base_point(L.ring.inv)
    trunc = default_terms() if trunc is None else trunc
    trunc = max(trunc, 2 * Q.order + 8)
    la = _local_coefficients(L, base, trunc)
    points = []
    lam = 0
    skipped = 0
    while len(points) < deg + 1:
        sb = solution_basis(L, Fraction(lam), base, trunc, coeffs=la)
        M = centralizer_action(L, Q, lam, sb=sb)
        c = _scalar_of(_matmul(M, M))
        if c is None:
            skipped += 1
            if skipped > deg + 1:
                raise NonScalarAction("Q^2 is not scalar on the solution spaces")
        else:
            points.append((Fraction(lam), realify(c)))
        lam += 1
    if any(isinstance(y, QI) for _, y in points):
        raise NonScalarAction("Q^2 acts by a non-real scalar")
    poly = interpolate(points)
    while len(poly) > 1 and poly[-1] == 0:
        poly.pop()
    curve = SpectralCurve(tuple(poly))
    if curve.degree != deg or not curve.is_monic():
        raise InterpolationMismatch(f"interpolated polynomial {curve} is not monic of degree {deg}")
    if not (compose(Q, Q) - polynomial_of(L, curve.coeffs)).is_zero():
        raise InterpolationMismatch("Q^2 - P(L) does not vanish identically")
    return curve


# --------------------------------------------------------------------------
# algebraic type and commutativity
# --------------------------------------------------------------------------
def _sympy_matrix(M):
    import sympy

    def conv(v):
        if isinstance(v, QI):
            return sympy.Rational(v.re.numerator, v.re.denominator) + sympy.I * sympy.Rational(
                v.im.numerator, v.im.denominator)
        v = Fraction(v)
        return sympy.Rational(v.numerator, v.denominator)

    return sympy.Matrix([[conv(v) for v in row] for row in M])


def is_regular_semisimple(M) -> bool:
    """Distinct eigenvalues over the algebraic closure."""
    if len(M) == 2:
        tr = M[0][0] + M[1][1]
        det = M[0][0] * M[1][1] - M[0][1] * M[1][0]
        return tr * tr - 4 * det != 0
    import sympy

    lam = sympy.Symbol("x")
    cp = _sympy_matrix(M).charpoly(lam).as_expr()
    return sympy.discriminant(cp, lam) != 0


@dataclass
class Verdict:
    kind: str                      # "AlgebraicType" or "NoWitnessUpTo"
    max_order: int
    witness: DiffOp | None = None
    curve: SpectralCurve | None = None
    samples: list = field(default_factory=list)
    tried: list = field(default_factory=list)

    def __str__(self):
        if self.kind == "AlgebraicType":
            return f"AlgebraicType(order {self.witness.order})"
        return f"NoWitnessUpTo({self.max_order})"


def algebraic_type_test(L: DiffOp, max_order: int = 7, wbound: int | None = None, samples: int = 3,
                        seed: int = 0, base=None) -> Verdict:
    """Search odd orders ``<= max_order`` for a regular semisimple commuting witness."""
    rng = random.Random(seed)
    if base is None:
        base = find_base_point(L.ring.inv)
    tried = []
    for s in range(1, max_order + 1, 2):
        try:
            Q = find_commuting(L, s, wbound if wbound is None else max(wbound, s))
        except NotFound:
            tried.append(s)
            continue
        tried.append(s)
        lams = []
        ok = True
        for _ in range(samples):
            lam = Fraction(rng.randint(-30, 30), rng.randint(1, 7))
            M = centralizer_action(L, Q, lam, base)
            good = is_regular_semisimple(M)
            lams.append((lam, good))
            ok = ok and good
        if ok:
            curve = spectral_polynomial(L, Q, base) if L.order == 2 else None
            return Verdict("AlgebraicType", max_order, Q, curve, lams, tried)
    return Verdict("NoWitnessUpTo", max_order, tried=tried)


@dataclass
class CommutativityReport:
    pairs: list      # (i, j, commutes)

    @property
    def passed(self) -> bool:
        return all(ok for _, _, ok in self.pairs)


def centralizer_commutativity_check(L: DiffOp, found: list) -> CommutativityReport:
    """Exact pairwise commutators among ``L`` and the supplied elements."""
    ops = [L] + [Q for Q in found if Q != L]
    pairs = []
    for (i, A), (j, B) in combinations(enumerate(ops), 2):
        pairs.append((i, j, commutator(A, B).is_zero()))
    return CommutativityReport(pairs)


def nullspace_dimension(sys_: CommutingSystem, with_normalization: bool = False) -> int:
    rows = sys_.rows + (sys_.skew_rows + sys_.top_rows if with_normalization else [])
    return len(nullspace(rows, len(sys_.unknowns)))


def system_rank(sys_: CommutingSystem) -> int:
    return matrix_rank(sys_.rows, len(sys_.unknowns))
