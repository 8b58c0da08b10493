"""Ordinary differential operators ``sum_j a_j D^j`` over an exact coefficient ring.

Two coefficient rings are supported: :class:`EllipticRing` (elements of
``Q[p, p']``) and :class:`SeriesRing` (truncated Laurent series in ``u``).
Operators are immutable; composition uses ``D a = a D + a'`` iterated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .elliptic import EllipticElement, EllipticInvariants, embed, taylor_at
from .series import LaurentSeries, default_terms

ZERO_ORDER = -math.inf


class RingMismatch(TypeError):
    pass


@dataclass(frozen=True)
class EllipticRing:
    inv: EllipticInvariants

    def const(self, c) -> EllipticElement:
        return EllipticElement.const(self.inv, c)

    def zero(self) -> EllipticElement:
        return EllipticElement(self.inv)

    def p(self) -> EllipticElement:
        return EllipticElement.p(self.inv)

    def dp(self) -> EllipticElement:
        return EllipticElement.dp(self.inv)

    def owns(self, x) -> bool:
        return isinstance(x, EllipticElement) and x.inv == self.inv


@dataclass(frozen=True)
class SeriesRing:
    trunc: int = 0

    def __post_init__(self):
        if self.trunc == 0:
            object.__setattr__(self, "trunc", default_terms())

    def const(self, c) -> LaurentSeries:
        return LaurentSeries.constant(Fraction(c) if isinstance(c, int) else c, self.trunc)

    def zero(self) -> LaurentSeries:
        return LaurentSeries.zero(self.trunc)

    def u(self) -> LaurentSeries:
        return LaurentSeries.monomial(1, 1, self.trunc)

    def owns(self, x) -> bool:
        return isinstance(x, LaurentSeries)


class DiffOp:
    """``coeffs[j]`` multiplies ``D^j``; trailing zero coefficients are dropped."""

    __slots__ = ("ring", "coeffs")

    def __init__(self, ring, coeffs):
        coeffs = [ring.const(c) if not ring.owns(c) else c for c in coeffs]
        while coeffs and coeffs[-1].is_zero():
            coeffs.pop()
        self.ring = ring
        self.coeffs = tuple(coeffs)

    # -- constructors -------------------------------------------------------
    @classmethod
    def zero(cls, ring) -> "DiffOp":
        return cls(ring, [])

    @classmethod
    def identity(cls, ring) -> "DiffOp":
        return cls(ring, [ring.const(1)])

    @classmethod
    def D(cls, ring, power: int = 1) -> "DiffOp":
        return cls(ring, [ring.zero()] * power + [ring.const(1)])

    @classmethod
    def mult(cls, ring, a) -> "DiffOp":
        """Multiplication by the ring element (or scalar) ``a``."""
        return cls(ring, [a])

    # -- structure ----------------------------------------------------------
    @property
    def order(self):
        return len(self.coeffs) - 1 if self.coeffs else ZERO_ORDER

    def is_zero(self) -> bool:
        return not self.coeffs

    def leading(self):
        if not self.coeffs:
            raise ValueError("zero operator has no leading coefficient")
        return self.coeffs[-1]

    def coeff(self, j: int):
        return self.coeffs[j] if 0 <= j < len(self.coeffs) else self.ring.zero()

    def __eq__(self, other):
        if not isinstance(other, DiffOp):
            return NotImplemented
        return self.ring == other.ring and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.ring, self.coeffs))

    # -- arithmetic ---------------------------------------------------------
    def _check(self, other: "DiffOp"):
        if self.ring != other.ring:
            raise RingMismatch(f"{self.ring} vs {other.ring}")

    def _lift(self, other) -> "DiffOp":
        if isinstance(other, DiffOp):
            self._check(other)
            return other
        return DiffOp.mult(self.ring, other)

    def __add__(self, other):
        o = self._lift(other)
        n = max(len(self.coeffs), len(o.coeffs))
        return DiffOp(self.ring, [self.coeff(j) + o.coeff(j) for j in range(n)])

    __radd__ = __add__

    def __neg__(self):
        return DiffOp(self.ring, [-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        return compose(self, self._lift(other))

    def __rmul__(self, other):
        return compose(self._lift(other), self)

    def __pow__(self, k: int):
        out = DiffOp.identity(self.ring)
        for _ in range(k):
            out = compose(out, self)
        return out

    def adjoint(self) -> "DiffOp":
        return adjoint(self)

    def __str__(self):
        return format_operator(self)

    def __repr__(self):
        return f"DiffOp({self})"


def compose(A: DiffOp, B: DiffOp) -> DiffOp:
    """Operator product ``A o B``."""
    if A.ring != B.ring:
        raise RingMismatch(f"{A.ring} vs {B.ring}")
    if A.is_zero() or B.is_zero():
        return DiffOp.zero(A.ring)
    na = len(A.coeffs) - 1
    # derivs[j][k] = k-th derivative of b_j
    derivs = []
    for b in B.coeffs:
        row = [b]
        for _ in range(na):
            row.append(row[-1].derive())
        derivs.append(row)
    out = [A.ring.zero() for _ in range(na + len(B.coeffs))]
    for i, a in enumerate(A.coeffs):
        if a.is_zero():
            continue
        for j in range(len(B.coeffs)):
            for k in range(i + 1):
                bk = derivs[j][k]
                if bk.is_zero():
                    continue
                out[i - k + j] = out[i - k + j] + (a * bk) * math.comb(i, k)
    return DiffOp(A.ring, out)


def commutator(A: DiffOp, B: DiffOp) -> DiffOp:
    """``[A, B] = AB - BA``; an exact zero comes back as the zero operator."""
    return compose(A, B) - compose(B, A)


def adjoint(A: DiffOp) -> DiffOp:
    """Formal adjoint with ``D* = -D`` and ``a* = a``."""
    out = [A.ring.zero() for _ in A.coeffs]
    for j, a in enumerate(A.coeffs):
        # (a D^j)* = (-D)^j a = (-1)^j sum_k C(j,k) a^(k) D^(j-k)
        ak = a
        sign = -1 if j % 2 else 1
        for k in range(j + 1):
            if k:
                ak = ak.derive()
            if not ak.is_zero():
                out[j - k] = out[j - k] + ak * (sign * math.comb(j, k))
    return DiffOp(A.ring, out)


def coefficient_series(A: DiffOp, trunc: int, base=None) -> list:
    """Expand each coefficient of ``A`` as a series in the local coordinate.

    Over :class:`EllipticRing` the expansion is at the origin (``base=None``,
    Laurent) or at an ordinary point with ``(wp, wp') = base`` (Taylor).
    """
    if isinstance(A.ring, SeriesRing):
        return [a.truncate(trunc) for a in A.coeffs]
    if base is None:
        return [embed(a, A.ring.inv, trunc) for a in A.coeffs]
    return [taylor_at(a, base, trunc) for a in A.coeffs]


def apply_series(coeffs: list, psi: LaurentSeries) -> LaurentSeries:
    """``sum_j coeffs[j] * psi^(j)`` for pre-expanded coefficients."""
    total = None
    d = psi
    for j, a in enumerate(coeffs):
        if j:
            d = d.derive()
        if a.is_zero():
            continue
        term = a * d
        total = term if total is None else total + term
    if total is None:
        return LaurentSeries.zero(psi.trunc - max(len(coeffs) - 1, 0))
    return total


def apply(A: DiffOp, psi: LaurentSeries, base=None) -> LaurentSeries:
    """``A psi`` with pessimistic truncation."""
    margin = 2 * (max((a.weight() for a in A.coeffs), default=0) if isinstance(A.ring, EllipticRing) else 0)
    trunc = psi.trunc + margin + 2
    return apply_series(coefficient_series(A, trunc, base), psi)


def format_operator(A: DiffOp) -> str:
    """Render in the operator expression grammar, highest order first."""
    if A.is_zero():
        return "0"
    parts = []
    for j in range(len(A.coeffs) - 1, -1, -1):
        a = A.coeffs[j]
        if a.is_zero():
            continue
        dpart = "" if j == 0 else ("D" if j == 1 else f"D^{j}")
        text = str(a)
        if not dpart:
            parts.append(text)
            continue
        if isinstance(a, EllipticElement) and a.is_constant():
            c = a.constant_term()
            if c == 1:
                parts.append(dpart)
            elif c == -1:
                parts.append("-" + dpart)
            else:
                parts.append(f"{c}*{dpart}")
        else:
            many = (" + " in text or " - " in text)
            parts.append(f"({text})*{dpart}" if many else f"{text}*{dpart}")
    return " + ".join(parts).replace("+ -", "- ")
