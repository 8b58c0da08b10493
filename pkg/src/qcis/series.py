"""Truncated Laurent series with exact coefficients.

A :class:`LaurentSeries` stores the coefficients of ``u^v, u^(v+1), ...,
u^(T-1)`` where ``v`` is the valuation and ``T`` the truncation order.  Terms
with exponent ``>= T`` are *unknown*, never assumed zero, and every operation
propagates the truncation pessimistically.

Coefficients are normally :class:`~fractions.Fraction` or
:class:`~qcis.scalars.QI`.  The arithmetic is duck-typed, so Python complex
numbers also work; the numeric Hermite check in :mod:`qcis.lame` relies on
that.
"""
from __future__ import annotations

import os
from fractions import Fraction
from math import factorial

from .scalars import scalar_from_json, scalar_to_json

DEFAULT_TERMS = 40


class ZeroSeries(ZeroDivisionError):
    """Inverting a series that vanishes up to its truncation."""


class PoleTooDeep(ValueError):
    """``solve_log_derivative`` needs at worst a simple pole."""


def default_terms() -> int:
    """Default number of known terms; ``QCIS_TRUNC`` overrides."""
    env = os.environ.get("QCIS_TRUNC")
    return int(env) if env else DEFAULT_TERMS


def _is_zero(c) -> bool:
    return c == 0


class LaurentSeries:
    """Immutable truncated Laurent series in the local coordinate ``u``."""

    __slots__ = ("valuation", "coeffs", "trunc")

    def __init__(self, valuation: int, coeffs, trunc: int):
        coeffs = list(coeffs)
        if valuation + len(coeffs) < trunc:
            coeffs.extend([Fraction(0)] * (trunc - valuation - len(coeffs)))
        coeffs = coeffs[: max(trunc - valuation, 0)]
        k = 0
        while k < len(coeffs) and _is_zero(coeffs[k]):
            k += 1
        if k == len(coeffs):
            valuation, coeffs = trunc, []
        else:
            valuation, coeffs = valuation + k, coeffs[k:]
        if valuation > trunc:
            raise ValueError("valuation exceeds truncation")
        object.__setattr__(self, "valuation", valuation)
        object.__setattr__(self, "coeffs", tuple(coeffs))
        object.__setattr__(self, "trunc", trunc)

    def __setattr__(self, name, value):
        raise AttributeError("LaurentSeries is immutable")

    # -- constructors -------------------------------------------------------
    @classmethod
    def from_dict(cls, terms: dict, trunc: int | None = None) -> "LaurentSeries":
        """Series with the given ``{exponent: coefficient}`` terms.

        Without ``trunc`` the series is known through ``default_terms()``
        exponents past its lowest term.
        """
        nonzero = {k: c for k, c in terms.items() if not _is_zero(c)}
        low = min(nonzero) if nonzero else 0
        if trunc is None:
            trunc = low + default_terms()
        if not nonzero:
            return cls(trunc, [], trunc)
        low = min(low, trunc)
        coeffs = [nonzero.get(k, Fraction(0)) for k in range(low, trunc)]
        return cls(low, coeffs, trunc)

    @classmethod
    def constant(cls, c, trunc: int | None = None) -> "LaurentSeries":
        return cls.from_dict({0: c}, trunc if trunc is not None else default_terms())

    @classmethod
    def monomial(cls, k: int, c=1, trunc: int | None = None) -> "LaurentSeries":
        if trunc is None:
            trunc = k + default_terms()
        return cls.from_dict({k: Fraction(c) if isinstance(c, int) else c}, trunc)

    @classmethod
    def zero(cls, trunc: int | None = None) -> "LaurentSeries":
        trunc = default_terms() if trunc is None else trunc
        return cls(trunc, [], trunc)

    # -- inspection ---------------------------------------------------------
    def is_zero(self) -> bool:
        """True if every known coefficient vanishes."""
        return not self.coeffs

    def __getitem__(self, k: int):
        if k >= self.trunc:
            raise IndexError(f"coefficient of u^{k} is beyond truncation O(u^{self.trunc})")
        if k < self.valuation:
            return Fraction(0)
        return self.coeffs[k - self.valuation]

    coefficient = __getitem__

    def terms(self):
        """Iterate ``(exponent, coefficient)`` over nonzero known terms."""
        for i, c in enumerate(self.coeffs):
            if not _is_zero(c):
                yield self.valuation + i, c

    def leading(self):
        if self.is_zero():
            raise ZeroSeries("zero series has no leading term")
        return self.coeffs[0]

    def precision(self) -> int:
        """Number of known terms past the valuation."""
        return self.trunc - self.valuation

    def __eq__(self, other):
        if not isinstance(other, LaurentSeries):
            return NotImplemented
        return (self.valuation, self.coeffs, self.trunc) == (other.valuation, other.coeffs, other.trunc)

    def __hash__(self):
        return hash((self.valuation, self.coeffs, self.trunc))

    def agrees_with(self, other: "LaurentSeries", upto: int | None = None) -> bool:
        """Coefficientwise equality below ``upto`` (default: common truncation)."""
        top = min(self.trunc, other.trunc)
        if upto is not None:
            if upto > top:
                return False
            top = upto
        low = min(self.valuation, other.valuation)
        return all(self[k] == other[k] for k in range(low, top))

    # -- arithmetic ---------------------------------------------------------
    def __add__(self, other):
        if not isinstance(other, LaurentSeries):
            if self.trunc <= 0:
                return self
            return self + LaurentSeries.from_dict({0: other}, self.trunc)
        trunc = min(self.trunc, other.trunc)
        low = min(self.valuation, other.valuation, trunc)
        coeffs = [self[k] + other[k] for k in range(low, trunc)]
        return LaurentSeries(low, coeffs, trunc)

    __radd__ = __add__

    def __neg__(self):
        return LaurentSeries(self.valuation, [-c for c in self.coeffs], self.trunc)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "LaurentSeries":
        return LaurentSeries(self.valuation, [c * a for a in self.coeffs], self.trunc)

    def __mul__(self, other):
        if not isinstance(other, LaurentSeries):
            return self.scale(other)
        va, vb = self.valuation, other.valuation
        trunc = min(self.trunc + vb, other.trunc + va)
        n = trunc - va - vb
        a, b = self.coeffs, other.coeffs
        out = []
        for k in range(max(n, 0)):
            s = 0
            for i in range(max(0, k - len(b) + 1), min(k, len(a) - 1) + 1):
                s = s + a[i] * b[k - i]
            out.append(s)
        return LaurentSeries(va + vb, out, trunc)

    def __rmul__(self, other):
        return self.scale(other)

    def invert(self) -> "LaurentSeries":
        """Multiplicative inverse; relative precision is preserved."""
        if self.is_zero():
            raise ZeroSeries("cannot invert a series that is zero up to its truncation")
        a = self.coeffs
        n = self.precision()
        inv0 = 1 / a[0] if not isinstance(a[0], int) else Fraction(1, a[0])
        out = [inv0]
        for k in range(1, n):
            s = 0
            for i in range(1, min(k, len(a) - 1) + 1):
                s = s + a[i] * out[k - i]
            out.append(-s * inv0)
        return LaurentSeries(-self.valuation, out, -self.valuation + n)

    def __truediv__(self, other):
        if isinstance(other, LaurentSeries):
            return self * other.invert()
        return self.scale(Fraction(1) / other if isinstance(other, int) else 1 / other)

    def __rtruediv__(self, other):
        return self.invert().scale(other)

    def __pow__(self, k: int):
        if k < 0:
            return self.invert() ** (-k)
        out = LaurentSeries.from_dict({0: Fraction(1)}, self.precision() if self.trunc > 0 else self.trunc)
        if k == 0:
            return out
        out, base = None, self
        while k:
            if k & 1:
                out = base if out is None else out * base
            k >>= 1
            if k:
                base = base * base
        return out

    def shift(self, k: int) -> "LaurentSeries":
        """Multiply by ``u^k``."""
        return LaurentSeries(self.valuation + k, self.coeffs, self.trunc + k)

    def truncate(self, trunc: int) -> "LaurentSeries":
        """Forget terms at exponents ``>= trunc`` (never extends precision)."""
        return LaurentSeries(self.valuation, self.coeffs, min(trunc, self.trunc))

    def derive(self) -> "LaurentSeries":
        """Termwise ``d/du``; the truncation drops by one."""
        v = self.valuation
        out = [(v + i) * c for i, c in enumerate(self.coeffs)]
        return LaurentSeries(v - 1, out, self.trunc - 1)

    def derive_n(self, n: int) -> "LaurentSeries":
        out = self
        for _ in range(n):
            out = out.derive()
        return out

    def map_coeffs(self, fn) -> "LaurentSeries":
        return LaurentSeries(self.valuation, [fn(c) for c in self.coeffs], self.trunc)

    def evaluate(self, u):
        """Numerically sum the known terms at ``u`` (floats or complex)."""
        total = 0j
        for k, c in self.terms():
            total += complex(c) * u ** k
        return total

    # -- formatting ---------------------------------------------------------
    def __str__(self):
        parts = []
        for k, c in self.terms():
            if k == 0:
                mono = ""
            elif k == 1:
                mono = "u"
            else:
                mono = f"u^{k}"
            if mono and c == 1:
                parts.append(mono)
            elif mono and c == -1:
                parts.append("-" + mono)
            elif mono:
                parts.append(f"{c}*{mono}")
            else:
                parts.append(str(c))
        parts.append(f"O(u^{self.trunc})")
        return " + ".join(parts).replace("+ -", "- ")

    def __repr__(self):
        return f"LaurentSeries({self})"

    def to_json(self) -> dict:
        return {
            "valuation": self.valuation,
            "coeffs": [scalar_to_json(c) for c in self.coeffs],
            "trunc": self.trunc,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LaurentSeries":
        return cls(obj["valuation"], [scalar_from_json(c) for c in obj["coeffs"]], obj["trunc"])


def exp_series(f: LaurentSeries, trunc: int | None = None) -> LaurentSeries:
    """``exp(f)`` for a power series ``f`` with ``f(0) = 0``."""
    if f.valuation < 1 and not f.is_zero():
        raise ValueError("exp_series needs f(0) = 0")
    top = f.trunc if trunc is None else min(trunc, f.trunc)
    # g' = f' g
    _, g = solve_log_derivative(f.derive(), top)
    return g


def solve_log_derivative(f: LaurentSeries, trunc: int | None = None):
    """Local solution of ``psi' = f * psi``.

    Returns ``(rho, g)`` with ``rho`` the residue of ``f`` at ``u = 0`` and
    ``g`` a unit power series, ``g(0) = 1``, such that ``psi = u^rho * g``.
    ``g`` is known up to ``min(trunc, f.trunc + 1)``.
    """
    if not f.is_zero() and f.valuation < -1:
        raise PoleTooDeep(f"log-derivative has a pole of order {-f.valuation}")
    rho = f[-1] if f.trunc > -1 else Fraction(0)
    h = f - LaurentSeries.from_dict({-1: rho}, f.trunc) if rho != 0 else f
    top = f.trunc + 1
    if trunc is not None:
        top = min(top, trunc)
    if top <= 0:
        return rho, LaurentSeries(0, [], max(top, 0))
    hc = [h[k] for k in range(0, top - 1)]
    g = [Fraction(1)]
    for n in range(top - 1):
        s = 0
        for k in range(n + 1):
            s = s + hc[k] * g[n - k]
        g.append(s / (n + 1))
    return rho, LaurentSeries(0, g, top)


def taylor_to_series(values, trunc: int | None = None) -> LaurentSeries:
    """Power series from a list of derivatives ``[f(0), f'(0), f''(0), ...]``."""
    n = len(values) if trunc is None else min(trunc, len(values))
    return LaurentSeries(0, [values[k] * Fraction(1, factorial(k)) for k in range(n)], n)
