"""Operator expression language.

Grammar (``^`` binds tighter than unary minus, which binds tighter than
``*``, which binds tighter than ``+``/``-``)::

    expr   := term (('+' | '-') term)*
    term   := unary ('*' unary)*
    unary  := '-' unary | factor
    factor := atom ('^' nat)?
    atom   := rational | 'u' | 'wp' | "wp'" | 'D' | 'd' i | 'wp_ij' | "wp'_ij"
            | '(' expr ')' | 'm' | 'g2' | 'g3'

Rationals are written ``p`` or ``p/q``.  Parameters are replaced by their
values while parsing, except names listed in ``symbols`` which stay symbolic.
Products keep their written order: ``D*u`` and ``u*D`` are different trees.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .elliptic import EllipticElement, EllipticInvariants, wp_series
from .opalg import DiffOp, EllipticRing, SeriesRing

PARAMS = ("m", "g2", "g3")


class ParseError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnboundParameter(ParseError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unbound parameter {name!r}", offset)
        self.name = name


class LoweringError(ValueError):
    pass


# --------------------------------------------------------------------------
# Tree
# --------------------------------------------------------------------------
@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: object


@dataclass(frozen=True)
class Add:
    left: object
    right: object


@dataclass(frozen=True)
class Sub:
    left: object
    right: object


@dataclass(frozen=True)
class Mul:
    left: object
    right: object


@dataclass(frozen=True)
class Pow:
    base: object
    exp: int


OperatorExpr = object  # any of the node classes above

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:/\d+)?)
  | (?P<cmwp>wp'?_\d\d)
  | (?P<wpd>wp')
  | (?P<name>[A-Za-z][A-Za-z0-9]*)
  | (?P<op>[-+*^()])
""", re.VERBOSE)


def _tokenize(src: str):
    pos = 0
    out = []
    while pos < len(src):
        mt = _TOKEN.match(src, pos)
        if mt is None:
            raise ParseError(f"unexpected character {src[pos]!r}", pos)
        kind = mt.lastgroup
        if kind != "ws":
            out.append((kind, mt.group(), pos))
        pos = mt.end()
    out.append(("end", "", len(src)))
    return out


_ATOMS = {"u", "wp", "D"}


class _Parser:
    def __init__(self, src, params, symbols):
        self.toks = _tokenize(src)
        self.i = 0
        self.params = params
        self.symbols = set(symbols)

    def peek(self):
        return self.toks[self.i]

    def take(self, text=None):
        tok = self.toks[self.i]
        if text is not None and tok[1] != text:
            raise ParseError(f"expected {text!r}, found {tok[1] or 'end of input'!r}", tok[2])
        self.i += 1
        return tok

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] == "*":
            self.take()
            node = Mul(node, self.unary())
        return node

    def unary(self):
        if self.peek()[1] == "-":
            self.take()
            arg = self.unary()
            if isinstance(arg, Num):
                return Num(-arg.value)
            return Neg(arg)
        return self.factor()

    def factor(self):
        node = self.atom()
        if self.peek()[1] == "^":
            self.take()
            kind, text, pos = self.take()
            if kind != "num" or "/" in text:
                raise ParseError("exponent must be a nonnegative integer", pos)
            node = Pow(node, int(text))
        return node

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return Num(Fraction(text))
        if kind in ("cmwp", "wpd"):
            return Sym(text)
        if kind == "name":
            if text in _ATOMS or re.fullmatch(r"d\d+", text):
                return Sym(text)
            if text in PARAMS or text in self.symbols:
                if text in self.symbols:
                    return Sym(text)
                if text not in self.params:
                    raise UnboundParameter(text, pos)
                return Num(Fraction(self.params[text]))
            raise ParseError(f"unknown name {text!r}", pos)
        if text == "(":
            node = self.expr()
            self.take(")")
            return node
        raise ParseError(f"unexpected {text or 'end of input'!r}", pos)


def parse_operator(src: str, params: dict | None = None, symbols=()) -> OperatorExpr:
    """Parse ``src``; ``params`` maps ``m``/``g2``/``g3`` to rationals."""
    p = _Parser(src, {k: Fraction(v) for k, v in (params or {}).items()}, symbols)
    node = p.expr()
    kind, text, pos = p.peek()
    if kind != "end":
        raise ParseError(f"unexpected {text!r}", pos)
    return node


# --------------------------------------------------------------------------
# Printing
# --------------------------------------------------------------------------
_SUM, _PROD, _UNARY, _POW, _ATOM = 1, 2, 3, 4, 5


def _level(node) -> int:
    if isinstance(node, (Add, Sub)):
        return _SUM
    if isinstance(node, Mul):
        return _PROD
    if isinstance(node, Neg):
        return _UNARY
    if isinstance(node, Num):
        if node.value < 0:
            return _UNARY
        return _ATOM if node.value.denominator == 1 else _POW
    if isinstance(node, Pow):
        return _POW
    return _ATOM


def _wrap(node, need: int) -> str:
    text = to_source(node)
    return f"({text})" if _level(node) < need else text


def to_source(node) -> str:
    """Print a tree so that parsing the output gives the same tree."""
    if isinstance(node, Num):
        return str(node.value)
    if isinstance(node, Sym):
        return node.name
    if isinstance(node, Neg):
        return "-" + _wrap(node.arg, _UNARY)
    if isinstance(node, Add):
        return f"{_wrap(node.left, _SUM)} + {_wrap(node.right, _PROD)}"
    if isinstance(node, Sub):
        return f"{_wrap(node.left, _SUM)} - {_wrap(node.right, _PROD)}"
    if isinstance(node, Mul):
        return f"{_wrap(node.left, _PROD)}*{_wrap(node.right, _UNARY)}"
    if isinstance(node, Pow):
        return f"{_wrap(node.base, _ATOM)}^{node.exp}"
    raise TypeError(f"not an expression node: {node!r}")


# --------------------------------------------------------------------------
# Lowering
# --------------------------------------------------------------------------
def _fold(node, leaf, add, sub, mul, neg, power):
    def go(n):
        if isinstance(n, (Num, Sym)):
            return leaf(n)
        if isinstance(n, Neg):
            return neg(go(n.arg))
        if isinstance(n, Add):
            return add(go(n.left), go(n.right))
        if isinstance(n, Sub):
            return sub(go(n.left), go(n.right))
        if isinstance(n, Mul):
            return mul(go(n.left), go(n.right))
        if isinstance(n, Pow):
            return power(go(n.base), n.exp)
        raise TypeError(f"not an expression node: {n!r}")

    return go(node)


def lower_diffop(node, ring) -> DiffOp:
    """Lower to a :class:`DiffOp` over an :class:`EllipticRing` or :class:`SeriesRing`."""

    def leaf(n):
        if isinstance(n, Num):
            return DiffOp.mult(ring, ring.const(n.value))
        name = n.name
        if name == "D":
            return DiffOp.D(ring)
        if isinstance(ring, EllipticRing):
            if name == "wp":
                return DiffOp.mult(ring, ring.p())
            if name == "wp'":
                return DiffOp.mult(ring, ring.dp())
            raise LoweringError(f"{name!r} has no meaning over Q[wp, wp']")
        if name == "u":
            return DiffOp.mult(ring, ring.u())
        raise LoweringError(f"{name!r} has no meaning over the series ring")

    return _fold(node, leaf, lambda a, b: a + b, lambda a, b: a - b, lambda a, b: a * b,
                 lambda a: -a, lambda a, k: a ** k)


def lower_series_ring(node, trunc: int | None = None, inv: EllipticInvariants | None = None) -> DiffOp:
    """Lower over truncated Laurent series; ``wp`` is allowed when ``inv`` is given."""
    ring = SeriesRing(trunc or 0)

    def leaf(n):
        if isinstance(n, Num):
            return DiffOp.mult(ring, ring.const(n.value))
        if n.name == "D":
            return DiffOp.D(ring)
        if n.name == "u":
            return DiffOp.mult(ring, ring.u())
        if n.name in ("wp", "wp'") and inv is not None:
            s = wp_series(inv, ring.trunc)
            return DiffOp.mult(ring, s if n.name == "wp" else s.derive())
        raise LoweringError(f"{n.name!r} has no meaning over the series ring")

    return _fold(node, leaf, lambda a, b: a + b, lambda a, b: a - b, lambda a, b: a * b,
                 lambda a: -a, lambda a, k: a ** k)


def lower_element(node, inv: EllipticInvariants) -> EllipticElement:
    """Lower a derivative-free expression to an element of ``Q[p, p']``."""
    op = lower_diffop(node, EllipticRing(inv))
    if op.order is not None and op.order > 0:
        raise LoweringError("expression contains D; it is not a ring element")
    return op.coeff(0)


def lower_cm(node, n: int):
    """Lower to a :class:`qcis.cm.CMOperator` in ``n`` variables.

    Atoms: ``d<i>`` (partial derivative), ``wp_ij`` / ``wp'_ij`` and
    symbolic ``g2``/``g3``.
    """
    from .cm import G2, G3, CMOperator

    def leaf(x):
        if isinstance(x, Num):
            return CMOperator.const(n, x.value)
        name = x.name
        mt = re.fullmatch(r"d(\d+)", name)
        if mt:
            i = int(mt.group(1))
            if not 1 <= i <= n:
                raise LoweringError(f"{name} out of range for n = {n}")
            return CMOperator.partial(n, i)
        mt = re.fullmatch(r"wp('?)_(\d)(\d)", name)
        if mt:
            i, j = int(mt.group(2)), int(mt.group(3))
            if not (1 <= i <= n and 1 <= j <= n) or i == j:
                raise LoweringError(f"{name} needs distinct indices in 1..{n}")
            return CMOperator.wp(n, i, j, 1 if mt.group(1) else 0)
        if name in ("g2", "g3"):
            return CMOperator(n, {((0,) * n, (((G2 if name == "g2" else G3), 1),)): 1})
        raise LoweringError(f"{name!r} has no meaning for Calogero-Moser operators")

    return _fold(node, leaf, lambda a, b: a + b, lambda a, b: a - b, lambda a, b: a * b,
                 lambda a: -a, lambda a, k: a ** k)
