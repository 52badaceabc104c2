"""A small expression language in x and y with exact second-order jets.

Grammar, loosest binding first::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' unary)?        # right-associative, constant exponent
    atom    := NUMBER | VAR | FN '(' expr ')' | '(' expr ')'

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``. Exponents
must fold to a numeric constant. Derivatives come from forward-mode AD on
:class:`Taylor2`, which carries partials through order two.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import DomainFault, ExprSyntaxError, UnknownFunction, UnknownVariable
from .field import Jet2, ScalarField, Window

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh")
VARIABLES = ("x", "y")


# ---------------------------------------------------------------------------
# AST

class Node:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class Add(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Sub(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Mul(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Div(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: float


@dataclass(frozen=True)
class Call(Node):
    fn: str
    arg: Node


# ---------------------------------------------------------------------------
# lexing and parsing

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num | name | op | end
    text: str
    offset: int  # byte offset into the UTF-8 source


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        byte_off = len(text[:pos].encode("utf-8"))
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", byte_off)
        if m.lastgroup != "ws":
            toks.append(_Tok(m.lastgroup, m.group(), byte_off))
        pos = m.end()
    toks.append(_Tok("end", "", len(text.encode("utf-8"))))
    return toks


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text):
        if self.tok.text != text:
            raise self.unexpected(f"expected {text!r}")
        return self.advance()

    def unexpected(self, what=None):
        t = self.tok
        shown = "end of input" if t.kind == "end" else repr(t.text)
        msg = f"unexpected {shown}" + (f", {what}" if what else "")
        return ExprSyntaxError(msg, t.offset)

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            raise self.unexpected()
        return node

    def expr(self):
        node = self.term()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.advance().text
            right = self.term()
            node = Add(node, right) if op == "+" else Sub(node, right)
        return node

    def term(self):
        node = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.advance().text
            right = self.unary()
            node = Mul(node, right) if op == "*" else Div(node, right)
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            at = self.advance().offset
            exponent = self.unary()
            try:
                value = _fold_constant(exponent)
            except (ValueError, ArithmeticError):
                raise ExprSyntaxError("exponent must fold to a numeric constant", at) from None
            return Pow(base, value)
        return base

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Const(float(t.text))
        if t.kind == "name":
            self.advance()
            if self.tok.kind == "op" and self.tok.text == "(":
                if t.text not in FUNCTIONS:
                    raise UnknownFunction(f"unknown function {t.text!r}", t.offset)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Call(t.text, arg)
            if t.text not in VARIABLES:
                raise UnknownVariable(f"unknown variable {t.text!r}", t.offset)
            return Var(t.text)
        if t.kind == "op" and t.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        raise self.unexpected()


def _fold_constant(node: Node) -> float:
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        raise ValueError("variable in constant expression")
    if isinstance(node, Neg):
        return -_fold_constant(node.arg)
    if isinstance(node, Pow):
        return math.pow(_fold_constant(node.base), node.exponent)
    if isinstance(node, Call):
        return getattr(math, node.fn)(_fold_constant(node.arg))
    ops = {Add: lambda a, b: a + b, Sub: lambda a, b: a - b,
           Mul: lambda a, b: a * b, Div: lambda a, b: a / b}
    return ops[type(node)](_fold_constant(node.left), _fold_constant(node.right))


def parse(text: str) -> Node:
    """Parse expression text into an AST (see module docstring for grammar)."""
    if not text or not text.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(text).parse()


# ---------------------------------------------------------------------------
# pretty printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        s = str(int(v))
    else:
        s = repr(v)
    return f"({s})" if v < 0 or s.startswith("-") else s


def pretty(node: Node) -> str:
    """Render with the fewest parentheses that still reparse to ``node``."""
    return _pretty(node, 0)


def _pretty(node, min_prec):
    if isinstance(node, Const):
        return _fmt_number(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Call):
        return f"{node.fn}({_pretty(node.arg, 0)})"
    prec = _PREC[type(node)]
    if isinstance(node, Neg):
        s = "-" + _pretty(node.arg, prec)
    elif isinstance(node, Pow):
        e = node.exponent
        es = str(int(e)) if e.is_integer() and abs(e) < 1e15 else repr(e)
        s = f"{_pretty(node.base, prec + 1)}^{es}"
    else:
        sym = {Add: "+", Sub: "-", Mul: "*", Div: "/"}[type(node)]
        s = f"{_pretty(node.left, prec)} {sym} {_pretty(node.right, prec + 1)}"
    return f"({s})" if prec < min_prec else s


# ---------------------------------------------------------------------------
# second-order forward-mode AD

class Taylor2:
    """Value and partials through order two; components may be numpy arrays."""

    __slots__ = ("v", "dx", "dy", "dxx", "dxy", "dyy")

    def __init__(self, v, dx=0.0, dy=0.0, dxx=0.0, dxy=0.0, dyy=0.0):
        self.v = v
        self.dx = dx
        self.dy = dy
        self.dxx = dxx
        self.dxy = dxy
        self.dyy = dyy

    @classmethod
    def variable(cls, value, which: str) -> Taylor2:
        one, zero = np.ones_like(value), np.zeros_like(value)
        if which == "x":
            return cls(value, one, zero, zero, zero, zero)
        return cls(value, zero, one, zero, zero, zero)

    @staticmethod
    def _lift(other):
        return other if isinstance(other, Taylor2) else Taylor2(other)

    def __add__(self, other):
        o = self._lift(other)
        return Taylor2(self.v + o.v, self.dx + o.dx, self.dy + o.dy,
                       self.dxx + o.dxx, self.dxy + o.dxy, self.dyy + o.dyy)

    __radd__ = __add__

    def __neg__(self):
        return Taylor2(-self.v, -self.dx, -self.dy, -self.dxx, -self.dxy, -self.dyy)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) - self

    def __mul__(self, other):
        o = self._lift(other)
        return Taylor2(
            self.v * o.v,
            self.dx * o.v + self.v * o.dx,
            self.dy * o.v + self.v * o.dy,
            self.dxx * o.v + 2 * self.dx * o.dx + self.v * o.dxx,
            self.dxy * o.v + self.dx * o.dy + self.dy * o.dx + self.v * o.dxy,
            self.dyy * o.v + 2 * self.dy * o.dy + self.v * o.dyy,
        )

    __rmul__ = __mul__

    def reciprocal(self):
        inv = 1.0 / self.v
        return self.chain(inv, -inv * inv, 2 * inv * inv * inv)

    def __truediv__(self, other):
        return self * self._lift(other).reciprocal()

    def __rtruediv__(self, other):
        return self._lift(other) * self.reciprocal()

    def chain(self, f0, f1, f2) -> Taylor2:
        """Compose with a scalar function g given g, g', g'' at ``self.v``."""
        return Taylor2(
            f0,
            f1 * self.dx,
            f1 * self.dy,
            f2 * self.dx * self.dx + f1 * self.dxx,
            f2 * self.dx * self.dy + f1 * self.dxy,
            f2 * self.dy * self.dy + f1 * self.dyy,
        )

    def ipow(self, n: int) -> Taylor2:
        """Non-negative integer power by repeated multiplication."""
        result = Taylor2(np.ones_like(self.v) if isinstance(self.v, np.ndarray) else 1.0)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def to_jet(self) -> Jet2:
        return Jet2(self.v, self.dx, self.dy, self.dxx, self.dxy, self.dyy)


def _unary_rules(fn, v):
    if fn == "sin":
        s, c = np.sin(v), np.cos(v)
        return s, c, -s
    if fn == "cos":
        s, c = np.sin(v), np.cos(v)
        return c, -s, -c
    if fn == "exp":
        e = np.exp(v)
        return e, e, e
    if fn == "log":
        return np.log(v), 1.0 / v, -1.0 / (v * v)
    if fn == "sqrt":
        r = np.sqrt(v)
        return r, 0.5 / r, -0.25 / (r * v)
    if fn == "tanh":
        t = np.tanh(v)
        sech2 = 1.0 - t * t
        return t, sech2, -2.0 * t * sech2
    raise UnknownFunction(f"unknown function {fn!r}", 0)


class _Evaluator:
    """Walks an AST over coordinate arrays, checking domains as it goes."""

    def __init__(self, x, y, jets: bool):
        self.x = x
        self.y = y
        self.jets = jets

    def fault(self, node, bad, what):
        i = int(np.flatnonzero(np.ravel(bad))[0])
        point = (float(np.ravel(self.x)[i]), float(np.ravel(self.y)[i]))
        raise DomainFault(what, pretty(node), point)

    def check(self, node, bad, what):
        if np.any(bad):
            self.fault(node, bad, what)

    def value_of(self, t):
        return t.v if self.jets else t

    def lift(self, c):
        if self.jets:
            return Taylor2(np.full_like(self.x, c), *(np.zeros_like(self.x),) * 5)
        return np.full_like(self.x, c)

    def ev(self, node):
        if isinstance(node, Const):
            return self.lift(node.value)
        if isinstance(node, Var):
            val = self.x if node.name == "x" else self.y
            return Taylor2.variable(val, node.name) if self.jets else val
        if isinstance(node, Neg):
            return -self.ev(node.arg)
        if isinstance(node, (Add, Sub, Mul)):
            a, b = self.ev(node.left), self.ev(node.right)
            if isinstance(node, Add):
                return a + b
            return a - b if isinstance(node, Sub) else a * b
        if isinstance(node, Div):
            a, b = self.ev(node.left), self.ev(node.right)
            self.check(node, self.value_of(b) == 0, "division by zero")
            return a / b
        if isinstance(node, Pow):
            return self.power(node)
        if isinstance(node, Call):
            u = self.ev(node.arg)
            v = self.value_of(u)
            if node.fn == "log":
                self.check(node, ~(v > 0), "log of a non-positive value")
            elif node.fn == "sqrt":
                self.check(node, ~(v > 0), "sqrt is not twice differentiable at or below 0")
            f0, f1, f2 = _unary_rules(node.fn, v)
            return u.chain(f0, f1, f2) if self.jets else f0
        raise TypeError(f"not an expression node: {node!r}")

    def power(self, node: Pow):
        u = self.ev(node.base)
        v = self.value_of(u)
        p = node.exponent
        if p.is_integer() and abs(p) <= 1024:
            n = int(p)
            if n < 0:
                self.check(node, v == 0, "negative power of zero")
            if self.jets:
                r = u.ipow(abs(n))
                return r.reciprocal() if n < 0 else r
            r = Taylor2(v).ipow(abs(n)).v
            return 1.0 / r if n < 0 else r
        self.check(node, ~(v > 0), "non-integer power of a non-positive base")
        f0 = v ** p
        if not self.jets:
            return f0
        return u.chain(f0, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))


def _evaluate(ast: Node, x, y, jets: bool):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ev = _Evaluator(x, y, jets)
    with np.errstate(all="ignore"):
        out = ev.ev(ast)
        parts = (out.v, out.dx, out.dy, out.dxx, out.dxy, out.dyy) if jets else (out,)
        parts = tuple(np.broadcast_to(np.asarray(c, dtype=float), x.shape) for c in parts)
    bad = np.zeros(x.shape, dtype=bool)
    for c in parts:
        bad |= ~np.isfinite(c)
    if np.any(bad):
        ev.fault(ast, bad, "non-finite result")
    return parts


def eval_taylor2(ast: Node, p) -> Jet2:
    """Exact value, gradient and Hessian of ``ast`` at point ``p``."""
    px, py = (float(c) for c in p)
    parts = _evaluate(ast, np.array([px]), np.array([py]), jets=True)
    return Jet2(*(float(c[0]) for c in parts))


class ExprField(ScalarField):
    def __init__(self, ast: Node, window: Window):
        self.ast = ast
        self.window = window
        self.description = pretty(ast)

    def jets(self, x, y) -> Jet2:
        return Jet2(*_evaluate(self.ast, x, y, jets=True))

    def values(self, x, y):
        return _evaluate(self.ast, x, y, jets=False)[0]


def compile_field(ast: Node, window: Window) -> ExprField:
    return ExprField(ast, window)


def field_from_text(text: str, window: Window | None = None) -> ExprField:
    return compile_field(parse(text), window or Window.square(3.0))
