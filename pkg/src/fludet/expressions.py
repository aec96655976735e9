"""Arithmetic expressions for potentials and coefficient functions.

A small recursive-descent parser over +, -, *, /, ^ (integer exponents only),
parentheses and the function set sin/cos/sinh/cosh/tanh/exp/sqrt, plus exact
symbolic differentiation and IEEE-double evaluation.  Expression trees are
immutable; printing an expression and re-parsing it yields a structurally
equal tree.

Names are not split into "variables" and "parameters" at parse time: a symbol
is the differentiation variable when you differentiate with respect to it and
a bound parameter otherwise.  Evaluation requires every name to be bound.

Exponents are restricted to integer constants so that differentiation stays
total (no x^y branch cuts) and derivatives remain inside the same node set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .errors import ExpressionError

__all__ = [
    "Expr", "Num", "Sym", "Neg", "Bin", "Pow", "Call",
    "parse", "evaluate", "differentiate", "format_expr", "symbols",
    "compile_expr",
]

FUNCTIONS = ("sin", "cos", "sinh", "cosh", "tanh", "exp", "sqrt")

_MATH_FUNCS = {name: getattr(math, name) for name in FUNCTIONS}


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expr"


Expr = Union[Num, Sym, Neg, Bin, Pow, Call]


# ---------------------------------------------------------------------------
# Lexing / parsing
# ---------------------------------------------------------------------------

_TOK_NUM = "number"
_TOK_NAME = "name"
_TOK_OP = "op"
_TOK_LPAREN = "("
_TOK_RPAREN = ")"
_TOK_END = "end"


def _byte_offset(text: str, pos: int) -> int:
    return len(text[:pos].encode("utf-8"))


def _tokenize(text: str):
    toks = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*/^":
            toks.append((_TOK_OP, ch, i))
            i += 1
        elif ch == "(":
            toks.append((_TOK_LPAREN, ch, i))
            i += 1
        elif ch == ")":
            toks.append((_TOK_RPAREN, ch, i))
            i += 1
        elif ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            toks.append((_TOK_NUM, text[i:j], i))
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append((_TOK_NAME, text[i:j], i))
            i = j
        else:
            raise ExpressionError(
                f"syntax error at offset {_byte_offset(text, i)}: "
                f"unexpected character {ch!r}",
                offset=_byte_offset(text, i),
            )
    toks.append((_TOK_END, "", n))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = _tokenize(text)
        self.pos = 0

    def peek(self):
        return self.toks[self.pos]

    def advance(self):
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected: str):
        kind, text, pos = self.peek()
        shown = repr(text) if kind != _TOK_END else "end of input"
        off = _byte_offset(self.text, pos)
        raise ExpressionError(
            f"syntax error at offset {off}: expected {expected}, found {shown}",
            offset=off,
        )

    # expr := term (('+'|'-') term)*       left-associative
    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[0] == _TOK_OP and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = Bin(op, node, self.term())
        return node

    # term := unary (('*'|'/') unary)*     left-associative
    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[0] == _TOK_OP and self.peek()[1] in "*/":
            op = self.advance()[1]
            node = Bin(op, node, self.unary())
        return node

    # unary := '-' unary | power           ^ binds tighter than unary minus
    def unary(self) -> Expr:
        if self.peek()[0] == _TOK_OP and self.peek()[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    # power := atom ('^' exponent)?        exponent is an integer constant
    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == _TOK_OP and self.peek()[1] == "^":
            self.advance()
            return Pow(base, self.exponent())
        return base

    def exponent(self) -> int:
        negate = False
        if self.peek()[0] == _TOK_OP and self.peek()[1] == "-":
            self.advance()
            negate = True
        kind, text, pos = self.peek()
        if kind != _TOK_NUM or not text.isdigit():
            self.fail("an integer exponent")
        self.advance()
        value = int(text)
        return -value if negate else value

    def atom(self) -> Expr:
        kind, text, pos = self.peek()
        if kind == _TOK_NUM:
            self.advance()
            return Num(float(text))
        if kind == _TOK_NAME:
            self.advance()
            if self.peek()[0] == _TOK_LPAREN:
                if text not in _MATH_FUNCS:
                    off = _byte_offset(self.text, pos)
                    raise ExpressionError(
                        f"unknown function {text!r} at offset {off} "
                        f"(known: {', '.join(FUNCTIONS)})",
                        offset=off,
                    )
                self.advance()
                arg = self.expr()
                if self.peek()[0] != _TOK_RPAREN:
                    self.fail("')'")
                self.advance()
                return Call(text, arg)
            return Sym(text)
        if kind == _TOK_LPAREN:
            self.advance()
            node = self.expr()
            if self.peek()[0] != _TOK_RPAREN:
                self.fail("')'")
            self.advance()
            return node
        self.fail("expression")


def parse(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Standard precedence (^ > unary minus > * / > + -), '+'-family and
    '*'-family left-associative, '^' taking a single integer-constant
    exponent.  Raises ExpressionError with a byte offset on bad input.
    """
    p = _Parser(text)
    node = p.expr()
    if p.peek()[0] != _TOK_END:
        p.fail("end of input")
    return node


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def evaluate(e: Expr, bindings: Mapping[str, float]) -> float:
    """Evaluate in IEEE double precision with every symbol bound.

    Domain failures (sqrt of a negative, division by zero, overflow) raise
    ExpressionError instead of silently producing NaN/inf.
    """
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Sym):
        try:
            return float(bindings[e.name])
        except KeyError:
            raise ExpressionError(f"unbound name {e.name!r}") from None
    if isinstance(e, Neg):
        return -evaluate(e.arg, bindings)
    if isinstance(e, Bin):
        a = evaluate(e.left, bindings)
        b = evaluate(e.right, bindings)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0.0:
            raise ExpressionError("division by zero")
        return a / b
    if isinstance(e, Pow):
        base = evaluate(e.base, bindings)
        if base == 0.0 and e.exponent < 0:
            raise ExpressionError("zero raised to a negative exponent")
        try:
            return float(base ** e.exponent)
        except OverflowError:
            raise ExpressionError("overflow in integer power") from None
    if isinstance(e, Call):
        x = evaluate(e.arg, bindings)
        if e.func == "sqrt" and x < 0.0:
            raise ExpressionError(f"sqrt of negative value {x!r}")
        try:
            return _MATH_FUNCS[e.func](x)
        except (ValueError, OverflowError) as exc:
            raise ExpressionError(f"{e.func}({x!r}): {exc}") from None
    raise TypeError(f"not an expression node: {e!r}")


def symbols(e: Expr) -> set[str]:
    """All symbol names occurring in the tree."""
    if isinstance(e, Sym):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, Neg):
        return symbols(e.arg)
    if isinstance(e, Bin):
        return symbols(e.left) | symbols(e.right)
    if isinstance(e, Pow):
        return symbols(e.base)
    if isinstance(e, Call):
        return symbols(e.arg)
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# Differentiation
# ---------------------------------------------------------------------------

def _add(a: Expr, b: Expr) -> Expr:
    if a == Num(0.0):
        return b
    if b == Num(0.0):
        return a
    return Bin("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    if b == Num(0.0):
        return a
    if a == Num(0.0):
        return Neg(b)
    return Bin("-", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    if a == Num(0.0) or b == Num(0.0):
        return Num(0.0)
    if a == Num(1.0):
        return b
    if b == Num(1.0):
        return a
    return Bin("*", a, b)


def _pow(base: Expr, n: int) -> Expr:
    if n == 0:
        return Num(1.0)
    if n == 1:
        return base
    return Pow(base, n)


def differentiate(e: Expr, var: str) -> Expr:
    """Exact symbolic derivative with respect to ``var``.

    All other symbols are treated as constants.  Resulting trees are only
    trivially folded (0/1 identities), not simplified.
    """
    if isinstance(e, (Num,)):
        return Num(0.0)
    if isinstance(e, Sym):
        return Num(1.0) if e.name == var else Num(0.0)
    if isinstance(e, Neg):
        d = differentiate(e.arg, var)
        return Num(0.0) if d == Num(0.0) else Neg(d)
    if isinstance(e, Bin):
        da = differentiate(e.left, var)
        db = differentiate(e.right, var)
        if e.op == "+":
            return _add(da, db)
        if e.op == "-":
            return _sub(da, db)
        if e.op == "*":
            return _add(_mul(da, e.right), _mul(e.left, db))
        # quotient rule: (u'v - uv') / v^2
        num = _sub(_mul(da, e.right), _mul(e.left, db))
        if num == Num(0.0):
            return Num(0.0)
        return Bin("/", num, Pow(e.right, 2))
    if isinstance(e, Pow):
        du = differentiate(e.base, var)
        if du == Num(0.0) or e.exponent == 0:
            return Num(0.0)
        return _mul(_mul(Num(float(e.exponent)), _pow(e.base, e.exponent - 1)), du)
    if isinstance(e, Call):
        du = differentiate(e.arg, var)
        if du == Num(0.0):
            return Num(0.0)
        u = e.arg
        if e.func == "sin":
            outer: Expr = Call("cos", u)
        elif e.func == "cos":
            outer = Neg(Call("sin", u))
        elif e.func == "sinh":
            outer = Call("cosh", u)
        elif e.func == "cosh":
            outer = Call("sinh", u)
        elif e.func == "tanh":
            outer = _sub(Num(1.0), Pow(Call("tanh", u), 2))
        elif e.func == "exp":
            outer = Call("exp", u)
        elif e.func == "sqrt":
            # u' / (2 sqrt(u))
            return Bin("/", du, _mul(Num(2.0), Call("sqrt", u)))
        else:  # pragma: no cover - parser rejects unknown functions
            raise ExpressionError(f"unknown function {e.func!r}")
        return _mul(outer, du)
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------

_PREC_ADD = 1
_PREC_MUL = 2
_PREC_NEG = 3
_PREC_POW = 4
_PREC_ATOM = 5


def _prec(e: Expr) -> int:
    if isinstance(e, Bin):
        return _PREC_ADD if e.op in "+-" else _PREC_MUL
    if isinstance(e, Neg):
        return _PREC_NEG
    if isinstance(e, Pow):
        return _PREC_POW
    return _PREC_ATOM


def format_expr(e: Expr) -> str:
    """Render the tree so that parse(format_expr(e)) == e."""
    if isinstance(e, Num):
        return repr(e.value) if e.value >= 0 else f"({e.value!r})"
    if isinstance(e, Sym):
        return e.name
    if isinstance(e, Neg):
        inner = format_expr(e.arg)
        if _prec(e.arg) < _PREC_NEG:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Bin):
        mine = _prec(e)
        left = format_expr(e.left)
        if _prec(e.left) < mine:
            left = f"({left})"
        right = format_expr(e.right)
        # left-associative: right child of equal precedence needs parens
        if _prec(e.right) < mine or (_prec(e.right) == mine and e.op in "-/"):
            right = f"({right})"
        if e.op in "+-" and isinstance(e.right, Neg):
            right = f"({right})"
        return f"{left} {e.op} {right}"
    if isinstance(e, Pow):
        base = format_expr(e.base)
        if _prec(e.base) < _PREC_ATOM or (isinstance(e.base, Num) and e.base.value < 0):
            base = f"({base})"
        return f"{base}^{e.exponent}"
    if isinstance(e, Call):
        return f"{e.func}({format_expr(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


# ---------------------------------------------------------------------------
# Compilation to a numpy-aware callable
# ---------------------------------------------------------------------------

def compile_expr(e: Expr, names: tuple[str, ...]):
    """Compile to ``f(*arrays) -> array`` over numpy for fast grid evaluation.

    Unlike :func:`evaluate` this path follows numpy semantics (sqrt of a
    negative yields NaN); callers that evaluate on grids must check
    finiteness of the result.
    """
    missing = symbols(e) - set(names)
    if missing:
        raise ExpressionError(f"unbound names {sorted(missing)!r}")
    index = {n: i for i, n in enumerate(names)}

    def build(node: Expr):
        if isinstance(node, Num):
            v = node.value
            return lambda a: v
        if isinstance(node, Sym):
            i = index[node.name]
            return lambda a: a[i]
        if isinstance(node, Neg):
            f = build(node.arg)
            return lambda a: -f(a)
        if isinstance(node, Bin):
            fl, fr = build(node.left), build(node.right)
            if node.op == "+":
                return lambda a: fl(a) + fr(a)
            if node.op == "-":
                return lambda a: fl(a) - fr(a)
            if node.op == "*":
                return lambda a: fl(a) * fr(a)
            return lambda a: fl(a) / fr(a)
        if isinstance(node, Pow):
            f, n = build(node.base), node.exponent
            if n < 0:
                return lambda a: f(a) ** float(n)
            return lambda a: f(a) ** n
        if isinstance(node, Call):
            f, ufunc = build(node.arg), getattr(np, node.func)
            return lambda a: ufunc(f(a))
        raise TypeError(f"not an expression node: {node!r}")

    g = build(e)
    return lambda *args: g(args)
