"""Arithmetic expression language for problem definition files.

Coefficient functions, deviated arguments, history/terminal data and
right-hand sides are written as small formulas over the time variable ``t``
and (where allowed) placeholders ``u[k][j]`` standing for the j-th deviated
evaluation of component k. Restricting right-hand sides to finite sums of
time coefficients times continuous functions of the placeholders keeps every
superposition the solver ever integrates locally integrable by construction.

Grammar (EBNF, whitespace insignificant)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = "-" unary | power ;
    power   = atom [ "^" unary ] ;              (* right associative *)
    atom    = NUMBER | "t" | placeholder | call | "(" expr ")" ;
    placeholder = "u" "[" INT "]" "[" INT "]" ;
    call    = FUNC "(" expr { "," expr } ")" ;
    FUNC    = "sin" | "cos" | "exp" | "log" | "abs" | "sqrt" | "min" | "max" ;
    NUMBER  = decimal literal, optional exponent part ;

``^`` binds tighter than unary minus, so ``-2^2 = -(2^2) = -4``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import reduce
from typing import Optional, Union

import numpy as np

__all__ = [
    "ExprError",
    "ParseError",
    "PlaceholderOutOfRange",
    "PlaceholderForbidden",
    "EvalError",
    "NotPolynomial",
    "Num",
    "TimeVar",
    "Placeholder",
    "Neg",
    "BinOp",
    "Call",
    "Expr",
    "parse",
    "eval_expr",
    "to_source",
    "contains_placeholder",
    "affine_coefficients",
    "auto_majorant",
    "to_polynomial",
    "FUNCTIONS",
]

FUNCTIONS = {
    "sin": 1, "cos": 1, "exp": 1, "log": 1,
    "abs": 1, "sqrt": 1, "min": 2, "max": 2,
}


class ExprError(Exception):
    """Base error for the expression language."""


def _line_col(src: str, pos: int) -> tuple[int, int]:
    line = src.count("\n", 0, pos) + 1
    last = src.rfind("\n", 0, pos)
    return line, pos - last


class ParseError(ExprError):
    """Syntax error with byte offset, expected-token set and found token."""

    def __init__(self, src: str, pos: int, expected: tuple[str, ...],
                 found: str):
        self.offset = pos
        self.expected = expected
        self.found = found
        self.line, self.column = _line_col(src, pos)
        want = " or ".join(expected)
        super().__init__(
            f"{self.line}:{self.column}: expected {want}, found {found}"
        )


class PlaceholderOutOfRange(ExprError):
    def __init__(self, src: str, pos: int, k: int, j: int, n: int, N: int):
        line, col = _line_col(src, pos)
        self.offset = pos
        super().__init__(
            f"{line}:{col}: placeholder u[{k}][{j}] outside declared "
            f"ranges 1..{n} x 1..{N}"
        )


class PlaceholderForbidden(ExprError):
    def __init__(self, src: str, pos: int):
        line, col = _line_col(src, pos)
        self.offset = pos
        super().__init__(
            f"{line}:{col}: placeholders are not allowed in this context "
            f"(deviations, history/terminal data and majorants depend on t only)"
        )


class EvalError(ExprError):
    """Domain fault during evaluation (division by zero, log of <= 0, ...)."""

    def __init__(self, msg: str, pos: int = -1):
        self.offset = pos
        super().__init__(msg if pos < 0 else f"at offset {pos}: {msg}")


class NotPolynomial(ExprError):
    """Expression is not convertible to a polynomial in t."""


@dataclass(frozen=True)
class Num:
    value: float
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class TimeVar:
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Placeholder:
    k: int
    j: int
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    pos: int = field(default=-1, compare=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple["Expr", ...]
    pos: int = field(default=-1, compare=False)


Expr = Union[Num, TimeVar, Placeholder, Neg, BinOp, Call]


_TOKEN_RE = re.compile(
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()\[\],])"
    r"|(?P<bad>\S)"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "num" | "name" | "op" | "end"
    text: str
    pos: int


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    for m in _TOKEN_RE.finditer(src):
        kind = m.lastgroup
        if kind == "bad":
            raise ParseError(src, m.start(), ("a token",),
                             repr(m.group()))
        tokens.append(_Token(kind, m.group(), m.start()))
    tokens.append(_Token("end", "end of input", len(src)))
    return tokens


class _Parser:
    def __init__(self, src: str, n: int, N: int, allow_placeholders: bool):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0
        self.n = n
        self.N = N
        self.allow_placeholders = allow_placeholders

    @property
    def cur(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.cur
        self.i += 1
        return tok

    def expect_op(self, op: str) -> _Token:
        if self.cur.kind == "op" and self.cur.text == op:
            return self.advance()
        raise ParseError(self.src, self.cur.pos, (repr(op),),
                         repr(self.cur.text))

    def parse(self) -> Expr:
        e = self.expr()
        if self.cur.kind != "end":
            raise ParseError(self.src, self.cur.pos,
                             ("an operator", "end of input"),
                             repr(self.cur.text))
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.cur.kind == "op" and self.cur.text in "+-":
            op = self.advance()
            left = BinOp(op.text, left, self.term(), pos=op.pos)
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.cur.kind == "op" and self.cur.text in "*/":
            op = self.advance()
            left = BinOp(op.text, left, self.unary(), pos=op.pos)
        return left

    def unary(self) -> Expr:
        if self.cur.kind == "op" and self.cur.text == "-":
            tok = self.advance()
            return Neg(self.unary(), pos=tok.pos)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.cur.kind == "op" and self.cur.text == "^":
            op = self.advance()
            # right associative; exponent may carry its own unary minus
            return BinOp("^", base, self.unary(), pos=op.pos)
        return base

    def atom(self) -> Expr:
        tok = self.cur
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text), pos=tok.pos)
        if tok.kind == "name":
            if tok.text == "t":
                self.advance()
                return TimeVar(pos=tok.pos)
            if tok.text == "u":
                return self.placeholder()
            if tok.text in FUNCTIONS:
                return self.call()
            raise ParseError(self.src, tok.pos,
                             ("'t'", "'u[k][j]'", "a function name"),
                             repr(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise ParseError(self.src, tok.pos,
                         ("a number", "'t'", "'u[k][j]'", "'('"),
                         repr(tok.text))

    def placeholder(self) -> Expr:
        tok = self.advance()  # 'u'
        if not self.allow_placeholders:
            raise PlaceholderForbidden(self.src, tok.pos)
        self.expect_op("[")
        k = self.index_literal()
        self.expect_op("]")
        self.expect_op("[")
        j = self.index_literal()
        self.expect_op("]")
        if not (1 <= k <= self.n and 1 <= j <= self.N):
            raise PlaceholderOutOfRange(self.src, tok.pos, k, j, self.n, self.N)
        return Placeholder(k, j, pos=tok.pos)

    def index_literal(self) -> int:
        tok = self.cur
        if tok.kind == "num" and re.fullmatch(r"\d+", tok.text):
            self.advance()
            return int(tok.text)
        raise ParseError(self.src, tok.pos, ("an integer index",),
                         repr(tok.text))

    def call(self) -> Expr:
        name = self.advance()
        arity = FUNCTIONS[name.text]
        self.expect_op("(")
        args = [self.expr()]
        while self.cur.kind == "op" and self.cur.text == ",":
            self.advance()
            args.append(self.expr())
        self.expect_op(")")
        if len(args) != arity:
            raise ParseError(
                self.src, name.pos,
                (f"{arity} argument(s) to {name.text}",),
                f"{len(args)} argument(s)",
            )
        return Call(name.text, tuple(args), pos=name.pos)


def parse(src: str, n: int = 0, N: int = 0,
          allow_placeholders: bool = False) -> Expr:
    """Parse a formula, validating placeholder indices against (n, N)."""
    return _Parser(src, n, N, allow_placeholders).parse()


def eval_expr(e: Expr, t: float, u=None) -> float:
    """Evaluate with time value ``t`` and optional placeholder matrix ``u``.

    ``u`` must be indexable as ``u[k-1][j-1]`` and is required exactly when
    the expression contains placeholders. Domain faults raise
    :class:`EvalError` carrying the source offset of the failing node.
    """
    if isinstance(e, Num):
        return e.value
    if isinstance(e, TimeVar):
        return float(t)
    if isinstance(e, Placeholder):
        if u is None:
            raise EvalError(f"placeholder u[{e.k}][{e.j}] has no value", e.pos)
        return float(u[e.k - 1][e.j - 1])
    if isinstance(e, Neg):
        return -eval_expr(e.operand, t, u)
    if isinstance(e, BinOp):
        a = eval_expr(e.left, t, u)
        b = eval_expr(e.right, t, u)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b == 0.0:
                raise EvalError("division by zero", e.pos)
            return a / b
        if e.op == "^":
            try:
                r = a ** b
            except (OverflowError, ZeroDivisionError, ValueError) as exc:
                raise EvalError(f"invalid power {a}^{b}: {exc}", e.pos) from None
            if isinstance(r, complex):
                raise EvalError(f"invalid power {a}^{b}: complex result", e.pos)
            return r
        raise EvalError(f"unknown operator {e.op!r}", e.pos)
    if isinstance(e, Call):
        args = [eval_expr(a, t, u) for a in e.args]
        try:
            if e.name == "sin":
                return math.sin(args[0])
            if e.name == "cos":
                return math.cos(args[0])
            if e.name == "exp":
                return math.exp(args[0])
            if e.name == "log":
                if args[0] <= 0.0:
                    raise EvalError(f"log of non-positive value {args[0]}",
                                    e.pos)
                return math.log(args[0])
            if e.name == "abs":
                return abs(args[0])
            if e.name == "sqrt":
                if args[0] < 0.0:
                    raise EvalError(f"sqrt of negative value {args[0]}", e.pos)
                return math.sqrt(args[0])
            if e.name == "min":
                return min(args)
            if e.name == "max":
                return max(args)
        except OverflowError as exc:
            raise EvalError(f"{e.name} overflow: {exc}", e.pos) from None
        raise EvalError(f"unknown function {e.name!r}", e.pos)
    raise TypeError(f"not an expression node: {e!r}")


# precedence levels for the printer; mirrors the grammar
_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        if e.op in "+-":
            return _PREC_ADD
        if e.op in "*/":
            return _PREC_MUL
        return _PREC_POW
    if isinstance(e, Neg):
        return _PREC_UNARY
    return _PREC_ATOM


def to_source(e: Expr) -> str:
    """Render to a formula that parses back to the same tree.

    Exact for parser-producible trees; hand-built literals with negative
    values render with a leading minus, which reparses as a negation node.
    """
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, TimeVar):
        return "t"
    if isinstance(e, Placeholder):
        return f"u[{e.k}][{e.j}]"
    if isinstance(e, Neg):
        inner = to_source(e.operand)
        if _prec(e.operand) < _PREC_UNARY:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, BinOp):
        lp, rp = _prec(e.left), _prec(e.right)
        left, right = to_source(e.left), to_source(e.right)
        if e.op == "^":
            # right associative; the exponent slot accepts a whole unary,
            # so only +,-,*,/ children need parentheses there
            if lp <= _PREC_POW:
                left = f"({left})"
            if rp < _PREC_UNARY:
                right = f"({right})"
            return f"{left}^{right}"
        mine = _prec(e)
        if lp < mine:
            left = f"({left})"
        if rp <= mine:
            # equal precedence on the right must be bracketed to keep the
            # left-associative tree shape through a reparse
            right = f"({right})"
        return f"{left} {e.op} {right}"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(to_source(a) for a in e.args)})"
    raise TypeError(f"not an expression node: {e!r}")


def contains_placeholder(e: Expr) -> bool:
    if isinstance(e, Placeholder):
        return True
    if isinstance(e, Neg):
        return contains_placeholder(e.operand)
    if isinstance(e, BinOp):
        return contains_placeholder(e.left) or contains_placeholder(e.right)
    if isinstance(e, Call):
        return any(contains_placeholder(a) for a in e.args)
    return False


def _merge(op: str, a: Optional[Expr], b: Optional[Expr]) -> Optional[Expr]:
    if a is None and b is None:
        return None
    if a is None:
        return Neg(b) if op == "-" else b
    if b is None:
        return a
    return BinOp(op, a, b)


def affine_coefficients(e: Expr):
    """Decompose an expression affine in its placeholders.

    Returns ``(coeffs, const)`` where ``coeffs`` maps ``(k, j)`` to the
    coefficient expression of ``u[k][j]`` and ``const`` is the
    placeholder-free remainder (or None). Returns None when the expression is
    not recognizably affine: a placeholder inside a function call or power, a
    placeholder times a placeholder, or a placeholder in a denominator.
    """
    if not contains_placeholder(e):
        return {}, e
    if isinstance(e, Placeholder):
        return {(e.k, e.j): Num(1.0)}, None
    if isinstance(e, Neg):
        d = affine_coefficients(e.operand)
        if d is None:
            return None
        coeffs, const = d
        return ({kj: Neg(c) for kj, c in coeffs.items()},
                None if const is None else Neg(const))
    if isinstance(e, BinOp):
        if e.op in "+-":
            da = affine_coefficients(e.left)
            db = affine_coefficients(e.right)
            if da is None or db is None:
                return None
            ca, consta = da
            cb, constb = db
            merged = dict(ca)
            for kj, c in cb.items():
                merged[kj] = _merge(e.op, merged.get(kj), c)
            return merged, _merge(e.op, consta, constb)
        if e.op == "*":
            if not contains_placeholder(e.left):
                scale, d = e.left, affine_coefficients(e.right)
            elif not contains_placeholder(e.right):
                scale, d = e.right, affine_coefficients(e.left)
            else:
                return None
            if d is None:
                return None
            coeffs, const = d
            return ({kj: BinOp("*", scale, c) for kj, c in coeffs.items()},
                    None if const is None else BinOp("*", scale, const))
        if e.op == "/":
            if contains_placeholder(e.right):
                return None
            d = affine_coefficients(e.left)
            if d is None:
                return None
            coeffs, const = d
            return ({kj: BinOp("/", c, e.right) for kj, c in coeffs.items()},
                    None if const is None else BinOp("/", const, e.right))
        return None  # placeholder under ^
    return None  # placeholder inside a function call


def auto_majorant(e: Expr) -> Optional[Expr]:
    """Build a sensitivity majorant for an expression affine in placeholders.

    For ``e = sum c_kj(t) u[k][j] + c0(t)`` the result is
    ``max over (k, j) of abs(c_kj(t))``, which bounds
    ``|e(t, u) - e(t, v)|`` by ``majorant(t) * sum |u - v|``. Returns None
    when ``e`` is not recognizably affine; callers must then supply the
    majorant explicitly.
    """
    d = affine_coefficients(e)
    if d is None:
        return None
    coeffs, _ = d
    if not coeffs:
        return Num(0.0)
    parts = [Call("abs", (c,)) for _, c in sorted(coeffs.items())]
    return reduce(lambda a, b: Call("max", (a, b)), parts)


def to_polynomial(e: Expr) -> np.polynomial.Polynomial:
    """Convert a t-only expression to a polynomial, or raise NotPolynomial."""
    P = np.polynomial.Polynomial
    if isinstance(e, Num):
        return P([e.value])
    if isinstance(e, TimeVar):
        return P([0.0, 1.0])
    if isinstance(e, Placeholder):
        raise NotPolynomial("placeholders are not polynomial in t")
    if isinstance(e, Neg):
        return -to_polynomial(e.operand)
    if isinstance(e, BinOp):
        if e.op == "^":
            exp = e.right
            neg = False
            if isinstance(exp, Neg) and isinstance(exp.operand, Num):
                exp, neg = exp.operand, True
            if not isinstance(exp, Num) or exp.value != int(exp.value) or neg:
                raise NotPolynomial("exponent must be a nonnegative integer")
            return to_polynomial(e.left) ** int(exp.value)
        a = to_polynomial(e.left)
        b = to_polynomial(e.right)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if e.op == "/":
            if b.degree() > 0:
                raise NotPolynomial("division by a non-constant")
            c = b.coef[0]
            if c == 0.0:
                raise NotPolynomial("division by zero")
            return a / c
    raise NotPolynomial(f"{type(e).__name__} node is not polynomial in t")
