"""Holomorphic expression language: parser, canonical printer, AST transforms.

Grammar (one free variable ``z``)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' ['+' | '-'] INT | '^' '(' ['+' | '-'] INT ')')*
    atom   := REAL | IMAG | 'i' | 'z' | FUNC '(' expr ')' | '(' expr ')'
            | '(' REAL ('+' | '-') IMAG ')'         # complex literal a+bi

``^`` binds tighter than unary minus, so ``-z^2`` is ``-(z^2)``.
A parenthesised ``(a+bi)`` is read as one complex literal.
"""

from __future__ import annotations

import math
import random
import re
from dataclasses import dataclass
from typing import Union

__all__ = [
    "Lit", "Var", "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Exp", "Sin", "Cos",
    "FunctionAst", "ExprError", "ExprSyntaxError", "UnknownIdentifierError",
    "NonIntegerExponentError", "parse", "format_ast", "const", "substitute",
    "breve_transform", "invert_conjugate", "reciprocal", "random_ast", "Z",
]

MAX_EXPONENT = 64
FUNCTIONS = ("exp", "sin", "cos")


@dataclass(frozen=True)
class Lit:
    """Complex constant. The real part is kept nonnegative so that every
    literal prints as a single token; use :func:`const` for arbitrary values."""

    value: complex

    def __post_init__(self):
        c = complex(self.value)
        if not (math.isfinite(c.real) and math.isfinite(c.imag)):
            raise ValueError(f"literal must be finite, got {c!r}")
        if c.real < 0:
            raise ValueError(f"literal real part must be >= 0, got {c!r}; use const()")
        # normalise -0.0 so that structural equality survives printing
        object.__setattr__(self, "value", complex(c.real + 0.0, c.imag + 0.0))


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Neg:
    arg: FunctionAst


@dataclass(frozen=True)
class Add:
    left: FunctionAst
    right: FunctionAst


@dataclass(frozen=True)
class Sub:
    left: FunctionAst
    right: FunctionAst


@dataclass(frozen=True)
class Mul:
    left: FunctionAst
    right: FunctionAst


@dataclass(frozen=True)
class Div:
    left: FunctionAst
    right: FunctionAst


@dataclass(frozen=True)
class Pow:
    base: FunctionAst
    k: int

    def __post_init__(self):
        if isinstance(self.k, bool) or not isinstance(self.k, int):
            raise TypeError("exponent must be an int")
        if abs(self.k) > MAX_EXPONENT:
            raise ValueError(f"|exponent| must be <= {MAX_EXPONENT}, got {self.k}")


@dataclass(frozen=True)
class Exp:
    arg: FunctionAst


@dataclass(frozen=True)
class Sin:
    arg: FunctionAst


@dataclass(frozen=True)
class Cos:
    arg: FunctionAst


FunctionAst = Union[Lit, Var, Neg, Add, Sub, Mul, Div, Pow, Exp, Sin, Cos]
Z = Var()
_BINARY = {Add: "+", Sub: "-", Mul: "*", Div: "/"}
_UNARY_FUNCS = {"exp": Exp, "sin": Sin, "cos": Cos}


class ExprError(ValueError):
    """Base class for expression errors.

    ``offset`` is a 1-based byte column, so an error at end of input in a
    7-byte source reports 8.
    """

    def __init__(self, message: str, position: int):
        self.offset = position + 1
        super().__init__(f"{message} at offset {self.offset}")


class ExprSyntaxError(ExprError):
    pass


class UnknownIdentifierError(ExprError):
    pass


class NonIntegerExponentError(ExprError):
    pass


# -- lexer -------------------------------------------------------------------

_REAL = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_TOKEN_RE = re.compile(
    rf"(?P<ws>\s+)|(?P<imag>{_REAL}i(?![A-Za-z_0-9]))|(?P<real>{_REAL})"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^()])"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # real, imag, ident, op, end
    text: str
    offset: int


def _tokenize(source: str) -> list[_Tok]:
    data = source.encode("utf-8")
    text = data.decode("latin-1")  # one char per byte, so offsets are byte offsets
    toks: list[_Tok] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(text)))
    return toks


# -- parser ------------------------------------------------------------------


class _Parser:
    def __init__(self, source: str):
        self.toks = _tokenize(source)
        self.i = 0

    def peek(self, ahead: int = 0) -> _Tok:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def is_op(self, text: str, ahead: int = 0) -> bool:
        tok = self.peek(ahead)
        return tok.kind == "op" and tok.text == text

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if not self.is_op(text):
            found = tok.text or "end of input"
            raise ExprSyntaxError(f"expected {text!r}, found {found!r}", tok.offset)
        return self.take()

    def parse(self) -> FunctionAst:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.offset)
        return node

    def expr(self) -> FunctionAst:
        node = self.term()
        while self.is_op("+") or self.is_op("-"):
            op = self.take().text
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self) -> FunctionAst:
        node = self.unary()
        while self.is_op("*") or self.is_op("/"):
            op = self.take().text
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self) -> FunctionAst:
        if self.is_op("-"):
            self.take()
            return Neg(self.unary())
        return self.power()

    def power(self) -> FunctionAst:
        node = self.atom()
        while self.is_op("^"):
            self.take()
            node = Pow(node, self.exponent())
        return node

    def exponent(self) -> int:
        paren = self.is_op("(")
        if paren:
            self.take()
        sign = 1
        if self.is_op("-") or self.is_op("+"):
            sign = -1 if self.take().text == "-" else 1
        tok = self.peek()
        if tok.kind in ("imag", "ident") or (tok.kind == "real" and not tok.text.isdigit()):
            raise NonIntegerExponentError(f"exponent must be an integer, got {tok.text!r}", tok.offset)
        if tok.kind != "real":
            raise ExprSyntaxError("expected integer exponent", tok.offset)
        self.take()
        k = sign * int(tok.text)
        if abs(k) > MAX_EXPONENT:
            raise NonIntegerExponentError(f"|exponent| exceeds {MAX_EXPONENT}", tok.offset)
        if paren:
            if not self.is_op(")"):
                raise NonIntegerExponentError("exponent must be an integer literal", self.peek().offset)
            self.take()
        return k

    def atom(self) -> FunctionAst:
        tok = self.peek()
        if tok.kind == "real":
            self.take()
            return Lit(complex(float(tok.text), 0.0))
        if tok.kind == "imag":
            self.take()
            return Lit(complex(0.0, float(tok.text[:-1])))
        if tok.kind == "ident":
            self.take()
            if tok.text == "z":
                return Var()
            if tok.text == "i":
                return Lit(1j)
            if tok.text in _UNARY_FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return _UNARY_FUNCS[tok.text](arg)
            raise UnknownIdentifierError(f"unknown identifier {tok.text!r}", tok.offset)
        if self.is_op("("):
            literal = self._complex_literal()
            if literal is not None:
                return literal
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        found = tok.text or "end of input"
        raise ExprSyntaxError(f"unexpected {found!r}", tok.offset)

    def _complex_literal(self) -> Lit | None:
        # '(' REAL ('+'|'-') IMAG ')'
        a, op, b, close = (self.peek(k) for k in range(1, 5))
        if (
            a.kind == "real"
            and op.kind == "op" and op.text in "+-"
            and b.kind == "imag"
            and close.kind == "op" and close.text == ")"
        ):
            self.i += 5
            im = float(b.text[:-1])
            return Lit(complex(float(a.text), -im if op.text == "-" else im))
        return None


def parse(source: str) -> FunctionAst:
    """Parse ``source`` into an AST.

    >>> parse("z*exp(1/z)")
    Mul(left=Var(), right=Exp(arg=Div(left=Lit(value=(1+0j)), right=Var())))
    """
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    return _Parser(source).parse()


# -- printer -----------------------------------------------------------------


def _fmt_real(x: float) -> str:
    if x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def format_ast(f: FunctionAst) -> str:
    """Canonical, fully parenthesised text; ``parse(format_ast(f)) == f``."""
    match f:
        case Lit(value=c):
            if c.imag == 0:
                return _fmt_real(c.real)
            sign = "-" if math.copysign(1.0, c.imag) < 0 else "+"
            return f"({_fmt_real(c.real)}{sign}{_fmt_real(abs(c.imag))}i)"
        case Var():
            return "z"
        case Neg(arg=a):
            return f"(-{format_ast(a)})"
        case Pow(base=b, k=k):
            return f"({format_ast(b)}^{k})"
        case Exp(arg=a):
            return f"exp({format_ast(a)})"
        case Sin(arg=a):
            return f"sin({format_ast(a)})"
        case Cos(arg=a):
            return f"cos({format_ast(a)})"
        case Add() | Sub() | Mul() | Div():
            return f"({format_ast(f.left)}{_BINARY[type(f)]}{format_ast(f.right)})"
    raise TypeError(f"not an expression node: {f!r}")


# -- transforms --------------------------------------------------------------


def const(c: complex) -> FunctionAst:
    """AST for an arbitrary complex constant (negated literal when Re c < 0)."""
    c = complex(c)
    if c.real < 0:
        return Neg(Lit(-c))
    return Lit(c)


def _minus_const(f: FunctionAst, c: complex) -> FunctionAst:
    c = complex(c)
    if c.real < 0:
        return Add(f, Lit(-c))
    return Sub(f, Lit(c))


def substitute(f: FunctionAst, replacement: FunctionAst) -> FunctionAst:
    """Replace every occurrence of ``z`` in ``f`` by ``replacement``."""
    match f:
        case Var():
            return replacement
        case Lit():
            return f
        case Neg(arg=a):
            return Neg(substitute(a, replacement))
        case Exp(arg=a):
            return Exp(substitute(a, replacement))
        case Sin(arg=a):
            return Sin(substitute(a, replacement))
        case Cos(arg=a):
            return Cos(substitute(a, replacement))
        case Pow(base=b, k=k):
            return Pow(substitute(b, replacement), k)
        case Add() | Sub() | Mul() | Div():
            return type(f)(substitute(f.left, replacement), substitute(f.right, replacement))
    raise TypeError(f"not an expression node: {f!r}")


def breve_transform(g: FunctionAst, v: complex) -> FunctionAst:
    """``(g(z) - v) / (z - v)``; for ``v == 0`` this is ``g(z) / z``."""
    if complex(v) == 0:
        return Div(g, Var())
    return Div(_minus_const(g, v), _minus_const(Var(), v))


def invert_conjugate(f: FunctionAst) -> FunctionAst:
    """``1 / f(1/z)``, conjugation of ``f`` by the inversion ``z -> 1/z``."""
    one = Lit(1)
    return Div(one, substitute(f, Div(one, Var())))


def reciprocal(f: FunctionAst) -> FunctionAst:
    """An AST for ``1/f`` that avoids forming ``f`` where it can.

    ``1/exp(a)`` becomes ``exp(-a)`` and the rewrite distributes over products,
    quotients, powers and negation, so evaluating the result does not overflow
    where ``f`` is astronomically large for a simple reason.
    """
    match f:
        case Lit(value=c) if c != 0:
            return Lit(1 / c)
        case Var():
            return Div(Lit(1), Var())
        case Exp(arg=a):
            return Exp(Neg(a))
        case Neg(arg=a):
            return Neg(reciprocal(a))
        case Mul(left=a, right=b):
            return Mul(reciprocal(a), reciprocal(b))
        case Div(left=a, right=b):
            return Mul(b, reciprocal(a))
        case Pow(base=b, k=k):
            return Pow(reciprocal(b), k)
    return Div(Lit(1), f)


# -- random trees (property suites) ------------------------------------------


def random_ast(rng: random.Random, depth: int, *, max_power: int = 3, transcendental: bool = True) -> FunctionAst:
    """Random AST of depth at most ``depth``.

    Literals lie in the unit square of the right half plane; exponents are in
    ``[-max_power, max_power]``.
    """
    if depth <= 1 or rng.random() < 0.25:
        if rng.random() < 0.6:
            return Var()
        re_ = round(rng.uniform(0, 2), 3)
        im = round(rng.uniform(-1, 1), 3) if rng.random() < 0.4 else 0.0
        return Lit(complex(re_, im))
    kinds = ["add", "sub", "mul", "div", "neg", "pow"]
    if transcendental:
        kinds += ["exp", "sin", "cos"]
    kind = rng.choice(kinds)
    sub = depth - 1
    if kind == "neg":
        return Neg(random_ast(rng, sub, max_power=max_power, transcendental=transcendental))
    if kind == "pow":
        k = rng.randint(-max_power, max_power)
        return Pow(random_ast(rng, sub, max_power=max_power, transcendental=transcendental), k)
    if kind in _UNARY_FUNCS:
        return _UNARY_FUNCS[kind](random_ast(rng, sub, max_power=max_power, transcendental=transcendental))
    cls = {"add": Add, "sub": Sub, "mul": Mul, "div": Div}[kind]
    return cls(
        random_ast(rng, sub, max_power=max_power, transcendental=transcendental),
        random_ast(rng, sub, max_power=max_power, transcendental=transcendental),
    )
