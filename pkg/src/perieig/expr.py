"""Coefficient expression language: AST, parser, printer, derivatives, evaluation.

Grammar (standard precedence, ``^`` right-associative and binding tighter
than unary minus, so ``-x^2`` is ``-(x^2)``)::

    expr    := term (("+"|"-") term)*
    term    := factor (("*"|"/") factor)*
    factor  := "-" factor | power
    power   := primary ("^" factor)?
    primary := NUMBER | IDENT | IDENT "(" expr ("," expr)? ")" | "(" expr ")"

Identifiers are ``x``, ``t``, ``pi``, declared parameter names and the
functions in :data:`FUNCTIONS`.  ``step`` and ``sign`` only arise as
derivatives of the piecewise functions, but they parse so that printed
derivatives round-trip.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import ExprDomainError, ExprError, ExprSyntaxError, UnknownIdentifierError

__all__ = [
    "Expr",
    "Num",
    "Var",
    "Param",
    "Neg",
    "BinOp",
    "Call",
    "FUNCTIONS",
    "parse_expr",
    "differentiate",
    "substitute",
    "num",
    "var",
    "call",
]

# name -> arity
FUNCTIONS: dict[str, int] = {
    "sin": 1,
    "cos": 1,
    "tan": 1,
    "exp": 1,
    "log": 1,
    "sqrt": 1,
    "abs": 1,
    "pos": 1,
    "step": 1,
    "sign": 1,
    "min": 2,
    "max": 2,
}

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_PREC = 3
_ATOM_PREC = 5


class Expr:
    """Base class of the immutable expression tree.

    Arithmetic operators build new trees with constant folding, which keeps
    symbolic derivatives compact without attempting any deeper simplification.
    """

    __slots__ = ()

    precedence = _ATOM_PREC

    def children(self) -> tuple["Expr", ...]:
        return ()

    def symbols(self) -> frozenset[str]:
        out: set[str] = set()
        stack: list[Expr] = [self]
        while stack:
            node = stack.pop()
            if isinstance(node, (Var, Param)):
                out.add(node.name)
            stack.extend(node.children())
        return frozenset(out)

    def depends_on(self, name: str) -> bool:
        return name in self.symbols()

    def params(self) -> frozenset[str]:
        return frozenset(s for s in self.symbols() if s not in ("x", "t"))

    def is_constant(self) -> bool:
        return isinstance(self, Num)

    # -- building -------------------------------------------------------
    def __add__(self, other):
        return _add(self, _coerce(other))

    def __radd__(self, other):
        return _add(_coerce(other), self)

    def __sub__(self, other):
        return _sub(self, _coerce(other))

    def __rsub__(self, other):
        return _sub(_coerce(other), self)

    def __mul__(self, other):
        return _mul(self, _coerce(other))

    def __rmul__(self, other):
        return _mul(_coerce(other), self)

    def __truediv__(self, other):
        return _div(self, _coerce(other))

    def __rtruediv__(self, other):
        return _div(_coerce(other), self)

    def __pow__(self, other):
        return _pow(self, _coerce(other))

    def __rpow__(self, other):
        return _pow(_coerce(other), self)

    def __neg__(self):
        return _neg(self)

    # -- printing / evaluation -------------------------------------------
    def __str__(self) -> str:
        return _format(self)

    def to_source(self) -> str:
        return _source(self)

    def compile(self) -> Callable:
        """Return ``f(x, t, params)`` evaluating the tree with numpy broadcasting."""
        return _compile(self)

    def evaluate(self, x, t, params: Mapping[str, float] | None = None):
        """Evaluate at ``(x, t)``; result has the broadcast shape of the inputs.

        Raises :class:`ExprDomainError` when evaluation leaves the reals.
        """
        return evaluate(self.compile(), x, t, params, self)

    def diff(self, name: str) -> "Expr":
        return differentiate(self, name)

    def subs(self, name: str, replacement) -> "Expr":
        return substitute(self, name, replacement)


@dataclass(frozen=True, eq=True, repr=True)
class Num(Expr):
    value: float
    label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Param(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr
    precedence = _NEG_PREC

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    @property
    def precedence(self):  # type: ignore[override]
        return _PREC[self.op]

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    args: tuple[Expr, ...]

    def children(self):
        return self.args


ZERO = Num(0.0)
ONE = Num(1.0)
PI = Num(math.pi, "pi")


def num(value: float) -> Num:
    return Num(value)


def var(name: str) -> Var:
    if name not in ("x", "t"):
        raise ValueError(f"variable must be 'x' or 't', got {name!r}")
    return Var(name)


def call(fn: str, *args: Expr) -> Expr:
    args = tuple(_coerce(a) for a in args)
    if FUNCTIONS.get(fn) != len(args):
        raise ExprError(f"function {fn!r} takes {FUNCTIONS.get(fn)} argument(s)")
    if all(isinstance(a, Num) for a in args):
        folded = _fold_call(fn, [a.value for a in args])
        if folded is not None:
            return Num(folded)
    return Call(fn, args)


def _coerce(value) -> Expr:
    if isinstance(value, Expr):
        return value
    if isinstance(value, (int, float, np.floating, np.integer)):
        return Num(float(value))
    raise TypeError(f"cannot use {type(value).__name__} in an expression")


def _is(e: Expr, value: float) -> bool:
    return isinstance(e, Num) and e.value == value


def _add(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    return BinOp("+", a, b)


def _sub(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return _neg(b)
    return BinOp("-", a, b)


def _mul(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return _neg(b)
    if _is(b, -1.0):
        return _neg(a)
    return BinOp("*", a, b)


def _div(a, b):
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0.0:
        return Num(a.value / b.value)
    if _is(a, 0.0) and not _is(b, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    return BinOp("/", a, b)


def _pow(a, b):
    if isinstance(a, Num) and isinstance(b, Num):
        folded = _fold_pow(a.value, b.value)
        if folded is not None:
            return Num(folded)
    if _is(b, 1.0):
        return a
    if _is(b, 0.0):
        return ONE
    return BinOp("^", a, b)


def _neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _fold_pow(base: float, exponent: float) -> float | None:
    try:
        value = base**exponent
    except (ZeroDivisionError, OverflowError):
        return None
    if isinstance(value, complex) or not math.isfinite(value):
        return None
    return value


def _fold_call(fn: str, args: list[float]) -> float | None:
    try:
        with np.errstate(all="raise"):
            value = float(_NUMPY_FUNCS[fn](*[np.float64(a) for a in args]))
    except (FloatingPointError, ValueError, ZeroDivisionError):
        return None
    return value if math.isfinite(value) else None


# ----------------------------------------------------------------------------
# printing
# ----------------------------------------------------------------------------


def _fmt_number(value: float) -> str:
    if value.is_integer() and abs(value) < 1e16:
        text = str(int(value))
    else:
        text = repr(value)
    return f"({text})" if value < 0 else text


def _format(e: Expr) -> str:
    if isinstance(e, Num):
        return e.label if e.label else _fmt_number(e.value)
    if isinstance(e, (Var, Param)):
        return e.name
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(_format(a) for a in e.args)})"
    if isinstance(e, Neg):
        inner = _format(e.arg)
        if e.arg.precedence < 4 and not isinstance(e.arg, Neg):
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        left, right = _format(e.left), _format(e.right)
        if e.op == "^":
            if e.left.precedence < _ATOM_PREC:
                left = f"({left})"
            if e.right.precedence < _NEG_PREC:
                right = f"({right})"
            return f"{left}^{right}"
        if e.left.precedence < p:
            left = f"({left})"
        if e.right.precedence <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(type(e))


# ----------------------------------------------------------------------------
# parsing
# ----------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # 'num' | 'ident' | 'op' | 'end'
    text: str
    offset: int  # byte offset


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    # byte offsets for UTF-8 input
    byte_at = [0]
    for ch in source:
        byte_at.append(byte_at[-1] + len(ch.encode("utf-8")))
    while True:
        while pos < len(source) and source[pos].isspace():
            pos += 1
        if pos >= len(source):
            break
        match = _TOKEN.match(source, pos)
        if match is None or match.end() == pos:
            raise ExprSyntaxError(
                f"unexpected character {source[pos]!r}", byte_at[pos], "number, identifier or operator"
            )
        kind = match.lastgroup
        start = match.start(kind)
        tokens.append(_Token(kind, match.group(kind), byte_at[start]))
        pos = match.end()
    tokens.append(_Token("end", "", byte_at[len(source)]))
    return tokens


class _Parser:
    def __init__(self, source: str, params: Iterable[str]):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.params = tuple(sorted(params))

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> None:
        if self.tok.text != text or self.tok.kind == "end":
            self.fail(repr(text))
        self.advance()

    def fail(self, expected: str):
        tok = self.tok
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExprSyntaxError(f"unexpected {found}", tok.offset, expected)

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            self.fail("operator or end of input")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.factor())
        return base

    def primary(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "ident":
            self.advance()
            name = tok.text
            if name in FUNCTIONS:
                if self.tok.text != "(":
                    self.fail(f"'(' after function {name}")
                self.advance()
                args = [self.expr()]
                while self.tok.kind == "op" and self.tok.text == ",":
                    self.advance()
                    args.append(self.expr())
                if len(args) != FUNCTIONS[name]:
                    raise ExprSyntaxError(
                        f"{name} takes {FUNCTIONS[name]} argument(s), got {len(args)}",
                        tok.offset,
                        f"{FUNCTIONS[name]} argument(s)",
                    )
                self.expect(")")
                return Call(name, tuple(args))
            if name in ("x", "t"):
                return Var(name)
            if name == "pi":
                return PI
            if name in self.params:
                return Param(name)
            raise UnknownIdentifierError(name, tok.offset, self.params)
        self.fail("number, identifier or '('")


def parse_expr(source: str, params: Iterable[str] = ()) -> Expr:
    """Parse ``source`` into an :class:`Expr`.

    ``params`` lists the parameter names that may appear; any other
    identifier is rejected with :class:`UnknownIdentifierError`.
    """
    return _Parser(source, params).parse()


# ----------------------------------------------------------------------------
# differentiation
# ----------------------------------------------------------------------------


def differentiate(e: Expr, name: str) -> Expr:
    """Exact derivative of ``e`` with respect to ``x`` or ``t``.

    ``abs``, ``pos``, ``min`` and ``max`` are differentiated piecewise with
    derivative 0 on their kink sets (``sign(0) = step(0) = 0``).
    """
    if name not in ("x", "t"):
        raise ValueError(f"can only differentiate with respect to x or t, got {name!r}")
    return _d(e, name)


def _d(e: Expr, v: str) -> Expr:
    if isinstance(e, (Num, Param)):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == v else ZERO
    if not e.depends_on(v):
        return ZERO
    if isinstance(e, Neg):
        return -_d(e.arg, v)
    if isinstance(e, BinOp):
        a, b = e.left, e.right
        if e.op == "+":
            return _d(a, v) + _d(b, v)
        if e.op == "-":
            return _d(a, v) - _d(b, v)
        if e.op == "*":
            return _d(a, v) * b + a * _d(b, v)
        if e.op == "/":
            if not b.depends_on(v):
                return _d(a, v) / b
            return (_d(a, v) * b - a * _d(b, v)) / b ** Num(2.0)
        if e.op == "^":
            if not b.depends_on(v):
                return b * a ** (b - ONE) * _d(a, v)
            if not a.depends_on(v):
                return e * call("log", a) * _d(b, v)
            return e * (_d(b, v) * call("log", a) + b * _d(a, v) / a)
    if isinstance(e, Call):
        fn, args = e.fn, e.args
        if fn in ("step", "sign"):
            return ZERO
        if fn in ("min", "max"):
            a, b = args
            first, second = (b - a, a - b) if fn == "min" else (a - b, b - a)
            return call("step", first) * _d(a, v) + call("step", second) * _d(b, v)
        u = args[0]
        du = _d(u, v)
        if fn == "sin":
            outer = call("cos", u)
        elif fn == "cos":
            outer = -call("sin", u)
        elif fn == "tan":
            outer = ONE / call("cos", u) ** Num(2.0)
        elif fn == "exp":
            outer = e
        elif fn == "log":
            return du / u
        elif fn == "sqrt":
            return du / (Num(2.0) * e)
        elif fn == "abs":
            outer = call("sign", u)
        elif fn == "pos":
            outer = call("step", u)
        else:  # pragma: no cover - FUNCTIONS is closed
            raise ExprError(f"no derivative rule for {fn}")
        return outer * du
    raise TypeError(type(e))


def substitute(e: Expr, name: str, replacement) -> Expr:
    """Replace every occurrence of variable or parameter ``name`` by ``replacement``."""
    replacement = _coerce(replacement)

    def walk(node: Expr) -> Expr:
        if isinstance(node, (Var, Param)):
            return replacement if node.name == name else node
        if isinstance(node, Neg):
            return -walk(node.arg)
        if isinstance(node, BinOp):
            a, b = walk(node.left), walk(node.right)
            return {"+": _add, "-": _sub, "*": _mul, "/": _div, "^": _pow}[node.op](a, b)
        if isinstance(node, Call):
            return call(node.fn, *(walk(a) for a in node.args))
        return node

    return walk(e)


# ----------------------------------------------------------------------------
# evaluation
# ----------------------------------------------------------------------------


def _np_pos(u):
    return np.maximum(u, 0.0)


def _np_step(u):
    return np.where(np.asarray(u) > 0, 1.0, 0.0)


_NUMPY_FUNCS: dict[str, Callable] = {
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "abs": np.abs,
    "pos": _np_pos,
    "step": _np_step,
    "sign": np.sign,
    "min": np.minimum,
    "max": np.maximum,
}


def _source(e: Expr) -> str:
    if isinstance(e, Num):
        return f"({e.value!r})"
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Param):
        return f"p[{e.name!r}]"
    if isinstance(e, Neg):
        return f"(-{_source(e.arg)})"
    if isinstance(e, BinOp):
        if e.op == "^":
            return f"_f_pow({_source(e.left)}, {_source(e.right)})"
        return f"({_source(e.left)} {e.op} {_source(e.right)})"
    if isinstance(e, Call):
        return f"_f_{e.fn}({', '.join(_source(a) for a in e.args)})"
    raise TypeError(type(e))


_NAMESPACE = {f"_f_{k}": f for k, f in _NUMPY_FUNCS.items()}
# numpy power so that constant subtrees never produce Python complex numbers
_NAMESPACE["_f_pow"] = lambda a, b: np.power(np.float64(a) if np.ndim(a) == 0 else a, b)
_COMPILED: dict[Expr, Callable] = {}


def _compile(e: Expr) -> Callable:
    fn = _COMPILED.get(e)
    if fn is None:
        fn = eval(f"lambda x, t, p: {_source(e)}", dict(_NAMESPACE))  # noqa: S307 - source is generated from the AST
        if len(_COMPILED) > 4096:
            _COMPILED.clear()
        _COMPILED[e] = fn
    return fn


def evaluate(fn: Callable, x, t, params, expr: Expr | None = None):
    """Run a compiled expression with floating-point traps turned into domain errors."""
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    try:
        with np.errstate(divide="raise", invalid="raise", over="raise", under="ignore"):
            value = fn(x, t, params if params is not None else {})
    except (FloatingPointError, ZeroDivisionError, ValueError, OverflowError) as exc:
        where = f" in {expr}" if expr is not None else ""
        raise ExprDomainError(f"domain error{where}: {exc}") from None
    except KeyError as exc:
        raise ExprError(f"parameter {exc.args[0]!r} is not bound") from None
    shape = np.broadcast_shapes(x.shape, t.shape)
    value = np.asarray(value, dtype=float)
    if value.shape != shape:
        value = np.broadcast_to(value, shape).copy()
    return value


class CompiledExpr:
    """An expression bound to a parameter table, callable as ``f(x, t)``."""

    def __init__(self, expr: Expr, params: Mapping[str, float] | None = None):
        self.expr = expr
        self.params = dict(params or {})
        self._fn = expr.compile()

    def __call__(self, x, t):
        return evaluate(self._fn, x, t, self.params, self.expr)

    @cached_property
    def time_independent(self) -> bool:
        return not self.expr.depends_on("t")

    def __repr__(self):
        return f"CompiledExpr({self.expr})"
