"""Small expression language for coefficients, characteristics and boundary data.

Expressions are parsed into an immutable tree, evaluated with IEEE doubles
(scalars or numpy arrays) and differentiated symbolically.

Grammar, loosest binding first::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := primary ('^' unary)?          # right-associative
    primary := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

import numpy as np

VARIABLES = frozenset({"x1", "x2", "u", "p", "q", "y1", "y2", "t"})
FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "abs", "tanh")
CONSTANTS = {"pi": math.pi, "e": math.e}

Number = Union[float, np.ndarray]


class ExprError(Exception):
    """Base class for expression-language failures."""


class ParseError(ExprError):
    def __init__(self, message: str, offset: int, expected: str | None = None):
        self.offset = offset
        self.expected = expected
        hint = f" (expected {expected})" if expected else ""
        super().__init__(f"{message} at offset {offset}{hint}")


class UnknownIdentifierError(ParseError):
    def __init__(self, name: str, offset: int, declared: Iterable[str]):
        self.name = name
        self.declared = sorted(declared)
        listing = ", ".join(self.declared) or "<none>"
        ExprError.__init__(
            self, f"unknown identifier {name!r} at offset {offset}; declared variables: {listing}"
        )
        self.offset = offset
        self.expected = None


class EvaluationError(ExprError):
    """Raised when a tree cannot be evaluated at the requested point(s).

    ``index`` is the flat position of the first offending element when the
    evaluation was vectorized, otherwise ``None``.
    """

    def __init__(self, message: str, index: int | None = None):
        self.index = index
        super().__init__(message)


class MissingBindingError(EvaluationError):
    pass


class DomainEvaluationError(EvaluationError):
    pass


# --------------------------------------------------------------------------
# tree

class Expr:
    """Base node. Subclasses are frozen dataclasses, so trees are immutable."""

    __slots__ = ()
    precedence = 100

    def evaluate(self, env: Mapping[str, Number]) -> Number:
        out = self._eval(env)
        if np.ndim(out) == 0:
            return float(out)
        return out

    def _eval(self, env):  # pragma: no cover - abstract
        raise NotImplementedError

    def diff(self, var: str) -> "Expr":
        return simplify(self._diff(var))

    def _diff(self, var):  # pragma: no cover - abstract
        raise NotImplementedError

    def variables(self) -> frozenset[str]:
        return frozenset(_walk_vars(self))

    def is_zero(self) -> bool:
        return isinstance(self, Num) and self.value == 0.0

    def __str__(self) -> str:
        return to_source(self)


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: float

    def _eval(self, env):
        return self.value

    def _diff(self, var):
        return ZERO


@dataclass(frozen=True, eq=True)
class Const(Expr):
    """Named constant (``pi`` or ``e``)."""

    name: str

    def _eval(self, env):
        return CONSTANTS[self.name]

    def _diff(self, var):
        return ZERO


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str

    def _eval(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise MissingBindingError(f"no value bound for variable {self.name!r}") from None

    def _diff(self, var):
        return ONE if self.name == var else ZERO


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr
    precedence = 3

    def _eval(self, env):
        return -self.arg._eval(env)

    def _diff(self, var):
        return Neg(self.arg._diff(var))


@dataclass(frozen=True, eq=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr

    @property
    def precedence(self):
        return _BINARY_PRECEDENCE[self.op]

    def _eval(self, env):
        a = self.left._eval(env)
        b = self.right._eval(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if self.op == "/":
            zero = np.asarray(b) == 0
            if np.any(zero):
                raise DomainEvaluationError(f"division by zero in {self}", _first(zero))
            return a / b
        return _power(a, b, self)

    def _diff(self, var):
        a, b = self.left, self.right
        da, db = a._diff(var), b._diff(var)
        if self.op in "+-":
            return BinOp(self.op, da, db)
        if self.op == "*":
            return BinOp("+", BinOp("*", da, b), BinOp("*", a, db))
        if self.op == "/":
            num = BinOp("-", BinOp("*", da, b), BinOp("*", a, db))
            return BinOp("/", num, BinOp("^", b, Num(2.0)))
        # power
        if not (var in b.variables()):
            exponent = simplify(BinOp("-", b, ONE))
            return BinOp("*", BinOp("*", b, BinOp("^", a, exponent)), da)
        # general case: a^b * (b' log a + b a'/a)
        inner = BinOp("+", BinOp("*", db, Call("log", a)), BinOp("/", BinOp("*", b, da), a))
        return BinOp("*", self, inner)


@dataclass(frozen=True, eq=True)
class Call(Expr):
    func: str
    arg: Expr

    def _eval(self, env):
        x = self.arg._eval(env)
        f = self.func
        if f == "log":
            bad = np.asarray(x) <= 0
            if np.any(bad):
                raise DomainEvaluationError(f"log of a nonpositive number in {self}", _first(bad))
            return np.log(x)
        if f == "sqrt":
            bad = np.asarray(x) < 0
            if np.any(bad):
                raise DomainEvaluationError(f"sqrt of a negative number in {self}", _first(bad))
            return np.sqrt(x)
        out = _UNARY_NUMPY[f](x)
        bad = ~np.isfinite(out)
        if np.any(bad & np.isfinite(x)):
            raise DomainEvaluationError(f"overflow evaluating {self}", _first(bad))
        return out

    def _diff(self, var):
        a = self.arg
        da = a._diff(var)
        f = self.func
        if f == "sin":
            outer = Call("cos", a)
        elif f == "cos":
            outer = Neg(Call("sin", a))
        elif f == "exp":
            outer = self
        elif f == "log":
            return BinOp("/", da, a)
        elif f == "sqrt":
            return BinOp("/", da, BinOp("*", Num(2.0), self))
        elif f == "abs":
            outer = BinOp("/", a, self)
        else:  # tanh
            outer = BinOp("-", ONE, BinOp("^", self, Num(2.0)))
        return BinOp("*", outer, da)


ZERO = Num(0.0)
ONE = Num(1.0)

_BINARY_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_UNARY_NUMPY = {
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "abs": np.abs,
    "tanh": np.tanh,
}


def _first(mask) -> int | None:
    mask = np.asarray(mask)
    if mask.ndim == 0:
        return None
    return int(np.flatnonzero(mask)[0])


def _power(a, b, node):
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    noninteger = b_arr != np.round(b_arr)
    bad = (a_arr < 0) & noninteger
    if np.any(bad):
        raise DomainEvaluationError(f"negative base with non-integer exponent in {node}", _first(bad))
    bad = (a_arr == 0) & (b_arr < 0)
    if np.any(bad):
        raise DomainEvaluationError(f"zero raised to a negative power in {node}", _first(bad))
    with np.errstate(over="ignore"):
        out = np.power(a_arr, b_arr)
    if np.ndim(out) == 0:
        out = float(out)
    return out


def _walk_vars(e: Expr):
    if isinstance(e, Var):
        yield e.name
    elif isinstance(e, Neg):
        yield from _walk_vars(e.arg)
    elif isinstance(e, BinOp):
        yield from _walk_vars(e.left)
        yield from _walk_vars(e.right)
    elif isinstance(e, Call):
        yield from _walk_vars(e.arg)


# --------------------------------------------------------------------------
# parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # num | name | op | end
    text: str
    offset: int


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source: str, variables: Iterable[str]):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.variables = frozenset(variables)

    @property
    def tok(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def expect(self, text: str) -> None:
        if self.tok.text != text:
            raise ParseError(f"unexpected {self._describe()}", self.tok.offset, repr(text))
        self.advance()

    def _describe(self) -> str:
        return "end of input" if self.tok.kind == "end" else f"token {self.tok.text!r}"

    def parse(self) -> Expr:
        node = self.expr()
        if self.tok.kind != "end":
            raise ParseError(f"unexpected {self._describe()}", self.tok.offset, "operator or end of input")
        return node

    def expr(self) -> Expr:
        node = self.term()
        while self.tok.text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.tok.text in ("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.tok.text == "-":
            self.advance()
            return Neg(self.unary())
        if self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.primary()
        if self.tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            return Num(float(t.text))
        if t.kind == "name":
            self.advance()
            if t.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(t.text, arg)
            if t.text in CONSTANTS:
                return Const(t.text)
            if t.text in self.variables:
                return Var(t.text)
            raise UnknownIdentifierError(t.text, t.offset, self.variables)
        if t.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        raise ParseError(f"unexpected {self._describe()}", t.offset, "number, name or '('")


def parse(source: str, variables: Iterable[str] = ()) -> Expr:
    """Parse ``source`` into an expression tree.

    Only names in ``variables`` (plus the constants ``pi`` and ``e`` and the
    built-in functions) are accepted.
    """
    variables = list(variables)
    unknown = set(variables) - VARIABLES
    if unknown:
        raise ValueError(f"undeclarable variable names: {sorted(unknown)}")
    if not source or not source.strip():
        raise ParseError("empty expression", 0, "an expression")
    return _Parser(source, variables).parse()


# --------------------------------------------------------------------------
# simplification and printing

def _is_num(e: Expr, value: float | None = None) -> bool:
    return isinstance(e, Num) and (value is None or e.value == value)


def simplify(e: Expr) -> Expr:
    """Constant folding plus removal of neutral/absorbing elements.

    Folding that would raise a domain error (``log(0)``, ``1/0``) is left
    unfolded so the error surfaces at evaluation time.
    """
    if isinstance(e, (Num, Const, Var)):
        return e
    if isinstance(e, Neg):
        a = simplify(e.arg)
        if isinstance(a, Num):
            return Num(-a.value)
        if isinstance(a, Neg):
            return a.arg
        return Neg(a)
    if isinstance(e, Call):
        a = simplify(e.arg)
        node = Call(e.func, a)
        if isinstance(a, Num):
            try:
                return Num(float(node._eval({})))
            except EvaluationError:
                return node
        return node
    a, b = simplify(e.left), simplify(e.right)
    op = e.op
    if isinstance(a, Num) and isinstance(b, Num):
        node = BinOp(op, a, b)
        try:
            return Num(float(node._eval({})))
        except EvaluationError:
            return node
    if op == "+":
        if _is_num(a, 0.0):
            return b
        if _is_num(b, 0.0):
            return a
    elif op == "-":
        if _is_num(b, 0.0):
            return a
        if _is_num(a, 0.0):
            return simplify(Neg(b))
    elif op == "*":
        if _is_num(a, 0.0) or _is_num(b, 0.0):
            return ZERO
        if _is_num(a, 1.0):
            return b
        if _is_num(b, 1.0):
            return a
        if _is_num(a, -1.0):
            return simplify(Neg(b))
        if _is_num(b, -1.0):
            return simplify(Neg(a))
    elif op == "/":
        if _is_num(a, 0.0) and not _is_num(b, 0.0):
            return ZERO
        if _is_num(b, 1.0):
            return a
    elif op == "^":
        if _is_num(b, 1.0):
            return a
        if _is_num(b, 0.0):
            return ONE
    return BinOp(op, a, b)


def to_source(e: Expr) -> str:
    """Print ``e`` in the grammar accepted by :func:`parse`.

    Literals use ``repr`` so that re-parsing reproduces every double exactly.
    """
    if isinstance(e, Num):
        text = repr(e.value)
        if text in ("inf", "-inf", "nan"):
            raise ValueError(f"cannot print non-finite literal {text}")
        return f"({text})" if e.value < 0 or text.startswith("-") else text
    if isinstance(e, (Const, Var)):
        return e.name
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    if isinstance(e, Neg):
        inner = to_source(e.arg)
        if e.arg.precedence < Neg.precedence:
            inner = f"({inner})"
        return f"-{inner}"
    prec = e.precedence
    left, right = to_source(e.left), to_source(e.right)
    if e.op == "^":
        # base must bind tighter than '^'; the exponent is parsed at unary level
        if e.left.precedence <= prec:
            left = f"({left})"
        if e.right.precedence < Neg.precedence:
            right = f"({right})"
    else:
        if e.left.precedence < prec:
            left = f"({left})"
        # left-associative: equal precedence on the right needs parentheses
        if e.right.precedence <= prec:
            right = f"({right})"
    return f"{left} {e.op} {right}"


# --------------------------------------------------------------------------
# functional API

def evaluate(e: Expr, env: Mapping[str, Number]) -> Number:
    return e.evaluate(env)


def diff(e: Expr, var: str) -> Expr:
    if var not in VARIABLES:
        raise ValueError(f"cannot differentiate with respect to undeclared name {var!r}")
    return e.diff(var)


def is_constant_zero(e: Expr) -> bool:
    return simplify(e).is_zero()


def substitute(e: Expr, bindings: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions (used for reparameterized characteristics)."""
    if isinstance(e, Var):
        return bindings.get(e.name, e)
    if isinstance(e, (Num, Const)):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, bindings))
    if isinstance(e, Call):
        return Call(e.func, substitute(e.arg, bindings))
    return BinOp(e.op, substitute(e.left, bindings), substitute(e.right, bindings))


def as_function(e: Expr, *names: str):
    """Wrap ``e`` as a positional callable, e.g. ``as_function(e, "x1", "x2")``."""

    def f(*args):
        if len(args) != len(names):
            raise TypeError(f"expected {len(names)} arguments, got {len(args)}")
        return e.evaluate(dict(zip(names, args)))

    f.expr = e
    return f
