"""A small arithmetic expression language for problem definitions.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'

``^`` is right-associative and binds tighter than unary minus, so ``-2^2``
is ``-4`` and ``2^-1`` is ``0.5``. Evaluation works on floats or numpy
arrays; any domain violation or non-finite result raises :class:`EvalError`.
"""

from __future__ import annotations

import math
import re
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .special import gamma as _gamma
from .special import gammainc_upper as _gammainc_upper

__all__ = [
    "BinOp",
    "Call",
    "EvalError",
    "Expr",
    "ExprSyntaxError",
    "Expression",
    "FUNCTIONS",
    "Neg",
    "Num",
    "Var",
    "evaluate",
    "free_variables",
    "parse",
    "to_source",
]


class ExprSyntaxError(ValueError):
    """Malformed source text; carries the 1-based line and column."""

    def __init__(self, message: str, line: int, column: int) -> None:
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class EvalError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: Expr


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple[Expr, ...]


Expr = Union[Num, Var, Neg, BinOp, Call]


def _checked(name: str, ok, x) -> None:
    if not np.all(ok):
        bad = np.asarray(x)[~np.asarray(ok)] if np.ndim(x) else x
        raise EvalError(f"{name}: argument {float(np.ravel(bad)[0])!r} outside the domain")


def _log(x):
    _checked("ln", np.asarray(x) > 0, x)
    return np.log(x)


def _sqrt(x):
    _checked("sqrt", np.asarray(x) >= 0, x)
    return np.sqrt(x)


def _gamma_fn(x):
    _checked("gamma", np.asarray(x) > 0, x)
    if np.ndim(x):
        return np.array([_gamma(v) for v in np.ravel(x)]).reshape(np.shape(x))
    return _gamma(x)


def _gammainc_fn(a, x):
    a, x = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(x, dtype=float))
    _checked("gammainc_upper", a > 0, a)
    _checked("gammainc_upper", x >= 0, x)
    out = np.array([_gammainc_upper(u, v) for u, v in zip(a.ravel(), x.ravel())]).reshape(a.shape)
    return out if out.ndim else float(out)


#: builtin functions and their arities
FUNCTIONS: dict[str, tuple[int, Callable]] = {
    "sin": (1, np.sin),
    "cos": (1, np.cos),
    "exp": (1, np.exp),
    "ln": (1, _log),
    "sqrt": (1, _sqrt),
    "gamma": (1, _gamma_fn),
    "abs": (1, np.abs),
    "floor": (1, np.floor),
    "ceil": (1, np.ceil),
    "gammainc_upper": (2, _gammainc_fn),
}

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[a-z][a-z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(source: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise _error(source, pos, f"unexpected character {source[pos]!r}")
        if m.lastgroup != "ws":
            toks.append(_Tok(m.lastgroup, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(source)))
    return toks


def _error(source: str, pos: int, message: str) -> ExprSyntaxError:
    line = source.count("\n", 0, pos) + 1
    col = pos - (source.rfind("\n", 0, pos) + 1) + 1
    return ExprSyntaxError(message, line, col)


class _Parser:
    def __init__(self, source: str, variables: frozenset[str] | None) -> None:
        self.source = source
        self.toks = _tokenize(source)
        self.i = 0
        self.variables = variables

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, message: str, tok: _Tok | None = None) -> ExprSyntaxError:
        return _error(self.source, (tok or self.tok).pos, message)

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            found = self.tok.text or "end of input"
            raise self.fail(f"expected {text!r}, found {found!r}")

    def parse(self) -> Expr:
        e = self.expr()
        if self.tok.kind != "end":
            raise self.fail(f"unexpected {self.tok.text!r}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.factor())
        return e

    def factor(self) -> Expr:
        if self.accept("-"):
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.accept("^"):
            return BinOp("^", base, self.factor())
        return base

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            value = float(tok.text)
            if not math.isfinite(value):
                raise self.fail(f"number {tok.text!r} is not representable", tok)
            return Num(value)
        if tok.kind == "ident":
            self.i += 1
            if self.accept("("):
                if tok.text not in FUNCTIONS:
                    raise self.fail(f"unknown function {tok.text!r}", tok)
                args = [self.expr()]
                while self.accept(","):
                    args.append(self.expr())
                self.expect(")")
                arity = FUNCTIONS[tok.text][0]
                if len(args) != arity:
                    raise self.fail(f"{tok.text} takes {arity} argument(s), got {len(args)}", tok)
                return Call(tok.text, tuple(args))
            if tok.text in FUNCTIONS:
                raise self.fail(f"function {tok.text!r} used without arguments", tok)
            if self.variables is not None and tok.text not in self.variables:
                raise self.fail(f"unknown identifier {tok.text!r}", tok)
            return Var(tok.text)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        found = tok.text or "end of input"
        raise self.fail(f"expected a number, name or '(', found {found!r}")


def parse(source: str, variables: Iterable[str] | None = None) -> Expr:
    """Parse ``source`` into an expression tree.

    If ``variables`` is given, any other free identifier is a syntax error.
    """
    allowed = None if variables is None else frozenset(variables)
    return _Parser(source, allowed).parse()


def to_source(e: Expr) -> str:
    """Print an expression so that ``parse(to_source(e)) == e``."""
    if isinstance(e, Num):
        return repr(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_source(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(to_source(a) for a in e.args)})"
    raise TypeError(f"not an expression node: {e!r}")


def free_variables(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Neg):
        return free_variables(e.operand)
    if isinstance(e, BinOp):
        return free_variables(e.left) | free_variables(e.right)
    if isinstance(e, Call):
        return set().union(*(free_variables(a) for a in e.args))
    return set()


def _pow(a, b):
    a_arr = np.asarray(a)
    b_arr = np.asarray(b)
    bad = (a_arr < 0) & (b_arr != np.round(b_arr))
    _checked("^ (negative base, fractional exponent)", ~bad, a)
    zero_neg = (a_arr == 0) & (b_arr < 0)
    _checked("^ (zero to a negative power)", ~zero_neg, a)
    return np.power(a_arr.astype(float), b_arr)


def _div(a, b):
    _checked("/ (division by zero)", np.asarray(b) != 0, b)
    return np.true_divide(a, b)


_BINOPS: dict[str, Callable] = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": _div,
    "^": _pow,
}


def _eval(e: Expr, env: Mapping[str, object]):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise EvalError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Neg):
        return np.negative(_eval(e.operand, env))
    if isinstance(e, BinOp):
        return _BINOPS[e.op](_eval(e.left, env), _eval(e.right, env))
    if isinstance(e, Call):
        args = [_eval(a, env) for a in e.args]
        try:
            return FUNCTIONS[e.name][1](*args)
        except EvalError:
            raise
        except (ArithmeticError, ValueError) as exc:
            raise EvalError(f"{e.name}: {exc}") from None
    raise TypeError(f"not an expression node: {e!r}")


def evaluate(e: Expr, env: Mapping[str, object] | None = None, **bindings):
    """Evaluate ``e`` with IEEE double arithmetic.

    Variables may be bound to floats or numpy arrays (evaluated elementwise).
    Returns a float for scalar inputs.
    """
    scope = dict(env or {}, **bindings)
    with np.errstate(all="ignore"):
        out = _eval(e, scope)
    arr = np.asarray(out, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise EvalError(f"non-finite result evaluating {to_source(e)}")
    return float(arr) if arr.ndim == 0 else arr


@dataclass(frozen=True)
class Expression:
    """Parsed expression that is callable with keyword bindings.

    ``Expression("1 - 0.5*exp(-t)")(t=0.0)`` returns ``0.5``. Called with
    a single positional argument it binds ``t`` (handy for order functions);
    a single mapping argument is used as the environment.
    """

    source: str
    variables: frozenset[str] | None = None
    tree: Expr = field(init=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "tree", parse(self.source, self.variables))

    def __call__(self, *args, **bindings):
        if args:
            if len(args) != 1:
                raise TypeError("pass at most one positional argument (t)")
            if isinstance(args[0], Mapping):
                return evaluate(self.tree, args[0], **bindings)
            bindings["t"] = args[0]
        return evaluate(self.tree, bindings)
