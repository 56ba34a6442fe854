"""Closed-form real expressions in one or two variables.

A small recursive-descent parser and a vectorized numpy evaluator.  The
grammar, loosest binding first::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | 'pi' | 'x' | 'y' | NAME '(' expr (',' expr)* ')'
            | '(' expr ')'

Functions: sin, cos, abs, sqrt, exp, log and ``ramp(a, b, x)``, which is 0
for x <= a, 1 for x >= b and linear in between.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import (
    ArityError,
    EvaluationDomainError,
    ExpressionSyntaxError,
    UnknownIdentifierError,
)

__all__ = [
    "Const",
    "NamedConst",
    "Var",
    "Unary",
    "Binary",
    "Call",
    "Expression",
    "parse",
    "unparse",
    "evaluate",
    "eval_expr",
    "variables",
]

UNARY_FUNCTIONS = ("sin", "cos", "abs", "sqrt", "exp", "log")
CALL_ARITY = {"ramp": 3}
VARIABLES = ("x", "y")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class NamedConst:
    name: str


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of UNARY_FUNCTIONS
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # one of + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


Node = Union[Const, NamedConst, Var, Unary, Binary, Call]


@dataclass(frozen=True)
class Expression:
    root: Node
    arity: int

    def __call__(self, x, y=None):
        return evaluate(self, x, y)

    def __str__(self):
        return unparse(self)


# -- tokenizer ---------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)


def _tokenize(source):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ExpressionSyntaxError(f"unexpected character {source[pos]!r}", pos)
        start = m.start(m.lastgroup)
        tokens.append((m.lastgroup, m.group(m.lastgroup), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source, arity):
        self.tokens = _tokenize(source)
        self.i = 0
        self.arity = arity

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, value, pos = self.take()
        if value != text or kind == "end":
            found = "end of input" if kind == "end" else repr(value)
            raise ExpressionSyntaxError(f"expected {text!r}, found {found}", pos)

    def parse(self):
        node = self.expr()
        kind, value, pos = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected {value!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return Unary("neg", self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return Binary("^", base, self.unary())
        return base

    def atom(self):
        kind, value, pos = self.take()
        if kind == "num":
            return Const(float(value))
        if kind == "name":
            if value == "pi":
                return NamedConst("pi")
            if value in VARIABLES:
                if VARIABLES.index(value) >= self.arity:
                    raise ArityError(
                        f"variable {value!r} not allowed in a {self.arity}-variable expression",
                        pos,
                    )
                return Var(value)
            if value in UNARY_FUNCTIONS or value in CALL_ARITY:
                self.expect("(")
                args = [self.expr()]
                while self.peek()[0] == "op" and self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                close = self.peek()[2]
                self.expect(")")
                want = CALL_ARITY.get(value, 1)
                if len(args) != want:
                    raise ExpressionSyntaxError(
                        f"{value} takes {want} argument(s), got {len(args)}", close
                    )
                if value in UNARY_FUNCTIONS:
                    return Unary(value, args[0])
                return Call(value, tuple(args))
            raise UnknownIdentifierError(f"unknown identifier {value!r}", pos)
        if kind == "op" and value == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(value)
        raise ExpressionSyntaxError(f"unexpected {found}", pos)


def parse(source: str, arity: int = 1) -> Expression:
    """Parse ``source`` into an :class:`Expression` over ``arity`` variables.

    >>> parse("x*sin(1/x)").root
    Binary(op='*', left=Var(name='x'), right=Unary(op='sin', arg=Binary(op='/', left=Const(value=1.0), right=Var(name='x'))))
    """
    if arity not in (1, 2):
        raise ValueError("arity must be 1 or 2")
    if not source or not source.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    return Expression(_Parser(source, arity).parse(), arity)


# -- unparse -----------------------------------------------------------------

_ADD, _MUL, _NEG, _POW, _ATOM = 1, 2, 3, 4, 5


def _prec(node):
    if isinstance(node, Binary):
        return {"+": _ADD, "-": _ADD, "*": _MUL, "/": _MUL, "^": _POW}[node.op]
    if isinstance(node, Unary) and node.op == "neg":
        return _NEG
    return _ATOM


def _wrap(node, needs):
    text = _unparse(node)
    return f"({text})" if needs else text


def _unparse(node):
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, (NamedConst, Var)):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return "-" + _wrap(node.arg, _prec(node.arg) < _NEG)
        return f"{node.op}({_unparse(node.arg)})"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(_unparse(a) for a in node.args)})"
    p = _prec(node)
    lp, rp = _prec(node.left), _prec(node.right)
    if node.op == "^":
        left = _wrap(node.left, lp <= _POW)
        right = _wrap(node.right, rp < _NEG)
        return f"{left}^{right}"
    left = _wrap(node.left, lp < p)
    # operators are left-associative; a right operand of equal rank needs parens
    right = _wrap(node.right, rp <= p)
    return f"{left} {node.op} {right}"


def unparse(e) -> str:
    root = e.root if isinstance(e, Expression) else e
    return _unparse(root)


def variables(e) -> set:
    root = e.root if isinstance(e, Expression) else e
    found = set()
    stack = [root]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            found.add(node.name)
        elif isinstance(node, Unary):
            stack.append(node.arg)
        elif isinstance(node, Binary):
            stack.extend((node.left, node.right))
        elif isinstance(node, Call):
            stack.extend(node.args)
    return found


# -- evaluation --------------------------------------------------------------


def _fail(what, mask, points):
    idx = int(np.flatnonzero(mask)[0])
    at = points[idx] if points is not None else None
    raise EvaluationDomainError(f"{what} at point {at}")


def _eval(node, env, points):
    if isinstance(node, Const):
        return np.full(env["shape"], node.value, dtype=float)
    if isinstance(node, NamedConst):
        return np.full(env["shape"], math.pi, dtype=float)
    if isinstance(node, Var):
        return env[node.name]
    if isinstance(node, Unary):
        a = _eval(node.arg, env, points)
        op = node.op
        if op == "neg":
            return -a
        if op == "sin":
            return np.sin(a)
        if op == "cos":
            return np.cos(a)
        if op == "abs":
            return np.abs(a)
        if op == "sqrt":
            bad = a < 0
            if bad.any():
                _fail("sqrt of negative number", bad, points)
            return np.sqrt(a)
        if op == "exp":
            with np.errstate(over="ignore"):
                out = np.exp(a)
            return out
        if op == "log":
            bad = a <= 0
            if bad.any():
                _fail("log of non-positive number", bad, points)
            return np.log(a)
        raise AssertionError(op)
    if isinstance(node, Call):
        lo, hi, t = (_eval(arg, env, points) for arg in node.args)
        bad = ~(lo < hi)
        if bad.any():
            _fail("ramp with a >= b", bad, points)
        return np.clip((t - lo) / (hi - lo), 0.0, 1.0)
    a = _eval(node.left, env, points)
    b = _eval(node.right, env, points)
    op = node.op
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        bad = b == 0
        if bad.any():
            _fail("division by zero", bad, points)
        return a / b
    # ^
    integral = b == np.round(b)
    bad = (a < 0) & ~integral
    if bad.any():
        _fail("negative base with non-integer exponent", bad, points)
    bad = (a == 0) & (b < 0)
    if bad.any():
        _fail("zero raised to a negative power", bad, points)
    with np.errstate(over="ignore", invalid="ignore"):
        return np.power(a, b)


def evaluate(e: Expression, x, y=None) -> np.ndarray:
    """Evaluate ``e`` at arrays ``x`` (and ``y`` for bivariate expressions).

    Raises :class:`EvaluationDomainError` instead of returning NaN or inf.
    """
    x = np.asarray(x, dtype=float)
    if e.arity == 2:
        if y is None:
            raise ArityError("bivariate expression needs both x and y")
        y = np.asarray(y, dtype=float)
        x, y = np.broadcast_arrays(x, y)
        env = {"x": x, "y": y, "shape": x.shape}
        points = np.stack([x.ravel(), y.ravel()], axis=-1) if x.ndim else np.array([[x, y]])
    else:
        if y is not None:
            raise ArityError("univariate expression takes only x")
        env = {"x": x, "shape": x.shape}
        points = x.ravel() if x.ndim else np.array([x])
    with np.errstate(invalid="ignore", divide="ignore"):
        out = _eval(e.root, env, points)
    out = np.broadcast_to(out, env["shape"]).astype(float)
    bad = ~np.isfinite(out)
    if bad.any():
        flat = bad.ravel()
        _fail("non-finite result", flat, points)
    return out


def eval_expr(e: Expression, point) -> float:
    """Evaluate at a single real (arity 1) or real pair (arity 2)."""
    if e.arity == 2:
        try:
            px, py = point
        except (TypeError, ValueError):
            raise ArityError("bivariate expression needs a point (x, y)") from None
        return float(evaluate(e, px, py))
    if np.ndim(point) != 0:
        raise ArityError("univariate expression needs a scalar point")
    return float(evaluate(e, point))
