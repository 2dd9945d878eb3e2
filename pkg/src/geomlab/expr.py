"""Closed-form expressions over chart coordinates.

Grammar (lowest to highest precedence)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | FUNC '(' expr ')' | '(' expr ')'

``^`` is right-associative and binds tighter than unary minus, so
``-x^2`` is ``-(x^2)``.  Exponents must be free of variables.

Evaluation is generic over the scalar algebra: plain floats or
:class:`geomlab.jet.Jet2` values.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from decimal import Decimal
from typing import Mapping, Sequence, Union

from .jet import DomainError, Jet2

UNARY_FUNCS = ("sqrt", "exp", "log", "sin", "cos", "tanh", "abs")
BINARY_OPS = ("add", "sub", "mul", "div", "pow")
_SYMBOL = {"add": "+", "sub": "-", "mul": "*", "div": "/", "pow": "^"}

# integer exponents up to this size are expanded into repeated products
_MAX_INT_POWER = 64


class ExprError(ValueError):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


ExprDomainError = DomainError


@dataclass(frozen=True)
class Const:
    value: float
    text: str


@dataclass(frozen=True)
class Var:
    name: str
    kind: str  # "coord" or "param"
    index: int  # coordinate index; -1 for parameters


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of UNARY_FUNCS
    arg: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Const, Var, Unary, Binary]
Scalar = Union[float, Jet2]


def const(value: float) -> Const:
    text = repr(float(value))
    return Const(float(Decimal(text)), text)


# ---------------------------------------------------------------------------
# tokenizer / parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    while pos < len(source):
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            bad = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {source[bad]!r}", bad)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(source)))
    return tokens


class _Parser:
    def __init__(self, source, coords, params):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.coords = {name: i for i, name in enumerate(coords)}
        self.params = set(params)

    def peek(self):
        return self.tokens[self.pos]

    def take(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value):
        kind, text, offset = self.take()
        if text != value or kind != "op":
            found = text if kind != "end" else "end of input"
            raise ExprSyntaxError(f"expected {value!r}, found {found!r}", offset)

    def parse(self):
        node = self.expr()
        kind, text, offset = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {text!r}", offset)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = "add" if self.take()[1] == "+" else "sub"
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = "mul" if self.take()[1] == "*" else "div"
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[:2] == ("op", "-"):
            self.take()
            return Unary("neg", self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[:2] == ("op", "^"):
            offset = self.take()[2]
            exponent = self.unary()
            if _has_variables(exponent):
                raise ExprSyntaxError("exponent must be a constant expression", offset)
            return Binary("pow", base, exponent)
        return base

    def atom(self):
        kind, text, offset = self.take()
        if kind == "num":
            return Const(float(Decimal(text)), text)
        if kind == "name":
            if text in UNARY_FUNCS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Unary(text, arg)
            if text in self.coords:
                return Var(text, "coord", self.coords[text])
            if text in self.params:
                return Var(text, "param", -1)
            raise UnknownIdentifierError(text, offset)
        if (kind, text) == ("op", "("):
            node = self.expr()
            self.expect(")")
            return node
        found = text if kind != "end" else "end of input"
        raise ExprSyntaxError(f"unexpected token {found!r}", offset)


def _has_variables(node: Expr) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Unary):
        return _has_variables(node.arg)
    if isinstance(node, Binary):
        return _has_variables(node.left) or _has_variables(node.right)
    return False


def parse(source: str, coords: Sequence[str], params: Sequence[str] = ()) -> Expr:
    """Parse ``source`` into an expression tree.

    ``coords`` and ``params`` declare the admissible identifiers; anything
    else raises :class:`UnknownIdentifierError`.
    """
    if not source or not source.strip():
        raise ExprSyntaxError("empty expression", 0)
    clash = (set(coords) & set(params)) | (set(coords) | set(params)) & set(UNARY_FUNCS)
    if clash:
        raise ExprError(f"identifier(s) declared twice or reserved: {sorted(clash)}")
    return _Parser(source, list(coords), list(params)).parse()


def to_text(node: Expr) -> str:
    """Fully parenthesized form; ``parse(to_text(e))`` reproduces ``e``."""
    if isinstance(node, Const):
        return node.text
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{to_text(node.arg)})"
        return f"{node.op}({to_text(node.arg)})"
    return f"({to_text(node.left)} {_SYMBOL[node.op]} {to_text(node.right)})"


def variables(node: Expr) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Unary):
        return variables(node.arg)
    if isinstance(node, Binary):
        return variables(node.left) | variables(node.right)
    return set()


# ---------------------------------------------------------------------------
# evaluation


def _float_unary(op: str, x: float) -> float:
    if op == "neg":
        return -x
    if op == "sqrt":
        if x < 0:
            raise ExprDomainError(f"sqrt of negative value {x!r}")
        return math.sqrt(x)
    if op == "log":
        if x <= 0:
            raise ExprDomainError(f"log of non-positive value {x!r}")
        return math.log(x)
    if op == "exp":
        try:
            return math.exp(x)
        except OverflowError as exc:
            raise ExprDomainError(f"exp overflow at {x!r}") from exc
    if op == "abs":
        return abs(x)
    return getattr(math, op)(x)


def _int_power(base: Scalar, k: int) -> Scalar:
    if k == 0:
        return base * 0.0 + 1.0
    result = base
    for _ in range(abs(k) - 1):
        result = result * base
    if k < 0:
        result = _divide(1.0, result)
    return result


def _divide(a: Scalar, b: Scalar) -> Scalar:
    bv = b.value if isinstance(b, Jet2) else b
    if bv == 0:
        raise ExprDomainError("division by zero")
    return a / b


def _power(base: Scalar, exponent: float) -> Scalar:
    if exponent == int(exponent) and abs(exponent) <= _MAX_INT_POWER:
        return _int_power(base, int(exponent))
    bv = base.value if isinstance(base, Jet2) else base
    if bv <= 0:
        raise ExprDomainError(f"non-integer power {exponent!r} of non-positive base {bv!r}")
    if isinstance(base, Jet2):
        return base.powc(exponent)
    return bv**exponent


def evaluate(node: Expr, point: Sequence[Scalar], params: Mapping[str, float] | None = None) -> Scalar:
    """Evaluate ``node`` at ``point``; entries of ``point`` may be floats or jets."""
    params = params or {}
    return _eval(node, point, params)


def _eval(node, point, params):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        if node.kind == "coord":
            return point[node.index]
        try:
            return float(params[node.name])
        except KeyError:
            raise ExprError(f"no value for parameter {node.name!r}") from None
    if isinstance(node, Unary):
        x = _eval(node.arg, point, params)
        if isinstance(x, Jet2):
            return x.apply(node.op)
        return _float_unary(node.op, x)
    if node.op == "pow":
        exponent = _eval(node.right, (), params)
        return _power(_eval(node.left, point, params), float(exponent))
    a = _eval(node.left, point, params)
    b = _eval(node.right, point, params)
    if node.op == "add":
        return a + b
    if node.op == "sub":
        return a - b
    if node.op == "mul":
        return a * b
    return _divide(a, b)
