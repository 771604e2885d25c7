"""Small expression language for scalar functions of y1..yn.

The grammar is a conventional infix calculator language over a closed set
of smooth primitives, chosen so that every primitive has closed-form first
and second derivatives:

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := '-' unary | power
    power   := atom ('^' exponent)*          # left-associative
    exponent:= '-' exponent | NUMBER | '(' exponent ')'
    atom    := NUMBER | VARIABLE | FUNC '(' expr ')' | '(' expr ')'

Variables are y1..yn.  Functions: exp, log, sqrt, sin, cos, tanh,
logistic, erf, atan.  Exponents must be numeric literals; a literal
without a decimal point or exponent field is treated as an integer power
(evaluated by repeated multiplication, so negative bases are fine), any
other literal is a real power (positive base required).

Trees are immutable; parsing the pretty-printed form of a tree yields a
tree with identical evaluation semantics.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import ExpressionSyntaxError

UNARY_FUNCS = (
    "exp", "log", "sqrt", "sin", "cos", "tanh", "logistic", "erf", "atan",
)

# Precedence levels used by the printer (higher binds tighter).
_PREC_ADD, _PREC_MUL, _PREC_UNARY, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5

_MAX_INT_EXPONENT = 512


@dataclass(frozen=True)
class Node:
    def children(self) -> tuple["Node", ...]:
        return ()


@dataclass(frozen=True)
class Const(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    index: int  # zero-based


@dataclass(frozen=True)
class Unary(Node):
    fn: str  # 'neg' or one of UNARY_FUNCS
    arg: Node

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class Binary(Node):
    op: str  # '+', '-', '*', '/'
    left: Node
    right: Node

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True)
class Power(Node):
    base: Node
    exponent: float
    is_integer: bool

    def children(self):
        return (self.base,)


@dataclass(frozen=True)
class ExpressionTree:
    """A parsed scalar function of ``dimension`` real variables."""

    root: Node
    dimension: int
    source_text: str

    def to_text(self) -> str:
        return _print(self.root, 0)

    def evaluate(self, point):
        # One-point convenience wrapper; batch evaluation lives in autodiff.
        from .autodiff import FunctionModel

        return FunctionModel(self).value(point)


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


@dataclass
class _Token:
    kind: str  # 'num' | 'name' | 'op' | 'end'
    text: str
    offset: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:  # trailing whitespace
                break
            bad = len(text) - len(stripped)
            raise ExpressionSyntaxError(
                f"unexpected character {text[bad]!r}", bad)
        for kind in ("num", "name", "op"):
            if m.group(kind) is not None:
                tokens.append(_Token(kind, m.group(kind), m.start(kind)))
                break
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, dimension: int):
        self.text = text
        self.dimension = dimension
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        tok = self.advance()
        if tok.kind != "op" or tok.text != op:
            raise ExpressionSyntaxError(
                f"expected {op!r}, found {tok.text!r}" if tok.text
                else f"expected {op!r}, found end of input", tok.offset)

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionSyntaxError(
                f"unexpected trailing input {tok.text!r}", tok.offset)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.advance()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> Node:
        node = self.atom()
        while self.peek().kind == "op" and self.peek().text == "^":
            tok = self.advance()
            value, is_int = self.exponent()
            if is_int and abs(value) > _MAX_INT_EXPONENT:
                raise ExpressionSyntaxError(
                    f"integer exponent magnitude exceeds {_MAX_INT_EXPONENT}",
                    tok.offset)
            node = Power(node, value, is_int)
        return node

    def exponent(self) -> tuple[float, bool]:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            value, is_int = self.exponent()
            return -value, is_int
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            value, is_int = self.exponent()
            self.expect_op(")")
            return value, is_int
        if tok.kind == "num":
            self.advance()
            is_int = re.fullmatch(r"\d+", tok.text) is not None
            return (int(tok.text) if is_int else float(tok.text)), is_int
        raise ExpressionSyntaxError(
            "exponent must be a numeric literal", tok.offset)

    def atom(self) -> Node:
        tok = self.advance()
        if tok.kind == "num":
            return Const(float(tok.text))
        if tok.kind == "name":
            m = re.fullmatch(r"y(\d+)", tok.text)
            if m is not None:
                index = int(m.group(1))
                if not 1 <= index <= self.dimension:
                    raise ExpressionSyntaxError(
                        f"variable y{index} out of range for dimension "
                        f"{self.dimension}", tok.offset)
                return Var(index - 1)
            if tok.text in UNARY_FUNCS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Unary(tok.text, arg)
            raise ExpressionSyntaxError(
                f"unknown identifier {tok.text!r}", tok.offset)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise ExpressionSyntaxError(
            f"unexpected token {tok.text!r}" if tok.text
            else "unexpected end of input", tok.offset)


def parse_expression(text: str, dimension: int) -> ExpressionTree:
    """Parse ``text`` as a function of y1..y<dimension>.

    Raises ExpressionSyntaxError (with character offset) on malformed
    input, unknown identifiers, or variable indices above ``dimension``.
    """
    if not isinstance(dimension, int) or dimension < 1:
        raise ValueError(f"dimension must be a positive integer, got {dimension}")
    if not text or not text.strip():
        raise ExpressionSyntaxError("empty expression", 0)
    root = _Parser(text, dimension).parse()
    return ExpressionTree(root=root, dimension=dimension, source_text=text)


def _prec(node: Node) -> int:
    if isinstance(node, (Const, Var)):
        return _PREC_ATOM
    if isinstance(node, Power):
        return _PREC_POW
    if isinstance(node, Unary):
        return _PREC_ATOM if node.fn != "neg" else _PREC_UNARY
    return _PREC_ADD if node.op in "+-" else _PREC_MUL


def _print(node: Node, parent_prec: int) -> str:
    if isinstance(node, Const):
        text = repr(node.value)
        return f"({text})" if node.value < 0 and parent_prec > _PREC_ADD else text
    if isinstance(node, Var):
        return f"y{node.index + 1}"
    if isinstance(node, Unary):
        if node.fn == "neg":
            inner = _print(node.arg, _PREC_UNARY)
            text = f"-{inner}"
            return f"({text})" if parent_prec > _PREC_UNARY else text
        return f"{node.fn}({_print(node.arg, 0)})"
    if isinstance(node, Power):
        base = _print(node.base, _PREC_POW + 1)
        # Left-assoc chains print without parens: (a^b)^c -> a^b^c.
        if isinstance(node.base, Power):
            base = _print(node.base, _PREC_POW)
        exp = repr(int(node.exponent)) if node.is_integer else repr(node.exponent)
        if node.exponent < 0:
            exp = f"({exp})"
        text = f"{base}^{exp}"
        return f"({text})" if parent_prec > _PREC_POW else text
    prec = _prec(node)
    left = _print(node.left, prec)
    # '-' and '/' are left-associative: the right child needs parens at
    # equal precedence.
    right = _print(node.right, prec + (1 if node.op in "-/" else 0))
    text = f"{left} {node.op} {right}"
    return f"({text})" if parent_prec > prec else text


# --- symbolic differentiation (structure only, used by the growth
# classifier; all numeric derivatives go through the dual-number backend).

_ZERO = Const(0.0)
_ONE = Const(1.0)


def _is_const(node: Node, value: float) -> bool:
    return isinstance(node, Const) and node.value == value


def _add(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Binary("+", a, b)


def _sub(a: Node, b: Node) -> Node:
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return Unary("neg", b)
    return Binary("-", a, b)


def _mul(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return _ZERO
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Binary("*", a, b)


def _div(a: Node, b: Node) -> Node:
    if _is_const(a, 0.0):
        return _ZERO
    return Binary("/", a, b)


def derivative_tree(node: Node, index: int) -> Node:
    """d(node)/d y_index as an unsimplified tree (zero/one folding only)."""
    if isinstance(node, Const):
        return _ZERO
    if isinstance(node, Var):
        return _ONE if node.index == index else _ZERO
    if isinstance(node, Binary):
        du = derivative_tree(node.left, index)
        dv = derivative_tree(node.right, index)
        u, v = node.left, node.right
        if node.op == "+":
            return _add(du, dv)
        if node.op == "-":
            return _sub(du, dv)
        if node.op == "*":
            return _add(_mul(du, v), _mul(u, dv))
        return _sub(_div(du, v), _div(_mul(u, dv), Power(v, 2, True)))
    if isinstance(node, Power):
        du = derivative_tree(node.base, index)
        k = node.exponent
        if k == 0:
            return _ZERO
        scaled = _mul(Const(float(k)),
                      Power(node.base, k - 1, node.is_integer))
        return _mul(scaled, du)
    assert isinstance(node, Unary)
    du = derivative_tree(node.arg, index)
    u = node.arg
    if node.fn == "neg":
        return _ZERO if _is_const(du, 0.0) else _sub(_ZERO, du)
    outer = {
        "exp": lambda: Unary("exp", u),
        "log": lambda: _div(_ONE, u),
        "sqrt": lambda: _div(Const(0.5), Unary("sqrt", u)),
        "sin": lambda: Unary("cos", u),
        "cos": lambda: _sub(_ZERO, Unary("sin", u)),
        "tanh": lambda: _sub(_ONE, Power(Unary("tanh", u), 2, True)),
        "logistic": lambda: _mul(Unary("logistic", u),
                                 _sub(_ONE, Unary("logistic", u))),
        "erf": lambda: _mul(Const(1.1283791670955126),  # 2/sqrt(pi)
                            Unary("exp", _sub(_ZERO, Power(u, 2, True)))),
        "atan": lambda: _div(_ONE, _add(_ONE, Power(u, 2, True))),
    }[node.fn]()
    return _mul(outer, du)


def gradient_trees(tree: ExpressionTree) -> list[Node]:
    return [derivative_tree(tree.root, i) for i in range(tree.dimension)]
