"""Metric expression language: lexer, recursive-descent parser, evaluators.

Grammar (see docs/grammar.md)::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("-" | "+") unary | power
    power  := atom ("^" unary)?
    atom   := NUMBER | VAR | "pi" | FUNC "(" expr ")" | "(" expr ")"
    VAR    := ("x" | "y") DIGITS
    FUNC   := "sqrt" | "exp" | "log" | "sin" | "cos"

``^`` binds tighter than unary minus (``-y1^2`` is ``-(y1^2)``) and is right
associative; the other binary operators associate to the left.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

from . import ad

GRAMMAR_VERSION = "1"
FUNCTIONS = tuple(ad.ELEMENTARY)


class ExprError(ValueError):
    """Parse error carrying a 0-based character offset into the source."""

    def __init__(self, position: int, message: str):
        self.position = position
        self.message = message
        super().__init__(f"{message} (column {position + 1})")

    @property
    def column(self) -> int:
        return self.position + 1


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # "x" or "y"
    index: int  # 1-based


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Node"


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / ^
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Num, Var, Unary, Binary, Call]


@dataclass(frozen=True)
class ExprAst:
    root: Node
    dim: int
    source: str = ""

    def variables(self) -> set[tuple[str, int]]:
        out: set[tuple[str, int]] = set()
        stack = [self.root]
        while stack:
            node = stack.pop()
            if isinstance(node, Var):
                out.add((node.kind, node.index))
            elif isinstance(node, Unary):
                stack.append(node.operand)
            elif isinstance(node, Binary):
                stack.extend((node.left, node.right))
            elif isinstance(node, Call):
                stack.append(node.arg)
        return out

    def depends_on(self, kind: str) -> bool:
        return any(k == kind for k, _ in self.variables())

    def __str__(self) -> str:
        return to_text(self)


# ---------------------------------------------------------------------------
# lexer

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^(),])
""", re.VERBOSE)

_VAR = re.compile(r"([xy])(\d+)$")


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, name, op, end
    text: str
    pos: int


def _tokenize(src: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExprError(pos, f"unexpected character {src[pos]!r}")
        if m.lastgroup != "ws":
            toks.append(_Tok(m.lastgroup, m.group(), pos))
        pos = m.end()
    toks.append(_Tok("end", "", len(src)))
    return toks


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, src: str, dim: int):
        self.src = src
        self.dim = dim
        self.toks = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> None:
        if self.tok.text != text or self.tok.kind != "op":
            found = "end of input" if self.tok.kind == "end" else repr(self.tok.text)
            raise ExprError(self.tok.pos, f"expected {text!r}, found {found}")
        self.advance()

    def parse(self) -> Node:
        node = self.expr()
        if self.tok.kind != "end":
            raise ExprError(self.tok.pos, f"unexpected {self.tok.text!r}")
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            operand = self.unary()
            return operand if op == "+" else Unary("-", operand)
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            return Binary("^", base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "name":
            self.advance()
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            if tok.text == "pi":
                return Num(math.pi)
            m = _VAR.match(tok.text)
            if m is None:
                raise ExprError(tok.pos, f"unknown identifier {tok.text!r}")
            index = int(m.group(2))
            if not 1 <= index <= self.dim:
                raise ExprError(
                    tok.pos, f"variable index out of range: {tok.text} (dim {self.dim})")
            return Var(m.group(1), index)
        if tok.kind == "end":
            raise ExprError(tok.pos, "unexpected end of input")
        raise ExprError(tok.pos, f"unexpected {tok.text!r}")


def parse(src: str, dim: int) -> ExprAst:
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    return ExprAst(_Parser(src, dim).parse(), dim, src)


# ---------------------------------------------------------------------------
# evaluation


def _eval(node: Node, env: dict[tuple[str, int], object]):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return env[(node.kind, node.index)]
    if isinstance(node, Unary):
        return -_eval(node.operand, env)
    if isinstance(node, Call):
        return ad.ELEMENTARY[node.func](_eval(node.arg, env))
    left = _eval(node.left, env)
    if node.op == "^" and isinstance(node.right, Num):
        return _power(left, node.right.value)
    right = _eval(node.right, env)
    if node.op == "+":
        return left + right
    if node.op == "-":
        return left - right
    if node.op == "*":
        return left * right
    if node.op == "/":
        if not isinstance(right, ad.Jet) and abs(right) <= ad.SINGULAR_EPS:
            raise ad.DomainError("division by a value near zero")
        return left / right
    return _power(left, right)


def _power(base, p):
    if isinstance(base, ad.Jet) or isinstance(p, ad.Jet):
        return base ** p
    if float(p).is_integer():
        if base == 0.0 and p < 0:
            raise ad.DomainError("division by a value near zero")
        return base ** int(p)
    if base <= ad.SINGULAR_EPS:
        raise ad.DomainError(f"non-integer power {p} of a non-positive value")
    return base ** p


def _env(ast: ExprAst, x, y) -> dict:
    if len(x) != ast.dim or len(y) != ast.dim:
        raise ValueError(f"point dimension does not match expression dimension {ast.dim}")
    env = {("x", i + 1): v for i, v in enumerate(x)}
    env.update({("y", i + 1): v for i, v in enumerate(y)})
    return env


def evaluate(ast: ExprAst, x, y) -> float:
    """Plain floating-point evaluation."""
    return float(_eval(ast.root, _env(ast, [float(v) for v in x], [float(v) for v in y])))


def evaluate_on(ast: ExprAst, variables) -> ad.Jet:
    """Evaluate with pre-seeded variable Jets ordered (x^1..x^m, y^1..y^m)."""
    m = ast.dim
    out = _eval(ast.root, _env(ast, variables[:m], variables[m:]))
    return ad.as_jet(out, variables[0])


def eval_jet(ast: ExprAst, point, order: int) -> ad.Jet:
    """Jet of ``ast`` at a chart point, derivatives up to ``order``."""
    if len(point.x) != ast.dim:
        raise ValueError(
            f"point dimension {len(point.x)} does not match expression dimension {ast.dim}")
    return evaluate_on(ast, ad.seed(point, order))


# ---------------------------------------------------------------------------
# printing

def _fmt(node: Node) -> str:
    if isinstance(node, Num):
        return repr(node.value) if node.value >= 0 else f"({node.value!r})"
    if isinstance(node, Var):
        return f"{node.kind}{node.index}"
    if isinstance(node, Unary):
        return f"(-{_fmt(node.operand)})"
    if isinstance(node, Call):
        return f"{node.func}({_fmt(node.arg)})"
    return f"({_fmt(node.left)} {node.op} {_fmt(node.right)})"


def to_text(ast: ExprAst) -> str:
    """Fully parenthesized source text that reparses to the same tree."""
    return _fmt(ast.root)
