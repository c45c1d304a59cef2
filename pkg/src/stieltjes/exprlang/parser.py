"""Tokenizer, recursive-descent parser and printer for the expression language.

Grammar (``^`` is right associative and binds tighter than unary minus)::

    expr    := sum
    sum     := product (("+" | "-") product)*
    product := unary (("*" | "/") unary)*
    unary   := ("-" | "+") unary | power
    power   := atom ("^" unary)?
    atom    := NUMBER | NAME | NAME "(" args ")" | "(" expr ")"
    args    := arg ("," arg)*
    arg     := sum (("<" | "<=" | ">" | ">=") sum)?

Comparisons are only allowed as the condition arguments of ``piecewise``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

VARIABLES = ("x", "y")
CONSTANTS = {"pi": math.pi, "e": math.e}
# name -> (min arity, max arity or None for unbounded)
FUNCTIONS = {
    "sin": (1, 1), "cos": (1, 1), "exp": (1, 1), "log": (1, 1), "abs": (1, 1),
    "step": (1, 1), "min": (2, None), "max": (2, None), "piecewise": (2, None),
}
COMPARISONS = ("<=", ">=", "<", ">")


class ExprSyntaxError(ValueError):
    """Parse failure with a 1-based line and column."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} at line {line}, column {col}")
        self.reason = message
        self.line = line
        self.col = col


# -- AST ------------------------------------------------------------------------
# Positions are kept for error messages but never take part in equality.

@dataclass(frozen=True)
class Num:
    value: float
    pos: tuple = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str
    pos: tuple = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class Const:
    name: str
    pos: tuple = field(default=(1, 1), compare=False, repr=False)

    @property
    def value(self) -> float:
        return CONSTANTS[self.name]


@dataclass(frozen=True)
class Neg:
    operand: "Expr"
    pos: tuple = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    pos: tuple = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple
    pos: tuple = field(default=(1, 1), compare=False, repr=False)


@dataclass(frozen=True)
class Compare:
    op: str
    left: "Expr"
    right: "Expr"
    pos: tuple = field(default=(1, 1), compare=False, repr=False)


Expr = Union[Num, Var, Const, Neg, BinOp, Call, Compare]


# -- tokenizer --------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><=|>=|[-+*/^(),<>])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens = []
    line, line_start, i = 1, 0, 0
    while i < len(source):
        m = _TOKEN.match(source, i)
        col = i - line_start + 1
        if m is None:
            raise ExprSyntaxError(f"unexpected character {source[i]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "ws":
            for j, ch in enumerate(text):
                if ch == "\n":
                    line += 1
                    line_start = i + j + 1
        else:
            tokens.append(Token(kind, text, line, col))
        i = m.end()
    tokens.append(Token("end", "", line, i - line_start + 1))
    return tokens


# -- parser -------------------------------------------------------------------------

class _Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.i = 0
        self.variables: dict[str, tuple] = {}

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def error(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        return ExprSyntaxError(message, tok.line, tok.col)

    def take(self, text: str | None = None) -> Token:
        tok = self.tok
        if text is not None and tok.text != text:
            found = "end of input" if tok.kind == "end" else repr(tok.text)
            raise self.error(f"expected {text!r}, found {found}")
        self.i += 1
        return tok

    def at(self, *texts: str) -> bool:
        return self.tok.kind == "op" and self.tok.text in texts

    def parse(self) -> Expr:
        if self.tok.kind == "end":
            raise self.error("empty expression")
        node = self.sum()
        if self.tok.kind != "end":
            raise self.error(f"unexpected {self.tok.text!r}")
        if len(self.variables) > 1:
            names = " and ".join(sorted(self.variables))
            line, col = max(self.variables.values())
            raise ExprSyntaxError(f"expression mixes variables {names}", line, col)
        return node

    def sum(self) -> Expr:
        node = self.product()
        while self.at("+", "-"):
            op = self.take()
            node = BinOp(op.text, node, self.product(), (op.line, op.col))
        return node

    def product(self) -> Expr:
        node = self.unary()
        while self.at("*", "/"):
            op = self.take()
            node = BinOp(op.text, node, self.unary(), (op.line, op.col))
        return node

    def unary(self) -> Expr:
        if self.at("-"):
            op = self.take()
            return Neg(self.unary(), (op.line, op.col))
        if self.at("+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.at("^"):
            op = self.take()
            return BinOp("^", base, self.unary(), (op.line, op.col))
        return base

    def atom(self) -> Expr:
        tok = self.tok
        pos = (tok.line, tok.col)
        if tok.kind == "num":
            self.take()
            return Num(float(tok.text), pos)
        if tok.kind == "name":
            self.take()
            if self.at("("):
                return self.call(tok)
            if tok.text in VARIABLES:
                self.variables.setdefault(tok.text, pos)
                return Var(tok.text, pos)
            if tok.text in CONSTANTS:
                return Const(tok.text, pos)
            if tok.text in FUNCTIONS:
                raise self.error(f"function {tok.text!r} needs arguments", tok)
            raise self.error(f"unknown identifier {tok.text!r}", tok)
        if self.at("("):
            self.take()
            node = self.sum()
            self.take(")")
            return node
        found = "end of input" if tok.kind == "end" else repr(tok.text)
        raise self.error(f"unexpected {found}")

    def call(self, name: Token) -> Expr:
        if name.text not in FUNCTIONS:
            raise self.error(f"unknown function {name.text!r}", name)
        self.take("(")
        args = [self.arg()]
        while self.at(","):
            self.take()
            args.append(self.arg())
        self.take(")")
        lo, hi = FUNCTIONS[name.text]
        if len(args) < lo or (hi is not None and len(args) > hi):
            want = str(lo) if lo == hi else f"at least {lo}"
            raise self.error(f"{name.text} takes {want} argument(s), got {len(args)}", name)
        if name.text == "piecewise":
            _check_piecewise(args, name)
        elif any(isinstance(a, Compare) for a in args):
            raise self.error(f"comparison not allowed as an argument of {name.text}", name)
        return Call(name.text, tuple(args), (name.line, name.col))

    def arg(self) -> Expr:
        left = self.sum()
        if self.tok.kind == "op" and self.tok.text in COMPARISONS:
            op = self.take()
            return Compare(op.text, left, self.sum(), (op.line, op.col))
        return left


def _check_piecewise(args: list, name: Token) -> None:
    # cond, value, cond, value, ..., [default]
    for k, a in enumerate(args):
        is_cond_slot = k % 2 == 0 and k != len(args) - 1
        if is_cond_slot and not isinstance(a, Compare):
            line, col = a.pos
            raise ExprSyntaxError("piecewise expects a comparison here", line, col)
        if not is_cond_slot and isinstance(a, Compare):
            line, col = a.pos
            raise ExprSyntaxError("piecewise expects a value here, not a comparison", line, col)


def parse(source: str) -> Expr:
    """Parse ``source`` into an AST.

    >>> parse("2*x - 1")
    BinOp(op='-', left=BinOp(op='*', left=Num(value=2.0), right=Var(name='x')), right=Num(value=1.0))
    """
    if not isinstance(source, str):
        raise TypeError("source must be a string")
    return _Parser(source).parse()


# -- printer ----------------------------------------------------------------------

def to_source(node: Expr) -> str:
    """Fully parenthesized source text; ``parse(to_source(e)) == e``.

    Literals print with ``repr`` so doubles survive the trip.  Only
    non-negative literals are produced by the parser, and only those
    round-trip: a negative ``Num`` reparses as ``Neg(Num(...))``.
    """
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, (Var, Const)):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Compare):
        # comparisons only appear as piecewise arguments, never parenthesized
        return f"{to_source(node.left)} {node.op} {to_source(node.right)}"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


def variables(node: Expr) -> set[str]:
    """Names of the variables occurring in ``node``."""
    if isinstance(node, Var):
        return {node.name}
    out: set[str] = set()
    for child in children(node):
        out |= variables(child)
    return out


def children(node: Expr) -> tuple:
    if isinstance(node, Neg):
        return (node.operand,)
    if isinstance(node, (BinOp, Compare)):
        return (node.left, node.right)
    if isinstance(node, Call):
        return node.args
    return ()
