"""
Guard and action expressions attached to trigger arcs.

The language is deliberately small: integer literals, names, ``now()``,
``+ - *``, comparisons, and ``and``/``or``/``not``.  A bare name that is not
a declared variable evaluates to itself, which is how enum values are
written (``light == on``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Union

Value = Union[int, str, bool]


class ExprError(ValueError):
    """Raised for malformed expression text; ``column`` is 0-based."""

    def __init__(self, message: str, column: int = 0):
        super().__init__(message)
        self.column = column


@dataclass(frozen=True)
class Num:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class Name:
    id: str

    def __str__(self) -> str:
        return self.id


@dataclass(frozen=True)
class Now:
    def __str__(self) -> str:
        return "now()"


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"

    def __str__(self) -> str:
        inner = _wrap(self.operand, _PREC_UNARY if self.op == "-" else _PREC_NOT)
        return f"-{inner}" if self.op == "-" else f"not {inner}"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"

    def __str__(self) -> str:
        prec = _BINARY_PREC[self.op]
        # all binary operators are left-associative; comparisons do not chain
        rprec = prec + 1
        lprec = prec + 1 if self.op in _COMPARISONS else prec
        return f"{_wrap(self.left, lprec)} {self.op} {_wrap(self.right, rprec)}"


Expr = Union[Num, Name, Now, Unary, Binary]


@dataclass(frozen=True)
class Assign:
    target: str
    value: Expr

    def __str__(self) -> str:
        return f"{self.target} := {self.value}"


_COMPARISONS = ("<", "<=", "==", "!=", ">=", ">")
_BINARY_PREC = {"or": 1, "and": 2, **{op: 4 for op in _COMPARISONS}, "+": 5, "-": 5, "*": 6}
_PREC_NOT = 3
_PREC_UNARY = 7
_PREC_ATOM = 8


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _BINARY_PREC[e.op]
    if isinstance(e, Unary):
        return _PREC_UNARY if e.op == "-" else _PREC_NOT
    return _PREC_ATOM


def _wrap(e: Expr, min_prec: int) -> str:
    text = str(e)
    return f"({text})" if _prec(e) < min_prec else text


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>:=|<=|>=|==|!=|[<>+\-*(),]))"
)
_KEYWORDS = {"and", "or", "not"}


def tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            col = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExprError(f"unexpected character {text[col]!r}", col)
        kind = m.lastgroup
        value = m.group(kind)
        if kind == "name" and value in _KEYWORDS:
            kind = "op"
        tokens.append((kind, value, m.start(kind)))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0
        self.end = len(text)

    def peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, value: str | None = None) -> tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise ExprError("unexpected end of expression", self.end)
        if value is not None and tok[1] != value:
            raise ExprError(f"expected {value!r}, got {tok[1]!r}", tok[2])
        self.pos += 1
        return tok

    def at(self, *values: str) -> bool:
        tok = self.peek()
        return tok is not None and tok[0] == "op" and tok[1] in values

    def done(self) -> None:
        tok = self.peek()
        if tok is not None:
            raise ExprError(f"unexpected {tok[1]!r}", tok[2])

    def expr(self, min_prec: int = 1) -> Expr:
        if self.at("not") and min_prec <= _PREC_NOT:
            self.take()
            left: Expr = Unary("not", self.expr(_PREC_NOT))
        else:
            left = self.arith(min_prec)
        while True:
            tok = self.peek()
            if tok is None or tok[0] != "op" or tok[1] not in _BINARY_PREC:
                return left
            prec = _BINARY_PREC[tok[1]]
            if prec < min_prec:
                return left
            self.take()
            right = self.expr(prec + 1)
            if tok[1] in _COMPARISONS and self.at(*_COMPARISONS):
                raise ExprError("comparisons do not chain", self.peek()[2])
            left = Binary(tok[1], left, right)

    def arith(self, min_prec: int) -> Expr:
        if self.at("-"):
            self.take()
            operand = self.arith(_PREC_UNARY)
            if isinstance(operand, Num):
                return Num(-operand.value)
            return Unary("-", operand)
        return self.atom()

    def atom(self) -> Expr:
        kind, value, col = self.take()
        if kind == "num":
            return Num(int(value))
        if kind == "name":
            if value == "now" and self.at("("):
                self.take("(")
                self.take(")")
                return Now()
            return Name(value)
        if value == "(":
            inner = self.expr()
            self.take(")")
            return inner
        raise ExprError(f"unexpected {value!r}", col)


def parse_expr(text: str) -> Expr:
    p = _Parser(text)
    if p.peek() is None:
        raise ExprError("empty expression", 0)
    e = p.expr()
    p.done()
    return e


def parse_action(text: str) -> Assign:
    """Parse ``<var> := <expr>``."""
    p = _Parser(text)
    kind, target, col = p.take()
    if kind != "name":
        raise ExprError("action must start with a variable name", col)
    p.take(":=")
    value = p.expr()
    p.done()
    return Assign(target, value)


def parse_actions(text: str) -> tuple[Assign, ...]:
    parts = [part for part in text.split(";") if part.strip()]
    return tuple(parse_action(part) for part in parts)


def names(e: Expr) -> set[str]:
    if isinstance(e, Name):
        return {e.id}
    if isinstance(e, Unary):
        return names(e.operand)
    if isinstance(e, Binary):
        return names(e.left) | names(e.right)
    return set()


def evaluate(e: Expr, env: Mapping[str, Value], now: int = 0) -> Value:
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Name):
        return env.get(e.id, e.id)
    if isinstance(e, Now):
        return now
    if isinstance(e, Unary):
        v = evaluate(e.operand, env, now)
        if e.op == "not":
            return not v
        return -_int(v, e)
    op = e.op
    if op == "and":
        return bool(evaluate(e.left, env, now)) and bool(evaluate(e.right, env, now))
    if op == "or":
        return bool(evaluate(e.left, env, now)) or bool(evaluate(e.right, env, now))
    a = evaluate(e.left, env, now)
    b = evaluate(e.right, env, now)
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    a, b = _int(a, e), _int(b, e)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">=":
        return a >= b
    return a > b


def _int(v: Value, where: Expr) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise TypeError(f"numeric operand expected in {where}, got {v!r}")
    return v
