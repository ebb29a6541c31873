"""Integer index expressions over loop variables.

Small enough to evaluate in Python, print as C, and substitute into.
Constructors fold constants so printed nests stay readable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Union


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * // % min
    a: "Expr"
    b: "Expr"


Expr = Union[Var, Const, Bin]


def lift(x: Expr | int | str) -> Expr:
    if isinstance(x, int):
        return Const(x)
    if isinstance(x, str):
        return Var(x)
    return x


def add(a, b) -> Expr:
    a, b = lift(a), lift(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if a == Const(0):
        return b
    if b == Const(0):
        return a
    return Bin("+", a, b)


def sub(a, b) -> Expr:
    a, b = lift(a), lift(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if b == Const(0):
        return a
    return Bin("-", a, b)


def mul(a, b) -> Expr:
    a, b = lift(a), lift(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if a == Const(0) or b == Const(0):
        return Const(0)
    if a == Const(1):
        return b
    if b == Const(1):
        return a
    return Bin("*", a, b)


def floordiv(a, b) -> Expr:
    a, b = lift(a), lift(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value // b.value)
    if b == Const(1):
        return a
    return Bin("//", a, b)


def mod(a, b) -> Expr:
    a, b = lift(a), lift(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value % b.value)
    if b == Const(1):
        return Const(0)
    return Bin("%", a, b)


def minimum(a, b) -> Expr:
    a, b = lift(a), lift(b)
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(min(a.value, b.value))
    return Bin("min", a, b)


def evaluate(e: Expr, env: Mapping[str, int]) -> int:
    if isinstance(e, Const):
        return e.value
    if isinstance(e, Var):
        return env[e.name]
    a, b = evaluate(e.a, env), evaluate(e.b, env)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "//":
        return a // b
    if e.op == "%":
        return a % b
    if e.op == "min":
        return min(a, b)
    raise ValueError(f"unknown operator {e.op!r}")


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, Const):
        return e
    a, b = substitute(e.a, mapping), substitute(e.b, mapping)
    return _BUILD[e.op](a, b)


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Const):
        return set()
    return free_vars(e.a) | free_vars(e.b)


def c_ident(name: str) -> str:
    return name.replace(".", "_")


def to_c(e: Expr) -> str:
    # Loop variables are non-negative, so C's truncating / and % match floor semantics.
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Var):
        return c_ident(e.name)
    a, b = to_c(e.a), to_c(e.b)
    if e.op == "min":
        return f"MIN({a}, {b})"
    op = "/" if e.op == "//" else e.op
    return f"({a} {op} {b})"


def to_text(e: Expr) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    a, b = to_text(e.a), to_text(e.b)
    if e.op == "min":
        return f"min({a}, {b})"
    return f"({a} {e.op} {b})"


_BUILD = {"+": add, "-": sub, "*": mul, "//": floordiv, "%": mod, "min": minimum}
