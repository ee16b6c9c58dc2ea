"""Lexer and integer expression trees shared by the model and property parsers."""

from __future__ import annotations

import dataclasses as d
import re
import typing as t
from fractions import Fraction

from .errors import ModelSemanticError, ModelSyntaxError

_TOKEN_SPEC = [
    ("COMMENT", r"//[^\n]*"),
    ("NEWLINE", r"\n"),
    ("SPACE", r"[ \t\r]+"),
    ("DECIMAL", r"\d+\.\d+"),
    ("INT", r"\d+"),
    ("STRING", r'"[^"\n]*"'),
    ("IDENT", r"[A-Za-z_][A-Za-z_0-9]*"),
    ("OP", r"\.\.|->|<=|>=|!=|[=<>&|!+\-*/()\[\]:;',]"),
]
_TOKEN_RE = re.compile("|".join(f"(?P<{name}>{pattern})" for name, pattern in _TOKEN_SPEC))


@d.dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int
    offset: int


def tokenize(source: str, error_cls: type[ModelSyntaxError] = ModelSyntaxError) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            raise error_cls(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = match.lastgroup
        assert kind is not None
        if kind == "NEWLINE":
            line += 1
            line_start = match.end()
        elif kind not in ("SPACE", "COMMENT"):
            tokens.append(Token(kind, match.group(), line, pos - line_start + 1, pos))
        pos = match.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1, pos))
    return tokens


class TokenStream:
    def __init__(self, source: str, error_cls: type[ModelSyntaxError] = ModelSyntaxError) -> None:
        self.error_cls = error_cls
        self.source = source
        self.tokens = tokenize(source, error_cls)
        self.index = 0

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.index + offset, len(self.tokens) - 1)]

    def at(self, text: str) -> bool:
        tok = self.current
        return tok.kind in ("OP", "IDENT") and tok.text == text

    def accept(self, text: str) -> Token | None:
        if self.at(text):
            return self.advance()
        return None

    def expect(self, text: str) -> Token:
        tok = self.accept(text)
        if tok is None:
            raise self.error(f"expected {text!r}, found {self.current.text or 'end of input'!r}")
        return tok

    def expect_kind(self, kind: str, what: str) -> Token:
        if self.current.kind != kind:
            raise self.error(f"expected {what}, found {self.current.text or 'end of input'!r}")
        return self.advance()

    def advance(self) -> Token:
        tok = self.current
        if tok.kind != "EOF":
            self.index += 1
        return tok

    def error(self, message: str, tok: Token | None = None) -> ModelSyntaxError:
        tok = tok or self.current
        return self.error_cls(message, tok.line, tok.column)


# -- integer/boolean expressions ------------------------------------------------

CMP_OPS = ("=", "!=", "<", "<=", ">", ">=")


@d.dataclass(frozen=True)
class Num:
    value: int


@d.dataclass(frozen=True)
class Var:
    name: str


@d.dataclass(frozen=True)
class Unary:
    op: str  # "-" or "!"
    operand: "Expr"


@d.dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = t.Union[Num, Var, Unary, Binary]

_BINARY_LEVELS: list[tuple[str, ...]] = [("|",), ("&",), ("!",), CMP_OPS, ("+", "-"), ("*",)]
_NOT_LEVEL = 2


def parse_expr(ts: TokenStream, level: int = 0) -> Expr:
    """Precedence climbing: ``|`` < ``&`` < ``!`` < comparisons < ``+ -`` < ``*``."""
    if level == len(_BINARY_LEVELS):
        return _parse_unary(ts)
    if level == _NOT_LEVEL:
        if ts.accept("!"):
            return Unary("!", parse_expr(ts, level))
        return parse_expr(ts, level + 1)
    left = parse_expr(ts, level + 1)
    ops = _BINARY_LEVELS[level]
    while ts.current.kind == "OP" and ts.current.text in ops:
        op = ts.advance().text
        right = parse_expr(ts, level + 1)
        left = Binary(op, left, right)
        if ops is CMP_OPS and ts.current.kind == "OP" and ts.current.text in CMP_OPS:
            raise ts.error("comparison operators do not chain")
    return left


def _parse_unary(ts: TokenStream) -> Expr:
    if ts.accept("-"):
        operand = _parse_unary(ts)
        if isinstance(operand, Num):
            return Num(-operand.value)
        return Unary("-", operand)
    tok = ts.current
    if tok.kind == "INT":
        ts.advance()
        return Num(int(tok.text))
    if tok.kind == "DECIMAL":
        raise ts.error("decimal literal in an integer expression")
    if tok.kind == "IDENT":
        ts.advance()
        if tok.text == "true":
            return Num(1)
        if tok.text == "false":
            return Num(0)
        return Var(tok.text)
    if ts.accept("("):
        inner = parse_expr(ts)
        ts.expect(")")
        return inner
    raise ts.error(f"expected an expression, found {tok.text or 'end of input'!r}")


def eval_expr(expr: Expr, env: t.Mapping[str, int]) -> int:
    """Evaluate with booleans represented as 0/1, as the compiled kernels do."""
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        return env[expr.name]
    if isinstance(expr, Unary):
        value = eval_expr(expr.operand, env)
        return -value if expr.op == "-" else int(value == 0)
    a = eval_expr(expr.left, env)
    op = expr.op
    if op == "&":
        return int(a != 0 and eval_expr(expr.right, env) != 0)
    if op == "|":
        return int(a != 0 or eval_expr(expr.right, env) != 0)
    b = eval_expr(expr.right, env)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    return int(compare(op, a, b))


def compare(op: str, a: int, b: int) -> bool:
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    raise ValueError(f"unknown comparison {op!r}")


def expr_names(expr: Expr) -> set[str]:
    if isinstance(expr, Var):
        return {expr.name}
    if isinstance(expr, Unary):
        return expr_names(expr.operand)
    if isinstance(expr, Binary):
        return expr_names(expr.left) | expr_names(expr.right)
    return set()


def substitute(expr: Expr, constants: t.Mapping[str, int]) -> Expr:
    if isinstance(expr, Var) and expr.name in constants:
        return Num(constants[expr.name])
    if isinstance(expr, Unary):
        return Unary(expr.op, substitute(expr.operand, constants))
    if isinstance(expr, Binary):
        return Binary(expr.op, substitute(expr.left, constants), substitute(expr.right, constants))
    return expr


def format_expr(expr: Expr) -> str:
    if isinstance(expr, Num):
        return str(expr.value) if expr.value >= 0 else f"({expr.value})"
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Unary):
        return f"({expr.op}({format_expr(expr.operand)}))"
    return f"({format_expr(expr.left)} {expr.op} {format_expr(expr.right)})"


# -- probability weights --------------------------------------------------------


def parse_weight(ts: TokenStream, constants: t.Mapping[str, int]) -> Fraction:
    """Exact rational weight: decimal literals and integer constants under + - * /."""
    value = _weight_term(ts, constants)
    while ts.current.kind == "OP" and ts.current.text in ("+", "-"):
        op = ts.advance().text
        rhs = _weight_term(ts, constants)
        value = value + rhs if op == "+" else value - rhs
    return value


def _weight_term(ts: TokenStream, constants: t.Mapping[str, int]) -> Fraction:
    value = _weight_atom(ts, constants)
    while ts.current.kind == "OP" and ts.current.text in ("*", "/"):
        tok = ts.advance()
        rhs = _weight_atom(ts, constants)
        if tok.text == "/":
            if rhs == 0:
                raise ModelSemanticError(f"{tok.line}:{tok.column}: division by zero in weight")
            value = value / rhs
        else:
            value = value * rhs
    return value


def _weight_atom(ts: TokenStream, constants: t.Mapping[str, int]) -> Fraction:
    tok = ts.current
    if tok.kind in ("INT", "DECIMAL"):
        ts.advance()
        return Fraction(tok.text)
    if tok.kind == "IDENT":
        ts.advance()
        if tok.text not in constants:
            raise ModelSemanticError(f"{tok.line}:{tok.column}: unknown constant {tok.text!r} in weight")
        return Fraction(constants[tok.text])
    if ts.accept("("):
        value = parse_weight(ts, constants)
        ts.expect(")")
        return value
    raise ts.error(f"expected a probability weight, found {tok.text or 'end of input'!r}")
