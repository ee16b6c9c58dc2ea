"""Bounded temporal properties over finite traces.

Grammar (loosest binding first)::

    prop   := and ('|' and)*
    and    := until ('&' until)*
    until  := unary ('U' '<=' INT until)?
    unary  := '!' unary | 'X' unary | 'F' '<=' INT unary | 'G' '<=' INT unary | primary
    primary:= '(' prop ')' | 'true' | 'false' | IDENT cmp value
    value  := ['-'] INT | IDENT          (an IDENT value must name a model constant)

``F<=k p`` holds if ``p`` holds at one of the offsets ``0..k``; ``G<=k p`` needs
``p`` at all of them, so it spans ``k+1`` states.
"""

from __future__ import annotations

import dataclasses as d
import typing as t

import numpy as np

from .errors import InsufficientTraceError, PropertyBindError, PropertySyntaxError
from .kernels import codes
from .syntax import CMP_OPS, TokenStream, compare

if t.TYPE_CHECKING:
    from .model import Mdp, State

_RESERVED = {"X", "F", "G", "U", "true", "false"}


@d.dataclass(frozen=True)
class Const:
    value: bool


@d.dataclass(frozen=True)
class Atom:
    var: str
    op: str
    value: int | str


@d.dataclass(frozen=True)
class Not:
    child: "Prop"


@d.dataclass(frozen=True)
class And:
    left: "Prop"
    right: "Prop"


@d.dataclass(frozen=True)
class Or:
    left: "Prop"
    right: "Prop"


@d.dataclass(frozen=True)
class Next:
    child: "Prop"


@d.dataclass(frozen=True)
class Finally:
    bound: int
    child: "Prop"


@d.dataclass(frozen=True)
class Globally:
    bound: int
    child: "Prop"


@d.dataclass(frozen=True)
class Until:
    bound: int
    left: "Prop"
    right: "Prop"


Prop = t.Union[Const, Atom, Not, And, Or, Next, Finally, Globally, Until]


@d.dataclass(frozen=True)
class Trace:
    names: tuple[str, ...]
    states: tuple[tuple[int, ...], ...]

    def __len__(self) -> int:
        return len(self.states)

    def column(self, name: str) -> list[int]:
        i = self.names.index(name)
        return [s[i] for s in self.states]


# -- parsing --------------------------------------------------------------------


def parse_property(text: str) -> Prop:
    ts = TokenStream(text, PropertySyntaxError)
    prop = _parse_or(ts)
    if ts.current.kind != "EOF":
        raise ts.error(f"unexpected {ts.current.text!r} after property")
    return prop


def _parse_or(ts: TokenStream) -> Prop:
    left = _parse_and(ts)
    while ts.accept("|"):
        left = Or(left, _parse_and(ts))
    return left


def _parse_and(ts: TokenStream) -> Prop:
    left = _parse_until(ts)
    while ts.accept("&"):
        left = And(left, _parse_until(ts))
    return left


def _parse_until(ts: TokenStream) -> Prop:
    left = _parse_unary(ts)
    if ts.at("U"):
        ts.advance()
        bound = _parse_bound(ts, "U")
        return Until(bound, left, _parse_until(ts))
    return left


def _parse_bound(ts: TokenStream, op: str) -> int:
    if not ts.at("<="):
        raise ts.error(f"unbounded {op} is not supported; write {op}<=k")
    ts.advance()
    return int(ts.expect_kind("INT", "a non-negative integer bound").text)


def _parse_unary(ts: TokenStream) -> Prop:
    if ts.accept("!"):
        return Not(_parse_unary(ts))
    if ts.accept("X"):
        return Next(_parse_unary(ts))
    if ts.at("F") or ts.at("G"):
        op = ts.advance().text
        bound = _parse_bound(ts, op)
        child = _parse_unary(ts)
        return Finally(bound, child) if op == "F" else Globally(bound, child)
    if ts.accept("("):
        inner = _parse_or(ts)
        ts.expect(")")
        return inner
    if ts.accept("true"):
        return Const(True)
    if ts.accept("false"):
        return Const(False)
    tok = ts.current
    if tok.kind != "IDENT" or tok.text in _RESERVED:
        raise ts.error(f"expected a formula, found {tok.text or 'end of input'!r}")
    ts.advance()
    if not (ts.current.kind == "OP" and ts.current.text in CMP_OPS):
        raise ts.error(f"expected a comparison after {tok.text!r}")
    op = ts.advance().text
    negative = ts.accept("-") is not None
    vtok = ts.current
    if vtok.kind == "INT":
        ts.advance()
        value: int | str = -int(vtok.text) if negative else int(vtok.text)
    elif vtok.kind == "IDENT" and not negative and vtok.text not in _RESERVED:
        ts.advance()
        value = vtok.text
    else:
        raise ts.error("expected an integer or constant name")
    return Atom(tok.text, op, value)


def format_property(p: Prop) -> str:
    if isinstance(p, Const):
        return "true" if p.value else "false"
    if isinstance(p, Atom):
        return f"({p.var}{p.op}{p.value})"
    if isinstance(p, Not):
        return f"!{format_property(p.child)}"
    if isinstance(p, And):
        return f"({format_property(p.left)} & {format_property(p.right)})"
    if isinstance(p, Or):
        return f"({format_property(p.left)} | {format_property(p.right)})"
    if isinstance(p, Next):
        return f"X {format_property(p.child)}"
    if isinstance(p, Finally):
        return f"F<={p.bound} {format_property(p.child)}"
    if isinstance(p, Globally):
        return f"G<={p.bound} {format_property(p.child)}"
    return f"({format_property(p.left)} U<={p.bound} {format_property(p.right)})"


def bind(p: Prop, mdp: "Mdp") -> Prop:
    """Check atoms against *mdp* and replace constant names by their values."""
    names = set(mdp.names)

    def go(q: Prop) -> Prop:
        if isinstance(q, Atom):
            if q.var not in names:
                raise PropertyBindError(f"unknown variable {q.var!r} in property")
            value = q.value
            if isinstance(value, str):
                if value not in mdp.constants:
                    raise PropertyBindError(f"unknown constant {value!r} in property")
                value = mdp.constants[value]
            return Atom(q.var, q.op, value)
        if isinstance(q, (Not, Next)):
            return type(q)(go(q.child))
        if isinstance(q, (Finally, Globally)):
            return type(q)(q.bound, go(q.child))
        if isinstance(q, (And, Or)):
            return type(q)(go(q.left), go(q.right))
        if isinstance(q, Until):
            return Until(q.bound, go(q.left), go(q.right))
        return q

    return go(p)


def resolve_property(text: str, mdp: "Mdp") -> Prop:
    """Parse *text*, or look it up among the model's named properties first."""
    source = mdp.properties.get(text, text)
    return bind(parse_property(source), mdp)


# -- semantics ------------------------------------------------------------------


def horizon(p: Prop) -> int:
    if isinstance(p, (Const, Atom)):
        return 0
    if isinstance(p, Not):
        return horizon(p.child)
    if isinstance(p, (And, Or)):
        return max(horizon(p.left), horizon(p.right))
    if isinstance(p, Next):
        return 1 + horizon(p.child)
    if isinstance(p, (Finally, Globally)):
        return p.bound + horizon(p.child)
    return p.bound + max(horizon(p.left), horizon(p.right))


def evaluate(p: Prop, trace: Trace, pos: int = 0) -> bool:
    need = pos + horizon(p) + 1
    if len(trace) < need:
        raise InsufficientTraceError(f"trace has {len(trace)} states, property needs {need}")
    index = {n: i for i, n in enumerate(trace.names)}
    return _eval(p, trace.states, index, pos)


def _eval(p: Prop, states, index: dict[str, int], pos: int) -> bool:
    if isinstance(p, Const):
        return p.value
    if isinstance(p, Atom):
        if isinstance(p.value, str):
            raise PropertyBindError(f"unbound constant {p.value!r}; call bind() first")
        return compare(p.op, states[pos][index[p.var]], p.value)
    if isinstance(p, Not):
        return not _eval(p.child, states, index, pos)
    if isinstance(p, And):
        return _eval(p.left, states, index, pos) and _eval(p.right, states, index, pos)
    if isinstance(p, Or):
        return _eval(p.left, states, index, pos) or _eval(p.right, states, index, pos)
    if isinstance(p, Next):
        return _eval(p.child, states, index, pos + 1)
    if isinstance(p, Finally):
        return any(_eval(p.child, states, index, pos + i) for i in range(p.bound + 1))
    if isinstance(p, Globally):
        return all(_eval(p.child, states, index, pos + i) for i in range(p.bound + 1))
    for i in range(p.bound + 1):
        if _eval(p.right, states, index, pos + i):
            return True
        if not _eval(p.left, states, index, pos + i):
            return False
    return False


# -- compilation for the kernels ------------------------------------------------


@d.dataclass(frozen=True)
class CompiledProperty:
    kind: np.ndarray
    a: np.ndarray
    b: np.ndarray
    bound: np.ndarray
    var: np.ndarray
    cmp: np.ndarray
    value: np.ndarray
    node_horizon: np.ndarray
    horizon: int

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, f.name) for f in d.fields(self))


def compile_property(p: Prop, mdp: "Mdp") -> CompiledProperty:
    """Flatten a bound property into post-order node arrays; the root is the last node."""
    index = {n: i for i, n in enumerate(mdp.names)}
    rows: list[tuple[int, int, int, int, int, int, int, int]] = []

    def go(q: Prop) -> int:
        a = b = k = var = cmp = value = 0
        if isinstance(q, Const):
            kind, value = codes.P_CONST, int(q.value)
        elif isinstance(q, Atom):
            if isinstance(q.value, str):
                raise PropertyBindError(f"unbound constant {q.value!r}; call bind() first")
            kind, var, cmp, value = codes.P_ATOM, index[q.var], codes.CMP_CODES[q.op], q.value
        elif isinstance(q, Not):
            kind, a = codes.P_NOT, go(q.child)
        elif isinstance(q, And):
            kind, a, b = codes.P_AND, go(q.left), go(q.right)
        elif isinstance(q, Or):
            kind, a, b = codes.P_OR, go(q.left), go(q.right)
        elif isinstance(q, Next):
            kind, a = codes.P_NEXT, go(q.child)
        elif isinstance(q, Finally):
            kind, a, k = codes.P_FINALLY, go(q.child), q.bound
        elif isinstance(q, Globally):
            kind, a, k = codes.P_GLOBALLY, go(q.child), q.bound
        else:
            kind, a, b, k = codes.P_UNTIL, go(q.left), go(q.right), q.bound
        rows.append((kind, a, b, k, var, cmp, value, horizon(q)))
        return len(rows) - 1

    go(p)
    cols = np.asarray(rows, dtype=np.int64).T
    return CompiledProperty(*[np.ascontiguousarray(c) for c in cols], horizon=horizon(p))
