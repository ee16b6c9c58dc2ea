"""Guarded-command MDPs over bounded integer variables.

The concrete syntax is a flat subset of the PRISM language::

    // comments run to end of line
    const K = 4;
    var s : [0..1] init 0;             // optional: bits 3
    [a1] s=0 -> 0.9:(s'=0) + 0.1:(s'=1);
    [a0] s=1 -> (s'=0);
    property "once" = X((s=1) & X G<=4 !(s=1));

One nondeterministic choice is one enabled command; commands are indexed in
declaration order and that order is what a scheduler's uniform draw ranges over.
"""

from __future__ import annotations

import dataclasses as d
import os
import typing as t
from fractions import Fraction
from importlib.resources import files

import numpy as np

from .errors import ModelRangeError, ModelSemanticError, ModelSyntaxError
from .kernels import codes
from .syntax import (
    Binary,
    Expr,
    Num,
    TokenStream,
    Unary,
    Var,
    eval_expr,
    expr_names,
    format_expr,
    parse_expr,
    parse_weight,
    substitute,
)

State = t.Tuple[int, ...]

WEIGHT_TOLERANCE = 1e-9


@d.dataclass(frozen=True)
class VariableDecl:
    name: str
    lower: int
    upper: int
    init: int
    bit_width: int

    @property
    def minimal_width(self) -> int:
        return (self.upper - self.lower).bit_length()


@d.dataclass(frozen=True)
class Branch:
    weight: Fraction
    updates: tuple[tuple[str, Expr], ...]


@d.dataclass(frozen=True)
class Command:
    label: str | None
    guard: Expr
    branches: tuple[Branch, ...]


@d.dataclass(frozen=True)
class Mdp:
    variables: tuple[VariableDecl, ...]
    commands: tuple[Command, ...]
    constants: t.Mapping[str, int] = d.field(default_factory=dict)
    properties: t.Mapping[str, str] = d.field(default_factory=dict)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def index_of(self, name: str) -> int:
        for i, v in enumerate(self.variables):
            if v.name == name:
                return i
        raise KeyError(name)

    def command_index(self, label: str) -> int:
        for i, c in enumerate(self.commands):
            if c.label == label:
                return i
        raise KeyError(label)


# -- parsing --------------------------------------------------------------------


def parse_model(text: str) -> Mdp:
    ts = TokenStream(text, ModelSyntaxError)
    constants: dict[str, int] = {}
    variables: list[VariableDecl] = []
    commands: list[Command] = []
    properties: dict[str, str] = {}
    declared: set[str] = set()

    def declare(name: str, tok) -> None:
        if name in declared:
            raise ModelSemanticError(f"{tok.line}:{tok.column}: duplicate name {name!r}")
        declared.add(name)

    def const_int(expr: Expr, tok) -> int:
        unknown = expr_names(expr) - constants.keys()
        if unknown:
            raise ModelSemanticError(
                f"{tok.line}:{tok.column}: non-constant name(s) {sorted(unknown)} in constant expression"
            )
        return eval_expr(expr, constants)

    while ts.current.kind != "EOF":
        tok = ts.current
        if ts.accept("const"):
            if ts.accept("int") is None:
                pass  # `const int K = 3;` and `const K = 3;` are both accepted
            name_tok = ts.expect_kind("IDENT", "constant name")
            declare(name_tok.text, name_tok)
            ts.expect("=")
            constants[name_tok.text] = const_int(parse_expr(ts), name_tok)
            ts.expect(";")
        elif ts.accept("var"):
            name_tok = ts.expect_kind("IDENT", "variable name")
            declare(name_tok.text, name_tok)
            ts.expect(":")
            ts.expect("[")
            lower = const_int(parse_expr(ts), name_tok)
            ts.expect("..")
            upper = const_int(parse_expr(ts), name_tok)
            ts.expect("]")
            ts.expect("init")
            init = const_int(parse_expr(ts), name_tok)
            width = None
            if ts.accept("bits"):
                width = int(ts.expect_kind("INT", "bit width").text)
            ts.expect(";")
            if lower > upper:
                raise ModelSemanticError(f"{name_tok.line}:{name_tok.column}: empty domain [{lower}..{upper}]")
            if not lower <= init <= upper:
                raise ModelSemanticError(
                    f"{name_tok.line}:{name_tok.column}: init {init} outside [{lower}..{upper}] for {name_tok.text!r}"
                )
            minimal = (upper - lower).bit_length()
            if width is None:
                width = minimal
            elif width < minimal or width > 62:
                raise ModelSemanticError(
                    f"{name_tok.line}:{name_tok.column}: bit width {width} cannot encode [{lower}..{upper}]"
                )
            variables.append(VariableDecl(name_tok.text, lower, upper, init, width))
        elif ts.at("["):
            commands.append(_parse_command(ts, constants))
        elif ts.accept("property"):
            name_tok = ts.expect_kind("STRING", "property name")
            name = name_tok.text[1:-1]
            if name in properties:
                raise ModelSemanticError(f"{name_tok.line}:{name_tok.column}: duplicate property {name!r}")
            ts.expect("=")
            start = ts.current.offset
            while not ts.at(";"):
                if ts.current.kind == "EOF":
                    raise ts.error("unterminated property declaration")
                ts.advance()
            properties[name] = ts.source[start : ts.current.offset].strip()
            ts.expect(";")
        else:
            raise ts.error(f"unexpected {tok.text!r}; expected const, var, property or a command")

    mdp = Mdp(tuple(variables), tuple(commands), dict(constants), properties)
    _check_semantics(mdp)
    return mdp


def _parse_command(ts: TokenStream, constants: dict[str, int]) -> Command:
    ts.expect("[")
    label = None
    if ts.current.kind == "IDENT":
        label = ts.advance().text
    ts.expect("]")
    guard = substitute(parse_expr(ts), constants)
    arrow = ts.expect("->")
    branches = [_parse_branch(ts, constants)]
    while ts.accept("+"):
        branches.append(_parse_branch(ts, constants))
    ts.expect(";")

    for b in branches:
        if not 0 < b.weight <= 1:
            raise ModelSemanticError(f"{arrow.line}:{arrow.column}: branch weight {b.weight} outside (0,1]")
    total = sum((b.weight for b in branches), Fraction(0))
    if abs(total - 1) > WEIGHT_TOLERANCE:
        raise ModelSemanticError(f"{arrow.line}:{arrow.column}: branch weights sum to {float(total)!r}, not 1")
    branches = [Branch(b.weight / total, b.updates) for b in branches]
    return Command(label, guard, tuple(branches))


def _parse_branch(ts: TokenStream, constants: dict[str, int]) -> Branch:
    starts_with_update = (ts.at("(") and ts.peek().kind == "IDENT" and ts.peek(2).text == "'") or (
        ts.at("true") and ts.peek().text in (";", "+")
    )
    weight = Fraction(1)
    if not starts_with_update:
        weight = parse_weight(ts, constants)
        ts.expect(":")
    if ts.accept("true"):
        return Branch(weight, ())
    updates: list[tuple[str, Expr]] = []
    seen: set[str] = set()
    while True:
        ts.expect("(")
        target = ts.expect_kind("IDENT", "variable name")
        ts.expect("'")
        ts.expect("=")
        value = substitute(parse_expr(ts), constants)
        ts.expect(")")
        if target.text in seen:
            raise ModelSemanticError(f"{target.line}:{target.column}: {target.text!r} updated twice in one branch")
        seen.add(target.text)
        updates.append((target.text, value))
        if not ts.accept("&"):
            break
    return Branch(weight, tuple(updates))


def _check_semantics(mdp: Mdp) -> None:
    if not mdp.variables:
        raise ModelSemanticError("model declares no variables")
    if not mdp.commands:
        raise ModelSemanticError("model declares no commands")
    names = set(mdp.names)
    for i, cmd in enumerate(mdp.commands):
        where = f"command {i}" + (f" [{cmd.label}]" if cmd.label else "")
        unknown = expr_names(cmd.guard) - names
        if unknown:
            raise ModelSemanticError(f"{where}: unknown name(s) {sorted(unknown)} in guard")
        for b in cmd.branches:
            for target, value in b.updates:
                if target not in names:
                    raise ModelSemanticError(f"{where}: update of undeclared variable {target!r}")
                unknown = expr_names(value) - names
                if unknown:
                    raise ModelSemanticError(f"{where}: unknown name(s) {sorted(unknown)} in update")


def print_model(mdp: Mdp) -> str:
    """Render *mdp* in the concrete syntax; constants are already folded into expressions."""
    lines = [f"const {name} = {value};" for name, value in mdp.constants.items()]
    for v in mdp.variables:
        bits = f" bits {v.bit_width}" if v.bit_width != v.minimal_width else ""
        lines.append(f"var {v.name} : [{v.lower}..{v.upper}] init {v.init}{bits};")
    for cmd in mdp.commands:
        branches = []
        for b in cmd.branches:
            ups = " & ".join(f"({name}'={format_expr(e)})" for name, e in b.updates) or "true"
            weight = f"{b.weight.numerator}/{b.weight.denominator}"
            branches.append(f"({weight}):{ups}")
        lines.append(f"[{cmd.label or ''}] {format_expr(cmd.guard)} -> {' + '.join(branches)};")
    for name, text in mdp.properties.items():
        lines.append(f'property "{name}" = {text};')
    return "\n".join(lines) + "\n"


# -- semantics ------------------------------------------------------------------


def initial_state(mdp: Mdp) -> State:
    return tuple(v.init for v in mdp.variables)


def _env(mdp: Mdp, state: State) -> dict[str, int]:
    return dict(zip(mdp.names, state))


def enabled(mdp: Mdp, state: State) -> list[int]:
    env = _env(mdp, state)
    return [i for i, cmd in enumerate(mdp.commands) if eval_expr(cmd.guard, env) != 0]


def select_branch(cmd: Command, u: float) -> int:
    """Index of the branch whose cumulative-weight interval contains *u*."""
    cum = branch_thresholds(cmd)
    for k, bound in enumerate(cum):
        if u < bound:
            return k
    return len(cum) - 1


def branch_thresholds(cmd: Command) -> list[float]:
    out, acc = [], Fraction(0)
    for b in cmd.branches:
        acc += b.weight
        out.append(float(acc))
    out[-1] = 1.0
    return out


def apply_branch(mdp: Mdp, state: State, branch: Branch) -> State:
    env = _env(mdp, state)
    values = list(state)
    for name, expr in branch.updates:
        i = mdp.index_of(name)
        value = eval_expr(expr, env)
        v = mdp.variables[i]
        if not v.lower <= value <= v.upper:
            raise ModelRangeError(f"update {name}'={value} leaves domain [{v.lower}..{v.upper}]")
        values[i] = value
    return tuple(values)


def successor(mdp: Mdp, state: State, cmd: int, u: float) -> State:
    command = mdp.commands[cmd]
    return apply_branch(mdp, state, command.branches[select_branch(command, u)])


def encode_state(mdp: Mdp, state: State) -> list[tuple[int, int]]:
    return [(value - v.lower, v.bit_width) for v, value in zip(mdp.variables, state)]


# -- compilation for the kernels ------------------------------------------------


@d.dataclass(frozen=True)
class CompiledModel:
    ops: np.ndarray
    args: np.ndarray
    guard_lo: np.ndarray
    guard_hi: np.ndarray
    br_lo: np.ndarray
    br_hi: np.ndarray
    br_cum: np.ndarray
    up_lo: np.ndarray
    up_hi: np.ndarray
    up_var: np.ndarray
    up_code_lo: np.ndarray
    up_code_hi: np.ndarray
    var_lo: np.ndarray
    var_hi: np.ndarray
    var_bits: np.ndarray
    init: np.ndarray
    stack_size: int

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, f.name) for f in d.fields(self))


def _emit(expr: Expr, names: dict[str, int], ops: list[int], args: list[int]) -> int:
    """Append postfix code for *expr*; returns the stack depth it needs."""
    if isinstance(expr, Num):
        ops.append(codes.OP_CONST)
        args.append(expr.value)
        return 1
    if isinstance(expr, Var):
        ops.append(codes.OP_VAR)
        args.append(names[expr.name])
        return 1
    if isinstance(expr, Unary):
        depth = _emit(expr.operand, names, ops, args)
        ops.append(codes.OP_NEG if expr.op == "-" else codes.OP_NOT)
        args.append(0)
        return depth
    assert isinstance(expr, Binary)
    left = _emit(expr.left, names, ops, args)
    right = _emit(expr.right, names, ops, args)
    ops.append(codes.BINARY_OPCODES[expr.op])
    args.append(0)
    return max(left, right + 1)


def compile_model(mdp: Mdp) -> CompiledModel:
    names = {n: i for i, n in enumerate(mdp.names)}
    ops: list[int] = []
    args: list[int] = []
    depth = 1
    guard_lo, guard_hi, br_lo, br_hi, br_cum = [], [], [], [], []
    up_lo, up_hi, up_var, up_code_lo, up_code_hi = [], [], [], [], []
    for cmd in mdp.commands:
        guard_lo.append(len(ops))
        depth = max(depth, _emit(cmd.guard, names, ops, args))
        guard_hi.append(len(ops))
        br_lo.append(len(br_cum))
        br_cum.extend(branch_thresholds(cmd))
        br_hi.append(len(br_cum))
        for b in cmd.branches:
            up_lo.append(len(up_var))
            for name, expr in b.updates:
                up_var.append(names[name])
                up_code_lo.append(len(ops))
                depth = max(depth, _emit(expr, names, ops, args))
                up_code_hi.append(len(ops))
            up_hi.append(len(up_var))

    def i64(xs) -> np.ndarray:
        return np.asarray(xs, dtype=np.int64)

    return CompiledModel(
        ops=i64(ops),
        args=i64(args),
        guard_lo=i64(guard_lo),
        guard_hi=i64(guard_hi),
        br_lo=i64(br_lo),
        br_hi=i64(br_hi),
        br_cum=np.asarray(br_cum, dtype=np.float64),
        up_lo=i64(up_lo),
        up_hi=i64(up_hi),
        up_var=i64(up_var),
        up_code_lo=i64(up_code_lo),
        up_code_hi=i64(up_code_hi),
        var_lo=i64([v.lower for v in mdp.variables]),
        var_hi=i64([v.upper for v in mdp.variables]),
        var_bits=i64([v.bit_width for v in mdp.variables]),
        init=i64([v.init for v in mdp.variables]),
        stack_size=depth,
    )


def bundled_models() -> list[str]:
    return sorted(p.name[:-4] for p in files("smartsmc.models").iterdir() if p.name.endswith(".smc"))


def load_model(ref: str) -> Mdp:
    """Parse a model file, or a bundled model given by bare name (e.g. ``choice``)."""
    if os.path.exists(ref):
        with open(ref, encoding="utf-8") as fh:
            return parse_model(fh.read())
    if ref in bundled_models():
        return parse_model((files("smartsmc.models") / f"{ref}.smc").read_text(encoding="utf-8"))
    raise FileNotFoundError(f"no model file {ref!r} and no bundled model of that name")
