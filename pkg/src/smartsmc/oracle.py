"""Exact ground truth by exhaustive prefix-tree expansion.

Deliberately exponential: every path prefix up to the property horizon is
visited, so values are exact rationals (branch weights are already exact
fractions after parsing).  Meant for small models and tests only; a node cap
turns blow-ups into a clear error.
"""

from __future__ import annotations

import dataclasses as d
import itertools
import typing as t
from fractions import Fraction

from .errors import OracleCapExceeded
from .model import Mdp, State, apply_branch, enabled, initial_state
from .prop import Prop, Trace, evaluate, horizon
from .scheduler import HISTORY, MEMORYLESS, HashState, choose_action, hash_init, hash_state

DEFAULT_CAP = 10**7
WITNESS_LIMIT = 10_000

MAX, MIN = "max", "min"


@d.dataclass(frozen=True)
class OracleResult:
    value: Fraction
    explored: int
    scheduler_witness: dict | None = None

    def __float__(self) -> float:
        return float(self.value)


class _Budget:
    def __init__(self, cap: int) -> None:
        self.cap = cap
        self.nodes = 0

    def tick(self, what: str) -> None:
        self.nodes += 1
        if self.nodes > self.cap:
            raise OracleCapExceeded(
                f"{what}: more than {self.cap} path prefixes; the model/horizon is too large for exact expansion"
            )


def _pick(direction: str):
    if direction not in (MAX, MIN):
        raise ValueError(f"direction must be 'max' or 'min', got {direction!r}")
    return max if direction == MAX else min


def _label(mdp: Mdp, cmd: int) -> str:
    return mdp.commands[cmd].label or f"#{cmd}"


def _expand(
    mdp: Mdp,
    prop: Prop,
    policy: t.Callable[[tuple[State, ...], list[int], t.Any], tuple[list[tuple[int, Fraction]], t.Any]],
    budget: _Budget,
    what: str,
    ctx0: t.Any = None,
) -> Fraction:
    """Probability of ``prop`` when *policy* maps (prefix, enabled, ctx) to weighted commands.

    ``policy`` returns ``[(cmd, weight), ...]`` summing to one plus the context
    handed to the children (e.g. a running hash).
    """
    length = horizon(prop)
    names = mdp.names

    def go(prefix: tuple[State, ...], ctx) -> Fraction:
        budget.tick(what)
        if len(prefix) == length + 1:
            return Fraction(int(evaluate(prop, Trace(names, prefix), 0)))
        state = prefix[-1]
        choices = enabled(mdp, state)
        if not choices:
            return go(prefix + (state,), ctx)
        mix, ctx = policy(prefix, choices, ctx)
        total = Fraction(0)
        for cmd, w in mix:
            for branch in mdp.commands[cmd].branches:
                total += w * branch.weight * go(prefix + (apply_branch(mdp, state, branch),), ctx)
        return total

    return go((initial_state(mdp),), ctx0)


def exact_optimum_history(
    mdp: Mdp, prop: Prop, direction: str = MAX, cap: int = DEFAULT_CAP
) -> OracleResult:
    """Optimal probability over all history-dependent schedulers (backward induction over prefixes)."""
    best = _pick(direction)
    length = horizon(prop)
    names = mdp.names
    budget = _Budget(cap)
    tree: dict[tuple[State, ...], str] = {}

    def go(prefix: tuple[State, ...]) -> Fraction:
        budget.tick("history optimum")
        if len(prefix) == length + 1:
            return Fraction(int(evaluate(prop, Trace(names, prefix), 0)))
        state = prefix[-1]
        choices = enabled(mdp, state)
        if not choices:
            return go(prefix + (state,))
        values = []
        for cmd in choices:
            v = Fraction(0)
            for branch in mdp.commands[cmd].branches:
                v += branch.weight * go(prefix + (apply_branch(mdp, state, branch),))
            values.append(v)
        chosen = best(range(len(choices)), key=lambda k: (values[k], -k) if best is max else (values[k], k))
        tree[prefix] = _label(mdp, choices[chosen])
        return values[chosen]

    value = go((initial_state(mdp),))
    witness = {"actions": {_fmt_prefix(p): a for p, a in tree.items()}} if len(tree) <= WITNESS_LIMIT else None
    return OracleResult(value, budget.nodes, witness)


def _fmt_prefix(prefix: tuple[State, ...]) -> str:
    return " ".join("(" + ",".join(map(str, s)) + ")" for s in prefix)


def reachable_states(mdp: Mdp, steps: int) -> list[State]:
    """States reachable within *steps* transitions, in discovery order."""
    start = initial_state(mdp)
    seen = {start: None}
    frontier = [start]
    for _ in range(steps):
        nxt = []
        for state in frontier:
            for cmd in enabled(mdp, state):
                for branch in mdp.commands[cmd].branches:
                    s2 = apply_branch(mdp, state, branch)
                    if s2 not in seen:
                        seen[s2] = None
                        nxt.append(s2)
        frontier = nxt
    return list(seen)


def exact_optimum_memoryless(
    mdp: Mdp, prop: Prop, direction: str = MAX, cap: int = DEFAULT_CAP
) -> OracleResult:
    """Optimal probability over deterministic memoryless schedulers, by enumerating action maps."""
    best_of = _pick(direction)
    # states where a choice happens before the last step of the horizon
    states = [s for s in reachable_states(mdp, max(horizon(prop) - 1, 0)) if len(enabled(mdp, s)) > 1]
    options = [enabled(mdp, s) for s in states]
    count = 1
    for o in options:
        count *= len(o)
        if count > cap:
            raise OracleCapExceeded(f"memoryless optimum: more than {cap} action maps")
    budget = _Budget(cap)
    best_value: Fraction | None = None
    best_map: dict = {}
    for combo in itertools.product(*options):
        table = dict(zip(states, combo))

        def policy(prefix, choices, ctx, table=table):
            return [(table.get(prefix[-1], choices[0]), Fraction(1))], ctx

        value = _expand(mdp, prop, policy, budget, "memoryless optimum")
        if best_value is None or best_of(value, best_value) != best_value:
            best_value, best_map = value, table
    witness = {"actions": {",".join(map(str, s)): _label(mdp, c) for s, c in best_map.items()}}
    return OracleResult(best_value, budget.nodes, witness)


def exact_scheduler_probability(
    mdp: Mdp, prop: Prop, sigma: int, scheduler_class: str = HISTORY, cap: int = DEFAULT_CAP
) -> OracleResult:
    """Exact probability under the hash-defined scheduler ``sigma``."""
    if scheduler_class not in (HISTORY, MEMORYLESS):
        raise ValueError(f"unknown scheduler class {scheduler_class!r}")

    budget = _Budget(cap)
    value = _expand_hashed(mdp, prop, sigma, scheduler_class, budget)
    return OracleResult(value, budget.nodes)


def _expand_hashed(mdp: Mdp, prop: Prop, sigma: int, scheduler_class: str, budget: _Budget) -> Fraction:
    # The hash absorbs every state on the prefix, deadlocked repeats included,
    # exactly as the simulator does.
    length = horizon(prop)
    names = mdp.names

    def go(prefix: tuple[State, ...], hs: HashState | None) -> Fraction:
        budget.tick("scheduler replay")
        if len(prefix) == length + 1:
            return Fraction(int(evaluate(prop, Trace(names, prefix), 0)))
        state = prefix[-1]
        if scheduler_class == MEMORYLESS or hs is None:
            hs = hash_init(sigma)
        hs = hash_state(hs, mdp, state)
        cmd = choose_action(mdp, hs, state)
        if cmd is None:
            return go(prefix + (state,), hs)
        total = Fraction(0)
        for branch in mdp.commands[cmd].branches:
            total += branch.weight * go(prefix + (apply_branch(mdp, state, branch),), hs)
        return total

    return go((initial_state(mdp),), None)


def uniform_scheduler_probability(mdp: Mdp, prop: Prop, cap: int = DEFAULT_CAP) -> OracleResult:
    """Expected probability when every step picks uniformly among enabled commands."""

    def policy(prefix, choices, ctx):
        w = Fraction(1, len(choices))
        return [(c, w) for c in choices], ctx

    budget = _Budget(cap)
    return OracleResult(_expand(mdp, prop, policy, budget, "uniform scheduler"), budget.nodes)
