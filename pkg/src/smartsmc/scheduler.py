"""Schedulers as integers: an incremental modular hash seeds a 64-bit PRNG per step.

A history-dependent scheduler ``sigma`` resolves the choice at a path prefix
``s_0 .. s_k`` by hashing ``sigma`` concatenated with the bit encodings of all
states on the prefix, then drawing one uniform index from a PRNG seeded with
that hash.  A memoryless scheduler hashes ``sigma`` with the current state only.

Everything here is plain-integer reference code.  The vectorised/compiled
versions used for bulk simulation live in :mod:`smartsmc.kernels` and are
tested against these functions.
"""

from __future__ import annotations

import dataclasses as d
import typing as t

from .model import Mdp, State, enabled, encode_state, initial_state, successor
from .prop import Prop, Trace, evaluate, horizon

# Prime, below 2**62 (so h + h fits in 64 bits) and ~1.2577 * 2**61, well away
# from any power of two.
MODULUS = 2899999999999999909

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
PRNG_NAME = "splitmix64"

HISTORY = "history"
MEMORYLESS = "memoryless"
SCHEDULER_CLASSES = (HISTORY, MEMORYLESS)


@d.dataclass(frozen=True)
class HashState:
    h: int
    m: int = MODULUS


@d.dataclass(frozen=True)
class PrngState:
    s: int


@d.dataclass(frozen=True)
class Verdict:
    satisfied: bool
    trace_length: int
    deadlocked: bool


def hash_init(sigma: int, m: int = MODULUS) -> HashState:
    return HashState(sigma % m, m)


def shift_mod(h: int, j: int, m: int = MODULUS) -> int:
    """``(h * 2**j) % m`` by repeated doubling; every intermediate stays below ``2m``."""
    for _ in range(j):
        h += h
        if h >= m:
            h -= m
    return h


def hash_update(hs: HashState, v: int, b: int) -> HashState:
    m = hs.m
    h = shift_mod(hs.h, b, m) + v % m
    if h >= m:
        h -= m
    return HashState(h, m)


def hash_state(hs: HashState, mdp: Mdp, state: State) -> HashState:
    for value, width in encode_state(mdp, state):
        hs = hash_update(hs, value, width)
    return hs


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def prng_next(p: PrngState) -> tuple[int, PrngState]:
    s = (p.s + GOLDEN) & MASK64
    return mix64(s), PrngState(s)


def choose_uniform(p: PrngState, n: int) -> tuple[int, PrngState]:
    """Exactly uniform index in ``[0, n)`` by rejecting the biased top of the 64-bit range."""
    if n < 1:
        raise ValueError("choose_uniform needs n >= 1")
    limit = (1 << 64) - ((1 << 64) % n)
    while True:
        r, p = prng_next(p)
        if r < limit:
            return r % n, p


def to_unit(r: int) -> float:
    """Map a 64-bit draw to ``[0, 1)`` using its top 53 bits."""
    return (r >> 11) * 2.0**-53


def derive_seed(*words: int) -> int:
    """Order-sensitive 64-bit mixing of integer words into one seed."""
    s = 0
    for w in words:
        s = mix64(((s ^ (w & MASK64)) + GOLDEN) & MASK64)
    return s


def choose_action(mdp: Mdp, hs: HashState, state: State) -> int | None:
    """Command index chosen at *state* for the prefix hash *hs*, or None on deadlock."""
    choices = enabled(mdp, state)
    if not choices:
        return None
    k, _ = choose_uniform(PrngState(hs.h), len(choices))
    return choices[k]


def step_hash(mdp: Mdp, hs: HashState | None, sigma: int, state: State, scheduler_class: str) -> HashState:
    if scheduler_class == MEMORYLESS or hs is None:
        hs = hash_init(sigma)
    return hash_state(hs, mdp, state)


def simulate(
    mdp: Mdp,
    prop: Prop,
    sigma: int,
    prob_seed: int,
    scheduler_class: str = HISTORY,
) -> tuple[Trace, Verdict]:
    """Generate one trace of exactly ``horizon(prop) + 1`` states and judge it."""
    if scheduler_class not in SCHEDULER_CLASSES:
        raise ValueError(f"unknown scheduler class {scheduler_class!r}")
    length = horizon(prop)
    state = initial_state(mdp)
    states = [state]
    hs: HashState | None = None
    prob = PrngState(prob_seed & MASK64)
    deadlocked = False
    for _ in range(length):
        hs = step_hash(mdp, hs, sigma, state, scheduler_class)
        cmd = choose_action(mdp, hs, state)
        r, prob = prng_next(prob)
        if cmd is None:
            deadlocked = True
        else:
            state = successor(mdp, state, cmd, to_unit(r))
        states.append(state)
    trace = Trace(mdp.names, tuple(states))
    return trace, Verdict(evaluate(prop, trace, 0), len(states), deadlocked)


def scheduled_actions(
    mdp: Mdp, sigma: int, states: t.Sequence[State], scheduler_class: str = HISTORY
) -> list[int | None]:
    """The command ``sigma`` picks after each prefix ``states[:k+1]`` (None where deadlocked)."""
    hs: HashState | None = None
    out: list[int | None] = []
    for state in states:
        hs = step_hash(mdp, hs, sigma, state, scheduler_class)
        out.append(choose_action(mdp, hs, state))
    return out
