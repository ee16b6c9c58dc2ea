from __future__ import annotations

import random

import numpy as np
import pytest
import sympy

from smartsmc.kernels import numpy_kernels as npk
from smartsmc.model import apply_branch, encode_state, parse_model
from smartsmc.prop import parse_property, resolve_property
from smartsmc.scheduler import (
    GOLDEN,
    HISTORY,
    MASK64,
    MEMORYLESS,
    MODULUS,
    HashState,
    PrngState,
    choose_uniform,
    derive_seed,
    hash_init,
    hash_state,
    hash_update,
    prng_next,
    scheduled_actions,
    shift_mod,
    simulate,
    to_unit,
)

from conftest import random_model_text


def test_modulus_choice():
    assert sympy.isprime(MODULUS)
    assert MODULUS <= 2**62
    for k in range(0, 64):
        assert abs(MODULUS / 2**k - 1) > 2**-10


def test_hash_init():
    assert hash_init(0).h == 0
    assert hash_init(MODULUS).h == 0
    assert hash_init(MODULUS - 1).h == MODULUS - 1


def test_shift_mod_examples():
    assert shift_mod(1, 0) == 1
    assert shift_mod(5, 4, 97) == 80


def test_shift_mod_big_integer_oracle():
    rng = random.Random(1)
    for _ in range(1000):
        m = rng.randrange(3, 2**62)
        h = rng.randrange(m)
        j = rng.randrange(0, 80)
        assert shift_mod(h, j, m) == (h << j) % m


def test_hash_update_examples():
    assert hash_update(HashState(5, 97), 3, 4).h == 83
    assert hash_update(HashState(42, 97), 0, 0).h == 42


def test_hash_chain_equals_concatenation():
    rng = random.Random(2)
    for _ in range(1000):
        sigma = rng.getrandbits(64)
        widths = [rng.randint(0, 12) for _ in range(rng.randint(1, 6))]
        hs = hash_init(sigma)
        big = sigma
        for _ in range(rng.randint(1, 8)):
            for b in widths:
                v = rng.randrange(1 << b) if b else 0
                hs = hash_update(hs, v, b)
                big = (big << b) | v
        assert hs.h == big % MODULUS


def test_prng_seed_zero_first_output():
    r, p = prng_next(PrngState(0))
    assert r == 0xE220A8397B1DCDAF
    assert p.s == GOLDEN


def test_prng_determinism_and_vector_agreement():
    p, q = PrngState(12345), PrngState(12345)
    seq = []
    for _ in range(100):
        a, p = prng_next(p)
        b, q = prng_next(q)
        assert a == b
        seq.append(a)
    steps = (np.uint64(12345) + np.arange(1, 101, dtype=np.uint64) * np.uint64(GOLDEN))
    assert npk.mix64(steps).tolist() == seq


def test_prng_mean():
    z = npk.mix64(np.arange(1, 10**6 + 1, dtype=np.uint64) * np.uint64(GOLDEN))
    mean = float((z >> np.uint64(11)).astype(np.float64).mean()) * 2.0**-53
    assert 0.499 <= mean <= 0.501


def test_to_unit_never_reaches_one():
    assert to_unit(MASK64) < 1.0
    assert to_unit(0) == 0.0


def test_choose_uniform_singleton_consumes_one_draw():
    k, p = choose_uniform(PrngState(99), 1)
    assert k == 0
    assert p.s == (99 + GOLDEN) & MASK64


def test_choose_uniform_parity():
    for seed in range(50):
        r, _ = prng_next(PrngState(seed))
        k, _ = choose_uniform(PrngState(seed), 2)
        assert k == r % 2


def test_choose_uniform_rejects_biased_top():
    n = (1 << 63) + 1  # about half of all draws fall in the rejected top range
    rejected = 0
    for seed in range(200):
        r, _ = prng_next(PrngState(seed))
        k, p = choose_uniform(PrngState(seed), n)
        assert 0 <= k < n
        if r >= (1 << 64) - ((1 << 64) % n):
            rejected += 1
            assert p.s != (seed + GOLDEN) & MASK64
    assert rejected > 50


def test_choose_uniform_three_way_frequencies():
    seeds = npk.mix64(np.arange(10**6, dtype=np.uint64))
    picks = npk._choose(seeds, np.full(seeds.size, 3))
    for i, h in enumerate(seeds[:200].tolist()):
        assert choose_uniform(PrngState(h), 3)[0] == picks[i]
    counts = np.bincount(picks, minlength=3)
    sd = (10**6 * (1 / 3) * (2 / 3)) ** 0.5
    assert np.all(np.abs(counts - 10**6 / 3) < 3 * sd)


def test_derive_seed_order_sensitive():
    assert derive_seed(1, 2) != derive_seed(2, 1)
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)


# -- simulation ----------------------------------------------------------------


def test_simulate_deterministic(choice, choice_prop):
    for sigma in (0, 1, 2**63 + 5):
        a = simulate(choice, choice_prop, sigma, 77)
        b = simulate(choice, choice_prop, sigma, 77)
        assert a == b
        assert len(a[0]) == 7 and a[1].trace_length == 7


def test_memoryless_choice_is_state_function(choice, choice_prop):
    for sigma in range(40):
        seen: dict = {}
        for seed in range(30):
            trace, _ = simulate(choice, choice_prop, sigma, seed, MEMORYLESS)
            for state, cmd in zip(trace.states, scheduled_actions(choice, sigma, trace.states, MEMORYLESS)):
                assert seen.setdefault(state, cmd) == cmd


def _consistent(mdp, states, actions):
    for k in range(len(states) - 1):
        cmd = actions[k]
        if cmd is None:
            assert states[k + 1] == states[k]
            continue
        options = {apply_branch(mdp, states[k], b) for b in mdp.commands[cmd].branches}
        assert states[k + 1] in options


@pytest.mark.parametrize("cls", [HISTORY, MEMORYLESS])
def test_traces_follow_the_scheduler(choice, choice_prop, cls):
    # prob_seed changes the branching, never the action taken at a given history
    for sigma in range(20):
        by_prefix: dict = {}
        for seed in range(20):
            trace, _ = simulate(choice, choice_prop, sigma, seed, cls)
            actions = scheduled_actions(choice, sigma, trace.states, cls)
            _consistent(choice, trace.states, actions)
            for k in range(len(trace.states)):
                key = trace.states[: k + 1] if cls == HISTORY else trace.states[k]
                assert by_prefix.setdefault(key, actions[k]) == actions[k]


def test_history_choice_differs_from_memoryless_somewhere(choice):
    # the same sigma generally resolves revisits of s=0 differently under history
    states = ((0,), (1,), (0,), (0,), (0,))
    diffs = 0
    for sigma in range(50):
        h = scheduled_actions(choice, sigma, states, HISTORY)
        diffs += len({h[0], h[2], h[3], h[4]}) > 1
    assert diffs > 20


def test_deadlock_self_loops():
    mdp = parse_model("var s : [0..2] init 0;\n[go] s=0 -> (s'=1);")
    trace, verdict = simulate(mdp, parse_property("X X s=1"), 3, 4)
    assert trace.states == ((0,), (1,), (1,))
    assert verdict.deadlocked and verdict.satisfied


def test_hash_state_uses_encoding(choice):
    hs = hash_state(hash_init(10), choice, (1,))
    assert hs.h == ((10 << 1) | 1) % MODULUS
    mdp = parse_model(random_model_text(random.Random(5)))
    state = tuple(v.init for v in mdp.variables)
    big = 7
    for v, b in encode_state(mdp, state):
        big = (big << b) | v
    assert hash_state(hash_init(7), mdp, state).h == big % MODULUS


def test_named_property_resolves(choice):
    assert resolve_property("next", choice) == parse_property("X s=1")
