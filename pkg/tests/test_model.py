from __future__ import annotations

import random
from fractions import Fraction

import pytest

from smartsmc.errors import ModelRangeError, ModelSemanticError, ModelSyntaxError
from smartsmc.model import (
    encode_state,
    enabled,
    initial_state,
    load_model,
    parse_model,
    print_model,
    successor,
)

from conftest import random_model_text

CHOICE = """
var s : [0..1] init 0;
[a1] s=0 -> 0.9:(s'=0) + 0.1:(s'=1);
[a2] s=0 -> 0.5:(s'=0) + 0.5:(s'=1);
[a0] s=1 -> 1.0:(s'=0);
"""


def test_parse_choice_shape():
    mdp = parse_model(CHOICE)
    assert [v.name for v in mdp.variables] == ["s"]
    assert [c.label for c in mdp.commands] == ["a1", "a2", "a0"]
    assert mdp.commands[0].branches[0].weight == Fraction(9, 10)


def test_weight_sum_error():
    with pytest.raises(ModelSemanticError, match="sum"):
        parse_model("var s : [0..1] init 0;\n[a] true -> 0.5:(s'=0) + 0.4:(s'=1);")


def test_empty_command_list():
    with pytest.raises(ModelSemanticError):
        parse_model("var s : [0..1] init 0;")


@pytest.mark.parametrize(
    "text",
    [
        "var s : [0..1] init 0;\nvar s : [0..1] init 0;\n[a] true -> (s'=0);",
        "var s : [0..1] init 2;\n[a] true -> (s'=0);",
        "var s : [0..1] init 0;\n[a] t=1 -> (s'=0);",
        "var s : [0..7] init 0 bits 2;\n[a] true -> (s'=0);",
        "var s : [0..1] init 0;\n[a] true -> 1.2:(s'=0);",
    ],
)
def test_semantic_errors(text):
    with pytest.raises(ModelSemanticError):
        parse_model(text)


def test_syntax_error_has_position():
    with pytest.raises(ModelSyntaxError) as info:
        parse_model("var s : [0..1] init 0;\n[a] s=0 -> 0.5:(s'=0) +;")
    assert info.value.line == 2
    assert info.value.column > 1


def test_enabled_choice(choice):
    assert enabled(choice, (0,)) == [0, 1]
    assert enabled(choice, (1,)) == [2]


def test_enabled_deadlock():
    mdp = parse_model("var s : [0..1] init 0;\n[a] s=1 -> (s'=0);")
    assert enabled(mdp, (0,)) == []


def test_successor_choice(choice):
    assert successor(choice, (0,), 0, 0.3) == (0,)
    assert successor(choice, (0,), 0, 0.95) == (1,)
    assert successor(choice, (1,), 2, 0.999) == (0,)


def test_successor_total_over_unit_interval(choice):
    for u in (0.0, 0.5, 0.8999999, 0.9, 1 - 2**-53):
        assert successor(choice, (0,), 0, u) in {(0,), (1,)}


def test_range_error():
    mdp = parse_model("var s : [0..1] init 0;\n[a] true -> (s'=s+1);")
    successor(mdp, (0,), 0, 0.1)
    with pytest.raises(ModelRangeError):
        successor(mdp, (1,), 0, 0.1)


def test_encode_state():
    mdp = parse_model("var s : [0..1] init 1;\nvar x : [-3..3] init -3;\n[a] true -> (s'=s);")
    assert mdp.variables[1].bit_width == 3
    assert encode_state(mdp, (1, -3)) == [(1, 1), (0, 3)]
    assert encode_state(mdp, initial_state(mdp)) == [(1, 1), (0, 3)]


def test_constants_and_weight_ratios():
    mdp = parse_model(
        "const K = 3;\nvar x : [0..K] init 0;\n[a] x<K -> 1/3:(x'=x+1) + 2/3:(x'=x);\n[b] x=K -> (x'=0);"
    )
    assert mdp.variables[0].upper == 3
    assert [b.weight for b in mdp.commands[0].branches] == [Fraction(1, 3), Fraction(2, 3)]


def test_weights_renormalised_exactly():
    mdp = parse_model("var x : [0..1] init 0;\n[a] true -> 0.3333333333:(x'=0) + 0.6666666667:(x'=1);")
    assert sum(b.weight for b in mdp.commands[0].branches) == 1


def test_property_clause(choice):
    assert set(choice.properties) == {"once", "next"}


def test_bundled_models_load():
    for name in ("choice", "coordination"):
        assert load_model(name).commands


@pytest.mark.parametrize("seed", range(60))
def test_print_parse_round_trip(seed):
    text = random_model_text(random.Random(seed))
    first = parse_model(text)
    assert parse_model(print_model(first)) == first


@pytest.mark.parametrize("seed", range(30))
def test_enabled_is_increasing_subsequence(seed):
    mdp = parse_model(random_model_text(random.Random(seed)))
    rng = random.Random(seed)
    for _ in range(20):
        state = tuple(rng.randint(v.lower, v.upper) for v in mdp.variables)
        idx = enabled(mdp, state)
        assert idx == sorted(set(idx))
        assert all(0 <= i < len(mdp.commands) for i in idx)
