from __future__ import annotations

import math
import random

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from smartsmc.stats import (
    ChernoffSpec,
    SprtSpec,
    SprtState,
    budget_split,
    candidate_confidence,
    chernoff_n,
    chernoff_n_multi,
    good_scheduler_seen_probability,
    log_sprt_bounds,
    multi_test_correction,
    sprt_bounds,
    sprt_step,
)

SPEC = ChernoffSpec(0.01, 0.01)


def test_chernoff_constants():
    assert chernoff_n(SPEC) == 26492
    assert chernoff_n(ChernoffSpec(0.02, 0.01)) == 6623
    assert chernoff_n_multi(SPEC, 1) == 26492
    assert chernoff_n_multi(SPEC, 4000) == 67937


def test_chernoff_floor_of_one():
    assert chernoff_n(ChernoffSpec(0.99, 0.9)) == 1


def test_chernoff_multi_monotone():
    prev = chernoff_n(SPEC)
    for m in range(1, 1001):
        n = chernoff_n_multi(SPEC, m)
        assert n >= prev
        prev = n


@pytest.mark.parametrize("eps,delta", [(0.0, 0.1), (1.0, 0.1), (0.1, 0.0), (0.1, 1.0)])
def test_chernoff_spec_validation(eps, delta):
    with pytest.raises(ValueError):
        ChernoffSpec(eps, delta)


def test_multi_test_correction():
    assert multi_test_correction(0.01, 1) == pytest.approx(0.01, rel=1e-15)
    assert multi_test_correction(0.01, 2) == pytest.approx(1 - math.sqrt(0.99), rel=1e-12)
    assert round(multi_test_correction(0.01, 2), 8) == 0.00501256
    for m in (3, 50, 4000):
        a = multi_test_correction(0.05, m)
        assert (1 - a) ** m == pytest.approx(0.95, abs=1e-12)


def test_sprt_bounds():
    a, b = sprt_bounds(0.01, 0.01)
    assert a == pytest.approx(99)
    assert b == pytest.approx(0.01 / 0.99)
    assert sprt_bounds(0.5, 0.5) == (1.0, 1.0)
    la, lb = log_sprt_bounds(0.01, 0.01)
    assert la == pytest.approx(math.log(99)) and lb == pytest.approx(math.log(0.01 / 0.99))


@given(st.floats(0.001, 0.49), st.floats(0.001, 0.49))
def test_sprt_bounds_ordering(alpha, beta):
    a, b = sprt_bounds(alpha, beta)
    assert a > 1 > b


def test_sprt_step_examples():
    assert sprt_step(1.0, True, 0.21, 0.19) == pytest.approx(19 / 21, rel=1e-14)
    assert sprt_step(1.0, False, 0.21, 0.19) == pytest.approx(0.81 / 0.79, rel=1e-14)


def test_sprt_step_matches_product():
    rng = random.Random(7)
    for _ in range(200):
        p1 = rng.uniform(0.01, 0.9)
        p0 = rng.uniform(p1 + 0.001, 0.99)
        outcomes = [rng.random() < 0.5 for _ in range(rng.randint(1, 200))]
        ratio = 1.0
        for o in outcomes:
            ratio = sprt_step(ratio, o, p0, p1)
        k = sum(outcomes)
        direct = (p1 / p0) ** k * ((1 - p1) / (1 - p0)) ** (len(outcomes) - k)
        assert ratio == pytest.approx(direct, rel=1e-12)


def test_sprt_state_decisions():
    s = SprtState(0.21, 0.19, 0.01, 0.01)
    while not s.accepts_h0:
        s.update(True)
    assert not s.accepts_h1
    t = SprtState(0.21, 0.19, 0.01, 0.01)
    while not t.accepts_h1:
        t.update(False)
    assert t.n > 1


def test_sprt_spec_validation():
    spec = SprtSpec(0.2, 0.01, 0.01, 0.01)
    assert spec.p0 == pytest.approx(0.21) and spec.p1 == pytest.approx(0.19)
    for theta in (0.005, 0.995):
        with pytest.raises(ValueError):
            SprtSpec(theta, 0.01, 0.01, 0.01)


def test_candidate_confidence():
    assert candidate_confidence(0, 5, 0.01) == 1.0
    n = chernoff_n(ChernoffSpec(0.01, 0.005))
    assert math.exp(-2 * 0.01**2 * n) <= 0.005 / 2
    assert candidate_confidence(n, 1, 0.01) <= 0.005 / 2
    prev = 1.0
    for n in range(1000, 200_000, 5000):
        c = candidate_confidence(n, 10, 0.01)
        assert c < prev
        assert candidate_confidence(n, 11, 0.01) > c
        prev = c


def test_against_high_precision():
    rng = random.Random(3)
    with mpmath.workdps(60):
        for _ in range(300):
            n, m, eps = rng.randint(1, 10**6), rng.randint(1, 10**5), rng.uniform(1e-3, 0.2)
            tail = mpmath.exp(-2 * mpmath.mpf(eps) ** 2 * n)
            ref = -mpmath.expm1(m * mpmath.log1p(-tail))
            got = candidate_confidence(n, m, eps)
            if ref > 1e-300:
                assert abs(got - ref) <= 1e-10 * ref
            alpha = rng.uniform(1e-6, 0.5)
            ref = -mpmath.expm1(mpmath.log1p(-mpmath.mpf(alpha)) / m)
            assert abs(multi_test_correction(alpha, m) - ref) <= 1e-10 * ref


def test_good_scheduler_seen_probability():
    assert good_scheduler_seen_probability(0.0, 0.5, 10, 10) == 0.0
    assert good_scheduler_seen_probability(1.0, 0.3, 1, 10**6) == pytest.approx(1.0)
    assert good_scheduler_seen_probability(0.5, 0.5, 2, 2) == pytest.approx(0.75 * 0.75)


def _split_values(budget, pg, pbar):
    return {n: good_scheduler_seen_probability(pg, pbar, budget // n, n) for n in range(1, budget + 1) if budget % n == 0}


def test_heuristic_split_where_it_is_optimal():
    # N = ceil(1/pbar) is the best factorisation when the expected number of
    # good traces M * pg * N * pbar is close to one
    for pg, pbar in [(0.01, 0.01), (0.001, 0.1)]:
        values = _split_values(10**4, pg, pbar)
        assert values[math.ceil(1 / pbar)] == max(values.values())


def test_heuristic_split_can_be_far_from_optimal():
    # with many expected good traces, spending more runs per scheduler wins
    values = _split_values(10**4, 0.01, 0.1)
    assert values[10] == pytest.approx((1 - 0.99**1000) * (1 - 0.9**10))
    assert max(values, key=values.get) == 25
    assert values[10] / values[25] < 0.95


def test_budget_split_examples():
    assert budget_split(1.0, 10**5) == (1, 10**5)
    assert budget_split(0.5, 10**5) == (2, 50_000)
    assert budget_split(1e-6, 10**5) == (10**5, 1)
    with pytest.raises(ValueError):
        budget_split(0.0, 10**5)


@given(st.floats(1e-7, 1.0), st.integers(1, 10**7))
def test_budget_split_total_bounded(p, n_max):
    n, m = budget_split(p, n_max)
    assert n >= 1 and m >= 1
    assert n * m <= 2 * n_max
