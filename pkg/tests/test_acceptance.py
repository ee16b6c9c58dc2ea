"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line PASS/FAIL summary; ``conftest.py`` prints them at
the end of the pytest run, and running this file directly prints them too.
"""

from __future__ import annotations

import math
import random
import statistics
import time
from fractions import Fraction

import numpy as np
import pytest

from smartsmc.algorithms import ACCEPTED, smart_estimate, smart_hypothesis, synthetic_smart_estimate
from smartsmc.cli import RunConfig, run
from smartsmc.engine import MdpSimulator
from smartsmc.model import encode_state, load_model, parse_model
from smartsmc.oracle import exact_optimum_history, exact_optimum_memoryless
from smartsmc.prop import parse_property, resolve_property
from smartsmc.scheduler import (
    MEMORYLESS,
    MODULUS,
    HISTORY,
    hash_init,
    hash_state,
    scheduled_actions,
    simulate,
)
from smartsmc.stats import ChernoffSpec, SprtSpec, chernoff_n, chernoff_n_multi, good_scheduler_seen_probability
from smartsmc.synthetic import SyntheticPopulation

from conftest import random_model_text, random_property_text

pytestmark = pytest.mark.acceptance

REPORT: dict[int, str] = {}
SPEC = ChernoffSpec(0.01, 0.01)
CHOICE_MAX = 0.32805


def _report(n: int, ok: bool, started: float, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({time.perf_counter() - started:.1f}s) {detail}"
    REPORT[n] = line
    print(line)


@pytest.fixture(scope="module")
def choice():
    mdp = load_model("choice")
    return mdp, resolve_property("once", mdp)


def test_1_chernoff_constants():
    t0 = time.perf_counter()
    single, multi = chernoff_n(SPEC), chernoff_n_multi(SPEC, 4000)
    ok = single == 26492 and multi == 67937
    _report(1, ok, t0, f"N={single} (want 26492), N_M=4000={multi} (want 67937)")
    assert ok


def test_2_choice_ground_truth(choice):
    mdp, prop = choice
    t0 = time.perf_counter()
    hist = exact_optimum_history(mdp, prop, "max").value
    mem = exact_optimum_memoryless(mdp, prop, "max").value
    elapsed = time.perf_counter() - t0
    ok = abs(hist - Fraction(CHOICE_MAX)) <= 1e-12 and abs(mem - Fraction(0.06561)) <= 1e-12 and elapsed < 1.0
    _report(2, ok, t0, f"history max={float(hist)}, memoryless max={float(mem)}")
    assert ok


def test_3_smart_estimation_accuracy(choice):
    mdp, prop = choice
    t0 = time.perf_counter()
    errors = []
    for seed in range(20):
        sim = MdpSimulator(mdp, prop, HISTORY, master_seed=1000 + seed)
        errors.append(abs(smart_estimate(sim, SPEC, 10**5).estimate - CHOICE_MAX))
    within_02 = sum(e <= 0.02 for e in errors)
    within_01 = sum(e <= 0.01 for e in errors)
    elapsed = time.perf_counter() - t0
    ok = within_02 == 20 and within_01 >= 18 and elapsed < 300
    _report(3, ok, t0, f"{within_02}/20 within 0.02, {within_01}/20 within 0.01, worst error {max(errors):.4f}")
    assert ok


def test_4_hash_matches_big_integer():
    t0 = time.perf_counter()
    rng = random.Random(404)
    bad = 0
    for _ in range(1000):
        mdp = parse_model(random_model_text(rng))
        sigma = rng.getrandbits(64)
        hs, big = hash_init(sigma), sigma
        for _ in range(rng.randint(1, 12)):
            state = tuple(rng.randint(v.lower, v.upper) for v in mdp.variables)
            hs = hash_state(hs, mdp, state)
            for value, width in encode_state(mdp, state):
                big = (big << width) | value
        bad += hs.h != big % MODULUS
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and elapsed < 10
    _report(4, ok, t0, f"{1000 - bad}/1000 chains exact")
    assert ok


def test_5_scheduler_semantics():
    t0 = time.perf_counter()
    rng = random.Random(505)
    problems = []
    for k in range(100):
        text = random_model_text(rng)
        mdp = parse_model(text)
        prop = parse_property(random_property_text(rng, text))
        sigmas = [rng.getrandbits(64) for _ in range(4)]
        seeds = [rng.getrandbits(64) for _ in range(8)]
        for cls in (HISTORY, MEMORYLESS):
            engine = MdpSimulator(mdp, prop, cls)
            for sigma in sigmas:
                chosen: dict = {}
                lanes = engine.run_lanes([sigma] * len(seeds), seeds, record=True)
                again = engine.run_lanes([sigma] * len(seeds), seeds, record=True)
                if not (np.array_equal(lanes[0], again[0]) and np.array_equal(lanes[1], again[1])):
                    problems.append((k, "batch not deterministic"))
                for j, seed in enumerate(seeds):
                    first, second = simulate(mdp, prop, sigma, seed, cls), simulate(mdp, prop, sigma, seed, cls)
                    if first != second or list(map(tuple, lanes[1][j])) != list(first[0].states):
                        problems.append((k, "trace mismatch"))
                    if cls == MEMORYLESS:
                        for state, cmd in zip(first[0].states, scheduled_actions(mdp, sigma, first[0].states, cls)):
                            if chosen.setdefault(state, cmd) != cmd:
                                problems.append((k, "memoryless choice depends on history"))
    elapsed = time.perf_counter() - t0
    ok = not problems and elapsed < 60
    _report(5, ok, t0, f"100 models, {len(problems)} violations")
    assert ok, problems[:5]


def test_6_hypothesis_testing(choice):
    mdp, prop = choice
    t0 = time.perf_counter()
    counts = {}
    for theta in (0.2, 0.5):
        spec = SprtSpec(theta, 0.01, 0.01, 0.01)
        counts[theta] = sum(
            smart_hypothesis(MdpSimulator(mdp, prop, HISTORY, master_seed=seed), spec, 10**5).verdict == ACCEPTED
            for seed in range(100)
        )
    elapsed = time.perf_counter() - t0
    ok = counts[0.2] >= 99 and counts[0.5] == 0 and elapsed < 600
    _report(6, ok, t0, f"P>=0.2 accepted {counts[0.2]}/100, P>=0.5 accepted {counts[0.5]}/100")
    assert ok


def test_7_synthetic_convergence():
    t0 = time.perf_counter()
    pop = SyntheticPopulation.exponential(0.2, mass=0.0144)
    means, monotone = [], 0
    for seed in range(100):
        res = synthetic_smart_estimate(pop, SPEC, 10**6, seed)
        explore = res.iterations[0]
        means.append(explore.mean_estimate)
        best = [r.best_true_probability for r in res.iterations if r.stage != "explore"]
        monotone += all(b >= a for a, b in zip(best, best[1:]))
    # one exploration mean averages n runs on each of m schedulers
    n = m = explore.candidate_count
    second = pop.variance() + pop.mean() ** 2
    per_run_var = (pop.variance() + (pop.mean() - second) / n) / m
    se = math.sqrt(per_run_var / len(means))
    pooled = statistics.fmean(means)
    elapsed = time.perf_counter() - t0
    ok = abs(pooled - pop.mean()) <= 3 * se and monotone >= 95 and elapsed < 600
    _report(
        7, ok, t0,
        f"pooled mean {pooled:.6f} vs {pop.mean():.6f} ({abs(pooled - pop.mean()) / se:.2f} SE), "
        f"best kept in {monotone}/100 runs",
    )
    assert ok


def test_8_budget_split_heuristic():
    t0 = time.perf_counter()
    budget = 10**4
    factors = [n for n in range(1, budget + 1) if budget % n == 0]
    cells = []
    for pg in (0.001, 0.01, 0.1):
        for pbar in (0.01, 0.1, 0.5):
            values = {n: good_scheduler_seen_probability(pg, pbar, budget // n, n) for n in factors}
            ratio = values[math.ceil(1 / pbar)] / max(values.values())
            cells.append((pg, pbar, ratio))
    failing = [c for c in cells if c[2] < 0.95]
    ok = not failing
    worst = min(cells, key=lambda c: c[2])
    _report(
        8, ok, t0,
        f"{9 - len(failing)}/9 cells reach 95% of the best split; worst p_g={worst[0]}, "
        f"mean={worst[1]} at {worst[2]:.1%}",
    )
    assert ok, "heuristic below 95% of optimum in: " + ", ".join(f"({a}, {b}): {r:.1%}" for a, b, r in failing)


def test_9_worker_invariance():
    t0 = time.perf_counter()
    modes = [
        dict(mode="smart-estimate", model="choice", budget=10**5),
        dict(mode="smart-estimate", model="coordination", budget=10**5, direction="min"),
        dict(mode="simple-estimate", model="choice", schedulers=20),
        dict(mode="smart-hypothesis", model="choice", budget=10**5, theta=0.2),
        dict(mode="simple-hypothesis", model="choice", schedulers=100, theta=0.2),
        dict(mode="oracle", model="choice"),
        dict(mode="synthetic", budget=10**6, population={"kind": "exponential", "mass": 0.0144}),
    ]
    mismatched = []
    for cfg in modes:
        payloads = [run(RunConfig(**cfg, master_seed=77, workers=w)).payload() for w in (1, 4, 8)]
        if not payloads[0] == payloads[1] == payloads[2]:
            mismatched.append(cfg["mode"])
    elapsed = time.perf_counter() - t0
    ok = not mismatched and elapsed < 120
    _report(9, ok, t0, f"{len(modes) - len(mismatched)}/{len(modes)} modes identical across workers 1/4/8")
    assert ok, mismatched


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
