"""Scheduler sampling algorithms: simple Chernoff/SPRT over many schedulers and smart sampling.

Every algorithm takes a :class:`~smartsmc.engine.BatchSimulator`, so the same
code drives real models and virtual scheduler populations.  Scheduler seeds are
drawn from a splitmix64 stream keyed by ``(master_seed, stage tag)`` and each
simulation's probabilistic seed by ``(master_seed, tag, sigma, lane)``; results
never depend on evaluation order or worker count.

SPRT orientation (Wald): ``ratio = L(p1) / L(p0)`` with ``p0 = theta + eps`` and
``p1 = theta - eps``.  ``ratio <= beta/(1-alpha)`` accepts H0 (``P >= p0``) and
``ratio >= (1-beta)/alpha`` accepts H1 (``P <= p1``).  Where the smart
hypothesis test talks about accepting on the "A" bound, that is the H0 bound
here.
"""

from __future__ import annotations

import dataclasses as d
import logging
import math
from fractions import Fraction

import numpy as np

from .engine import BatchSimulator
from .errors import BudgetError
from .kernels import numpy_kernels as npk
from .scheduler import GOLDEN, derive_seed
from .stats import (
    ChernoffSpec,
    SprtSpec,
    budget_split,
    candidate_confidence,
    chernoff_n_multi,
    log_sprt_bounds,
    multi_test_correction,
    sprt_log_factors,
)

log = logging.getLogger(__name__)

MAX, MIN = "max", "min"
DIRECTIONS = (MAX, MIN)

ACCEPTED = "accepted"
REJECTED = "rejected_given_budget"
INCONCLUSIVE = "inconclusive_given_budget"

CONFIDENCE_REACHED = "confidence_reached"
EMPTY_CANDIDATES = "empty_candidates"
SINGLE_CANDIDATE = "single_candidate_budget"

# Stage tags keep seed streams of different stages disjoint.
TAG_SIMPLE_ESTIMATE = 0x10
TAG_SIMPLE_SPRT = 0x11
TAG_EXPLORE = 0x20
TAG_CANDIDATES = 0x21
TAG_REFINE = 0x22
TAG_HYP_CANDIDATES = 0x30
TAG_HYP_REFINE = 0x31

BLOCK_LANES = 1 << 18


@d.dataclass(frozen=True)
class EstimateRecord:
    sigma: int
    successes: int
    trials: int

    @property
    def estimate(self) -> float:
        return self.successes / self.trials if self.trials else 0.0


@d.dataclass(frozen=True)
class EstimateResult:
    records: list[EstimateRecord]
    p_min: float | None
    p_max: float
    sims_per_scheduler: int
    total_simulations: int

    @property
    def found(self) -> bool:
        return self.p_max > 0


@d.dataclass(frozen=True)
class IterationRecord:
    iteration: int
    stage: str
    candidate_count: int
    sims_per_candidate: int
    simulations: int
    confidence: float | None
    best_estimate: float
    mean_estimate: float
    best_sigma: int | None
    best_true_probability: float | None = None


@d.dataclass
class SmartRunResult:
    best_sigma: int | None
    estimate: float
    direction: str
    iterations: list[IterationRecord]
    total_simulations: int
    terminated_by: str
    distributions: list[dict] | None = None


@d.dataclass
class HypothesisResult:
    verdict: str
    witness_sigma: int | None
    simulations_used: int
    hypothesis: str
    schedulers_tested: int = 0
    iterations: list[IterationRecord] = d.field(default_factory=list)

    def __post_init__(self) -> None:
        assert (self.witness_sigma is not None) == (self.verdict == ACCEPTED)


def draw_sigmas(master_seed: int, tag: int, count: int) -> np.ndarray:
    """``count`` scheduler seeds from the uniform seed stream of one stage."""
    start = np.uint64(derive_seed(master_seed, tag))
    steps = np.arange(1, count + 1, dtype=np.uint64) * np.uint64(GOLDEN)
    return npk.mix64(start + steps)


def _ceil_sqrt(n: int) -> int:
    r = math.isqrt(n)
    return r if r * r == n else r + 1


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def _successes(sim: BatchSimulator, sigmas: np.ndarray, tag: int, n_each: int) -> np.ndarray:
    """Success counts per slot, simulated in slot blocks to bound memory."""
    out = np.empty(sigmas.shape[0], dtype=np.int64)
    step = max(1, BLOCK_LANES // max(n_each, 1))
    for lo in range(0, sigmas.shape[0], step):
        block = sigmas[lo : lo + step]
        out[lo : lo + step] = sim.outcomes(block, tag, n_each, first_slot=lo).sum(axis=1)
    return out


def _rank(successes: np.ndarray, sigmas: np.ndarray) -> np.ndarray:
    """Slot order: most successes first, ties by ascending sigma, then slot."""
    slots = np.arange(sigmas.shape[0])
    return np.lexsort((slots, sigmas, -successes))


def _true_max(sim: BatchSimulator, sigmas: np.ndarray) -> float | None:
    probe = getattr(sim, "true_probabilities", None)
    if probe is None or sigmas.size == 0:
        return None
    return float(probe(sigmas).max())


def _check_direction(direction: str) -> None:
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")


# -- simple sampling ---------------------------------------------------------


def estimate_multiple(sim: BatchSimulator, spec: ChernoffSpec, m: int) -> EstimateResult:
    """Estimate ``m`` uniformly drawn schedulers, each with enough runs for joint confidence."""
    n = chernoff_n_multi(spec, m)
    before = sim.simulations
    sigmas = draw_sigmas(sim.master_seed, TAG_SIMPLE_ESTIMATE, m)
    wins = _successes(sim, sigmas, TAG_SIMPLE_ESTIMATE, n)
    records = [EstimateRecord(int(s), int(w), n) for s, w in zip(sigmas, wins)]
    p_max = int(wins.max()) / n
    positive = wins[wins > 0]
    p_min = int(positive.min()) / n if positive.size else None
    return EstimateResult(records, p_min, p_max, n, sim.simulations - before)


def hypothesis_multiple(
    sim: BatchSimulator, sprt: SprtSpec, m: int, direction: str = MAX
) -> HypothesisResult:
    """Sequentially test up to ``m`` schedulers for one with ``P >= theta`` (max) or ``P <= theta`` (min).

    Each scheduler runs its own SPRT with per-test errors corrected for ``m`` tests.
    """
    _check_direction(direction)
    target_h0 = direction == MAX
    alpha_m = multi_test_correction(sprt.alpha, m)
    beta_m = multi_test_correction(sprt.beta, m)
    log_a, log_b = log_sprt_bounds(alpha_m, beta_m)
    hit, miss = sprt_log_factors(sprt.p0, sprt.p1)
    sigmas = draw_sigmas(sim.master_seed, TAG_SIMPLE_SPRT, m)
    used = 0
    for i, sigma in enumerate(sigmas):
        tag = derive_seed(TAG_SIMPLE_SPRT, i)
        ratio, done, chunk = 0.0, 0, 256
        while True:
            lanes = np.arange(done, done + chunk, dtype=np.uint64)
            ok = sim.run(np.full(chunk, sigma, dtype=np.uint64), lanes, tag)
            path = ratio + np.cumsum(np.where(ok != 0, hit, miss))
            crossed = np.flatnonzero((path <= log_b) | (path >= log_a))
            if crossed.size:
                j = int(crossed[0])
                used += done + j + 1
                h0 = path[j] <= log_b
                break
            ratio = float(path[-1])
            done += chunk
            chunk = min(chunk * 2, 1 << 16)
        if h0 == target_h0:
            return HypothesisResult(ACCEPTED, int(sigma), used, "H0" if target_h0 else "H1", i + 1)
    return HypothesisResult(REJECTED, None, used, "H0" if target_h0 else "H1", m)


# -- smart estimation --------------------------------------------------------


def _sims_for_confidence(m: int, spec: ChernoffSpec) -> int:
    """Smallest ``n`` with ``candidate_confidence(n, m, eps) <= delta``."""
    eps, delta = spec.epsilon, spec.delta
    tail = -math.expm1(math.log1p(-delta) / m)
    n = max(1, math.ceil(-math.log(tail) / (2 * eps * eps)))
    while n > 1 and candidate_confidence(n - 1, m, eps) <= delta:
        n -= 1
    while candidate_confidence(n, m, eps) > delta:
        n += 1
    return n


def min_budget(spec: ChernoffSpec) -> float:
    return math.log(2 / spec.delta) / (2 * spec.epsilon**2)


def smart_estimate(
    sim: BatchSimulator,
    spec: ChernoffSpec,
    n_max: int,
    direction: str = MAX,
    record_distributions: bool = False,
) -> SmartRunResult:
    """Explore, generate candidates, then halve the candidate set until the estimate is confident.

    Minimisation maximises the negated property and reports ``1 - p``.
    """
    _check_direction(direction)
    if not n_max > min_budget(spec):
        raise BudgetError(
            f"per-iteration budget {n_max} must exceed ln(2/delta)/(2 eps^2) = {min_budget(spec):.1f}"
        )
    work = sim.complement() if direction == MIN else sim
    before = work.simulations
    rows: list[IterationRecord] = []
    dists: list[dict] | None = [] if record_distributions else None

    def note(iteration, stage, sigmas, wins, n, confidence, kept=None):
        order = _rank(wins, sigmas)
        best = int(order[0])
        rows.append(
            IterationRecord(
                iteration,
                stage,
                int(sigmas.shape[0]),
                n,
                int(sigmas.shape[0]) * n,
                confidence,
                int(wins[best]) / n,
                float(wins.sum()) / (sigmas.shape[0] * n),
                int(sigmas[best]),
                _true_max(work, sigmas if kept is None else sigmas[kept]),
            )
        )
        if dists is not None:
            entry = {"iteration": iteration, "stage": stage, "estimates": (wins / n).tolist()}
            probe = getattr(work, "true_probabilities", None)
            if probe is not None:
                entry["true_probabilities"] = probe(sigmas).tolist()
            dists.append(entry)
        return order

    def finish(best_sigma, estimate, reason):
        result = SmartRunResult(
            best_sigma, estimate, direction, rows, work.simulations - before, reason, dists
        )
        return _flip(result) if direction == MIN else result

    # stage (i): undirected exploration
    n = m = _ceil_sqrt(n_max)
    sigmas = draw_sigmas(work.master_seed, TAG_EXPLORE, m)
    wins = _successes(work, sigmas, TAG_EXPLORE, n)
    order = note(0, "explore", sigmas, wins, n, candidate_confidence(n, m, spec.epsilon))
    top = int(wins.max())
    if top == 0:
        return finish(None, 0.0, EMPTY_CANDIDATES)
    fallback = (int(sigmas[order[0]]), top / n)

    # stage (ii): candidate generation
    n, m = budget_split(Fraction(top, n), n_max)
    sigmas = draw_sigmas(work.master_seed, TAG_CANDIDATES, m)
    wins = _successes(work, sigmas, TAG_CANDIDATES, n)
    kept = np.flatnonzero(wins > 0)
    note(1, "candidates", sigmas, wins, n, candidate_confidence(n, m, spec.epsilon), kept)
    if kept.size == 0:
        return finish(*fallback, EMPTY_CANDIDATES)
    cands = sigmas[kept]

    # stage (iii): refinement
    i = 0
    while True:
        i += 1
        m_i = int(cands.shape[0])
        n_i = min(_ceil_div(n_max, m_i), _sims_for_confidence(m_i, spec))
        conf = candidate_confidence(n_i, m_i, spec.epsilon)
        wins = _successes(work, cands, TAG_REFINE + (i << 8), n_i)
        order = note(i + 1, "refine", cands, wins, n_i, conf)
        best = int(order[0])
        if conf <= spec.delta:
            return finish(int(cands[best]), int(wins[best]) / n_i, CONFIDENCE_REACHED)
        if m_i == 1:
            return finish(int(cands[best]), int(wins[best]) / n_i, SINGLE_CANDIDATE)
        cands = cands[order[: _ceil_div(m_i, 2)]]


def _flip(result: SmartRunResult) -> SmartRunResult:
    """Map a maximisation of the negated property back to a minimisation."""

    def comp(x):
        return None if x is None else 1.0 - x

    rows = [
        d.replace(
            r,
            best_estimate=1.0 - r.best_estimate,
            mean_estimate=1.0 - r.mean_estimate,
            best_true_probability=comp(r.best_true_probability),
        )
        for r in result.iterations
    ]
    dists = None
    if result.distributions is not None:
        dists = []
        for entry in result.distributions:
            entry = dict(entry)
            entry["estimates"] = [1.0 - x for x in entry["estimates"]]
            if "true_probabilities" in entry:
                entry["true_probabilities"] = [1.0 - x for x in entry["true_probabilities"]]
            dists.append(entry)
    return d.replace(result, estimate=1.0 - result.estimate, iterations=rows, distributions=dists)


def synthetic_smart_estimate(
    population,
    spec: ChernoffSpec,
    n_max: int,
    master_seed: int,
    workers: int = 1,
    backend: str | None = None,
) -> SmartRunResult:
    """Smart estimation against a virtual population, keeping per-iteration distributions."""
    from .synthetic import SyntheticSimulator

    sim = SyntheticSimulator(population, master_seed, workers, backend)
    return smart_estimate(sim, spec, n_max, MAX, record_distributions=True)


# -- smart hypothesis testing ------------------------------------------------


def smart_hypothesis(
    sim: BatchSimulator, sprt: SprtSpec, n_max: int, direction: str = MAX
) -> HypothesisResult:
    """Search for a scheduler with ``P >= theta`` (max) or ``P <= theta`` (min) using smart sampling.

    Candidates are sized from theta directly.  Each refinement iteration runs an
    aggregate SPRT over all simulations of the iteration and an individual SPRT
    per candidate with errors corrected for the candidate count.
    """
    _check_direction(direction)
    hypothesis = "H0" if direction == MAX else "H1"
    if n_max < 1:
        raise BudgetError("budget must be positive")
    work, spec = sim, sprt
    if direction == MIN:
        # exists P(phi) <= theta  <=>  exists P(!phi) >= 1 - theta
        work = sim.complement()
        spec = SprtSpec(1.0 - sprt.theta, sprt.epsilon, sprt.beta, sprt.alpha)
    before = work.simulations
    hit, miss = sprt_log_factors(spec.p0, spec.p1)
    _, log_b = log_sprt_bounds(spec.alpha, spec.beta)
    rows: list[IterationRecord] = []

    consumed = tested = 0

    def done(verdict, witness):
        return HypothesisResult(verdict, witness, consumed, hypothesis, tested, rows)

    theta = Fraction(repr(spec.theta))
    n = _ceil_div(theta.denominator, theta.numerator)
    m = max(1, math.ceil(theta * n_max))
    sigmas = draw_sigmas(work.master_seed, TAG_HYP_CANDIDATES, m)
    wins = _successes(work, sigmas, TAG_HYP_CANDIDATES, n)
    consumed = m * n
    tested = m
    order = _rank(wins, sigmas)
    total = int(wins.sum())
    rows.append(
        IterationRecord(0, "candidates", m, n, m * n, None, int(wins[order[0]]) / n,
                        total / (m * n), int(sigmas[order[0]]), _true_max(work, sigmas))
    )
    if total * hit + (m * n - total) * miss <= log_b:
        return done(ACCEPTED, int(sigmas[order[0]]))
    keep = wins > 0
    cands, score = sigmas[keep], wins[keep].astype(np.float64) / n

    it = 0
    while cands.size:
        it += 1
        m_i = int(cands.shape[0])
        n_i = _ceil_div(n_max, m_i)
        log_am, log_bm = log_sprt_bounds(
            multi_test_correction(spec.alpha, m_i), multi_test_correction(spec.beta, m_i)
        )
        order = np.lexsort((np.arange(m_i), cands, -score))
        cands = cands[order]
        tag = TAG_HYP_REFINE + (it << 8)
        agg = 0.0
        trials = np.zeros(m_i, dtype=np.int64)
        wins = np.zeros(m_i, dtype=np.int64)
        falsified = 0
        step = max(1, BLOCK_LANES // n_i)
        for lo in range(0, m_i, step):
            block = work.outcomes(cands[lo : lo + step], tag, n_i, first_slot=lo)
            paths = np.cumsum(np.where(block != 0, hit, miss), axis=1)
            for r in range(block.shape[0]):
                c = lo + r
                path = paths[r]
                accept_i = np.flatnonzero(path <= log_bm)
                accept_agg = np.flatnonzero(agg + path <= log_b)
                reject_i = np.flatnonzero(path >= log_am)
                first = [x[0] if x.size else n_i for x in (accept_i, accept_agg, reject_i)]
                stop = int(min(first))
                length = min(stop + 1, n_i)
                trials[c] = length
                wins[c] = int(block[r, :length].sum())
                consumed += length
                if stop < n_i and stop in (first[0], first[1]):
                    witness = cands[c] if first[0] == stop else cands[0]
                    rows.append(_hyp_row(it, cands, wins, trials, n_i, work))
                    return done(ACCEPTED, int(witness))
                if stop < n_i:
                    falsified += 1
                agg += float(path[length - 1])
        rows.append(_hyp_row(it, cands, wins, trials, n_i, work))
        if falsified == m_i:
            return done(REJECTED, None)
        if m_i == 1:
            return done(INCONCLUSIVE, None)
        score = wins / np.maximum(trials, 1)
        order = np.lexsort((np.arange(m_i), cands, -score))[: _ceil_div(m_i, 2)]
        cands, score = cands[order], score[order]
    return done(INCONCLUSIVE, None)


def _hyp_row(it, cands, wins, trials, n_i, work) -> IterationRecord:
    tried = trials > 0
    frac = np.where(tried, wins / np.maximum(trials, 1), 0.0)
    best = int(np.lexsort((np.arange(cands.size), cands, -frac))[0])
    return IterationRecord(
        it, "refine", int(cands.size), n_i, int(trials.sum()), None, float(frac[best]),
        float(wins.sum()) / max(int(trials.sum()), 1), int(cands[best]), _true_max(work, cands),
    )
