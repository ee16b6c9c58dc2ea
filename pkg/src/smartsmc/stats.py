"""Closed-form statistics: Chernoff sample sizes, SPRT machinery, confidence, budget split.

Sample sizes are evaluated with mpmath at 60 significant digits before taking
the ceiling; an off-by-one in ``N`` silently weakens the stated guarantee.
"""

from __future__ import annotations

import dataclasses as d
import math
from fractions import Fraction

import mpmath

_DPS = 60


@d.dataclass(frozen=True)
class ChernoffSpec:
    epsilon: float
    delta: float

    def __post_init__(self) -> None:
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0,1), got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0,1), got {self.delta}")


@d.dataclass(frozen=True)
class SprtSpec:
    """Indifference region ``[theta - epsilon, theta + epsilon]`` around the threshold."""

    theta: float
    epsilon: float
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if not 0 < self.p1 < self.p0 < 1:
            raise ValueError(
                f"need 0 < theta-epsilon < theta+epsilon < 1, got theta={self.theta}, epsilon={self.epsilon}"
            )
        for name in ("alpha", "beta"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0,1)")

    @property
    def p0(self) -> float:
        return self.theta + self.epsilon

    @property
    def p1(self) -> float:
        return self.theta - self.epsilon


def _ceil_checked(value: mpmath.mpf) -> int:
    n = int(mpmath.ceil(value))
    assert n - 1 < value <= n
    return max(n, 1)


def chernoff_n(spec: ChernoffSpec) -> int:
    """Simulations needed so that ``P(|p_hat - p| >= epsilon) <= delta``."""
    with mpmath.workdps(_DPS):
        eps, delta = mpmath.mpf(spec.epsilon), mpmath.mpf(spec.delta)
        return _ceil_checked((mpmath.log(2) - mpmath.log(delta)) / (2 * eps**2))


def chernoff_n_multi(spec: ChernoffSpec, m: int) -> int:
    """Per-scheduler simulations so that all *m* estimates hold jointly with ``1 - delta``."""
    if m < 1:
        raise ValueError("need at least one scheduler")
    with mpmath.workdps(_DPS):
        eps, delta = mpmath.mpf(spec.epsilon), mpmath.mpf(spec.delta)
        per_test = -mpmath.expm1(mpmath.log1p(-delta) / m)
        return _ceil_checked((mpmath.log(2) - mpmath.log(per_test)) / (2 * eps**2))


def multi_test_correction(alpha: float, m: int) -> float:
    """Per-test error so that *m* independent tests err jointly with probability *alpha*."""
    if not 0 < alpha < 1 or m < 1:
        raise ValueError("need alpha in (0,1) and m >= 1")
    return -math.expm1(math.log1p(-alpha) / m)


def sprt_bounds(alpha: float, beta: float) -> tuple[float, float]:
    """Wald's thresholds ``(A, B)`` for ``ratio = L(p1) / L(p0)``.

    Accept H1 (``p <= p1``) once ``ratio >= A``; accept H0 (``p >= p0``) once ``ratio <= B``.
    """
    return (1 - beta) / alpha, beta / (1 - alpha)


def log_sprt_bounds(alpha: float, beta: float) -> tuple[float, float]:
    return math.log1p(-beta) - math.log(alpha), math.log(beta) - math.log1p(-alpha)


def sprt_log_factors(p0: float, p1: float) -> tuple[float, float]:
    """Log-ratio increments for a satisfying and a violating trace."""
    return math.log(p1) - math.log(p0), math.log1p(-p1) - math.log1p(-p0)


def sprt_step(ratio: float, satisfied: bool, p0: float, p1: float) -> float:
    hit, miss = sprt_log_factors(p0, p1)
    return math.exp(math.log(ratio) + (hit if satisfied else miss))


class SprtState:
    """Running SPRT in log space."""

    def __init__(self, p0: float, p1: float, alpha: float, beta: float) -> None:
        self.hit, self.miss = sprt_log_factors(p0, p1)
        self.log_a, self.log_b = log_sprt_bounds(alpha, beta)
        self.log_ratio = 0.0
        self.n = 0

    def update(self, satisfied: bool) -> None:
        self.log_ratio += self.hit if satisfied else self.miss
        self.n += 1

    @property
    def accepts_h0(self) -> bool:
        return self.log_ratio <= self.log_b

    @property
    def accepts_h1(self) -> bool:
        return self.log_ratio >= self.log_a


def candidate_confidence(n: int, m: int, epsilon: float) -> float:
    """Probability that some of *m* estimates from *n* simulations each misses by epsilon or more."""
    if m < 1:
        raise ValueError("need at least one candidate")
    if n <= 0:
        return 1.0
    tail = math.exp(-2.0 * epsilon * epsilon * n)
    return -math.expm1(m * math.log1p(-tail))


def good_scheduler_seen_probability(p_good: float, p_good_mean: float, m: int, n: int) -> float:
    """Chance that *m* schedulers x *n* runs show a satisfying trace from a good scheduler."""

    def at_least_one(p: float, k: int) -> float:
        if k <= 0 or p <= 0:
            return 0.0
        if p >= 1:
            return 1.0
        return -math.expm1(k * math.log1p(-p))

    return at_least_one(p_good, m) * at_least_one(p_good_mean, n)


def _ceil_fraction(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def budget_split(p_hat: float | Fraction, n_max: int) -> tuple[int, int]:
    """Candidate generation sizing ``(N, M) = (ceil(1/p), ceil(n_max * p))``.

    ``M`` is capped at ``ceil(n_max / N)``; if ``ceil(1/p)`` exceeds the whole
    budget, everything goes on one scheduler.
    """
    p = Fraction(p_hat)
    if p <= 0:
        raise ValueError("no satisfying trace observed; cannot size the candidate set")
    if p > 1 or n_max < 1:
        raise ValueError("need p_hat in (0,1] and n_max >= 1")
    n = _ceil_fraction(1 / p)
    if n > n_max:
        return n_max, 1
    m = _ceil_fraction(n_max * p)
    return n, min(m, -(-n_max // n))
