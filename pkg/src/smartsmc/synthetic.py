"""Virtual scheduler populations: each sigma is a coin with a fixed success probability.

Used to study how smart sampling converges when the distribution of scheduler
quality is known exactly.  A population with ``mass < 1`` gives probability 0
to a fraction ``1 - mass`` of schedulers and draws the rest from the density.
"""

from __future__ import annotations

import dataclasses as d
import math

import numpy as np

from .engine import BatchSimulator
from .kernels import numpy_kernels as npk

LINEAR = "linear"
EXPONENTIAL = "exponential"
EXPLICIT = "explicit"

_SALT_MASS = np.uint64(0x6A09E667F3BCC909)
_SALT_VALUE = np.uint64(0xBB67AE8584CAA73B)


@d.dataclass(frozen=True)
class SyntheticPopulation:
    kind: str
    p_max: float = 0.2
    mass: float = 1.0
    rate: float = 30.0
    values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in (LINEAR, EXPONENTIAL, EXPLICIT):
            raise ValueError(f"unknown population kind {self.kind!r}")
        if self.kind == EXPLICIT:
            if not self.values:
                raise ValueError("explicit population needs at least one probability")
            if any(not 0.0 <= v <= 1.0 for v in self.values):
                raise ValueError("probabilities must lie in [0,1]")
        else:
            if not 0.0 < self.p_max <= 1.0:
                raise ValueError("p_max must lie in (0,1]")
            if not 0.0 < self.mass <= 1.0:
                raise ValueError("mass must lie in (0,1]")
            if self.kind == EXPONENTIAL and self.rate <= 0:
                raise ValueError("rate must be positive")

    @classmethod
    def linear(cls, p_max: float, mass: float = 1.0) -> "SyntheticPopulation":
        return cls(LINEAR, p_max=p_max, mass=mass)

    @classmethod
    def exponential(cls, p_max: float, rate: float = 30.0, mass: float = 1.0) -> "SyntheticPopulation":
        return cls(EXPONENTIAL, p_max=p_max, mass=mass, rate=rate)

    @classmethod
    def explicit(cls, values) -> "SyntheticPopulation":
        return cls(EXPLICIT, values=tuple(float(v) for v in values))

    def density(self, p) -> np.ndarray:
        """Normalised density of the non-zero part (explicit populations have none)."""
        p = np.asarray(p, dtype=np.float64)
        inside = (p >= 0) & (p <= self.p_max)
        if self.kind == LINEAR:
            return np.where(inside, 2.0 * (self.p_max - p) / self.p_max**2, 0.0)
        if self.kind == EXPONENTIAL:
            r, top = self.rate, self.p_max
            return np.where(inside, (np.exp(-r * p) - math.exp(-r * top)) / self._exp_total(), 0.0)
        raise ValueError("explicit populations have no density")

    def _exp_total(self) -> float:
        r, top = self.rate, self.p_max
        return -math.expm1(-r * top) / r - top * math.exp(-r * top)

    def _exp_cdf(self, p: np.ndarray) -> np.ndarray:
        r, top = self.rate, self.p_max
        return (-np.expm1(-r * p) / r - p * math.exp(-r * top)) / self._exp_total()

    def inverse_cdf(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        if self.kind == LINEAR:
            return self.p_max * (1.0 - np.sqrt(1.0 - u))
        if self.kind == EXPONENTIAL:
            lo = np.zeros_like(u)
            hi = np.full_like(u, self.p_max)
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                below = self._exp_cdf(mid) < u
                lo = np.where(below, mid, lo)
                hi = np.where(below, hi, mid)
            return 0.5 * (lo + hi)
        raise ValueError("explicit populations have no inverse CDF")

    def probabilities(self, sigmas) -> np.ndarray:
        """Success probability of every virtual scheduler; a pure function of sigma."""
        sigmas = np.ascontiguousarray(np.asarray(sigmas, dtype=np.uint64))
        if self.kind == EXPLICIT:
            table = np.asarray(self.values, dtype=np.float64)
            pick = npk.mix64(sigmas ^ _SALT_VALUE) % np.uint64(table.size)
            return table[pick.astype(np.int64)]
        keep = npk.to_unit(npk.mix64(sigmas ^ _SALT_MASS)) < self.mass
        p = self.inverse_cdf(npk.to_unit(npk.mix64(sigmas ^ _SALT_VALUE)))
        return np.where(keep, p, 0.0)

    def mean(self) -> float:
        """Expected success probability of a uniformly drawn scheduler."""
        if self.kind == EXPLICIT:
            return math.fsum(self.values) / len(self.values)
        if self.kind == LINEAR:
            return self.mass * self.p_max / 3.0
        r, top = self.rate, self.p_max
        e = math.exp(-r * top)
        first = (-math.expm1(-r * top) - r * top * e) / r**2 - 0.5 * top**2 * e
        return self.mass * first / self._exp_total()

    def variance(self) -> float:
        """Variance of the success probability of a uniformly drawn scheduler."""
        if self.kind == EXPLICIT:
            v = np.asarray(self.values)
            return float(v.var())
        grid = np.linspace(0.0, self.p_max, 200001)
        f = self.density(grid)
        second = self.mass * float(np.trapezoid(grid**2 * f, grid))
        return second - self.mean() ** 2

    def maximum(self) -> float:
        return max(self.values) if self.kind == EXPLICIT else self.p_max

    def describe(self) -> dict:
        if self.kind == EXPLICIT:
            return {"kind": self.kind, "values": list(self.values)}
        out = {"kind": self.kind, "p_max": self.p_max, "mass": self.mass}
        if self.kind == EXPONENTIAL:
            out["rate"] = self.rate
        return out


class SyntheticSimulator(BatchSimulator):
    """Bernoulli lanes at the virtual scheduler's probability."""

    def __init__(
        self,
        population: SyntheticPopulation,
        master_seed: int = 0,
        workers: int = 1,
        backend: str | None = None,
        negated: bool = False,
    ) -> None:
        super().__init__(master_seed, workers, backend)
        self.population = population
        self.negated = negated

    def true_probabilities(self, sigmas) -> np.ndarray:
        p = self.population.probabilities(sigmas)
        return 1.0 - p if self.negated else p

    def complement(self) -> "SyntheticSimulator":
        return SyntheticSimulator(
            self.population, self.master_seed, self.workers, self.backend, not self.negated
        )

    def _run_chunk(self, sigmas, seeds):
        # negate per lane so the complement sees exactly the opposite outcomes
        # lanes repeat each scheduler many times; price every distinct one once
        distinct, where = np.unique(sigmas, return_inverse=True)
        probs = self.population.probabilities(distinct)[where]
        verdicts = np.empty(sigmas.shape[0], dtype=np.int8)
        self.kernels.bernoulli_lanes(probs, seeds, verdicts)
        return 1 - verdicts if self.negated else verdicts
