"""Batch simulation: per-lane seeding, chunking and a static worker pool.

Every simulation lane is identified by ``(tag, sigma, lane_id)`` and its
probabilistic seed is a pure function of ``(master_seed, tag, sigma, lane_id)``.
Lanes are split into fixed chunks before anything runs and results are written
back by position, so the worker count can never change an outcome.
"""

from __future__ import annotations

import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _accel
from .errors import ModelRangeError
from .kernels import codes
from .model import Mdp, compile_model
from .prop import Not, Prop, compile_property, horizon
from .scheduler import HISTORY, MEMORYLESS, SCHEDULER_CLASSES

log = logging.getLogger(__name__)

CHUNK_LANES = 1 << 16


def get_backend(name: str | None = None):
    name = (name or os.environ.get("SMARTSMC_BACKEND") or _accel.DEFAULT_BACKEND).lower()
    if name == "numba":
        if not _accel.NUMBA_OK:
            raise RuntimeError("numba backend requested but numba is unavailable or disabled")
        from .kernels import numba_kernels

        return numba_kernels
    if name == "numpy":
        from .kernels import numpy_kernels

        return numpy_kernels
    raise ValueError(f"unknown backend {name!r}")


def backend_name(kernels) -> str:
    return kernels.__name__.rsplit(".", 1)[-1].replace("_kernels", "")


def _as_u64(x) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(x, dtype=np.uint64))


class BatchSimulator:
    """Common lane bookkeeping; subclasses supply :meth:`_run_chunk`."""

    def __init__(self, master_seed: int, workers: int = 1, backend: str | None = None) -> None:
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.master_seed = master_seed & ((1 << 64) - 1)
        self.workers = workers
        self.kernels = get_backend(backend)
        self.simulations = 0
        self.deadlocks = 0
        self._lock = threading.Lock()

    @property
    def backend(self) -> str:
        return backend_name(self.kernels)

    def lane_seeds(self, tag: int, sigmas: np.ndarray, lane_ids: np.ndarray) -> np.ndarray:
        out = np.empty(sigmas.shape[0], dtype=np.uint64)
        self.kernels.lane_seeds(np.uint64(self.master_seed), np.uint64(tag), sigmas, lane_ids, out)
        return out

    def run(self, lane_sigmas, lane_ids, tag: int) -> np.ndarray:
        """One verdict per ``(sigma, lane_id)`` pair under *tag*, as int8."""
        lane_sigmas = _as_u64(lane_sigmas)
        lane_ids = _as_u64(lane_ids)
        total = lane_sigmas.shape[0]
        out = np.empty(total, dtype=np.int8)
        bounds = [(lo, min(lo + CHUNK_LANES, total)) for lo in range(0, total, CHUNK_LANES)]

        def work(span: tuple[int, int]) -> None:
            lo, hi = span
            sig = lane_sigmas[lo:hi]
            out[lo:hi] = self._run_chunk(sig, self.lane_seeds(tag, sig, lane_ids[lo:hi]))

        if self.workers == 1 or len(bounds) <= 1:
            for span in bounds:
                work(span)
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                list(pool.map(work, bounds))
        self.simulations += total
        return out

    def outcomes(self, sigmas, tag: int, n_each: int, first_slot: int = 0) -> np.ndarray:
        """Run ``n_each`` replicates of every scheduler; returns an ``(M, n_each)`` int8 matrix.

        Replicate ``j`` of slot ``i`` is lane ``(first_slot + i) * n_each + j`` under *tag*,
        so a slot range can be simulated in pieces with identical results.
        """
        sigmas = _as_u64(sigmas)
        m = sigmas.shape[0]
        lanes = np.arange(m * n_each, dtype=np.uint64)
        lane_sigmas = np.repeat(sigmas, n_each)
        out = self.run(lane_sigmas, lanes + np.uint64(first_slot * n_each), tag)
        return out.reshape(m, n_each)

    def successes(self, sigmas, tag: int, n_each: int) -> np.ndarray:
        return self.outcomes(sigmas, tag, n_each).sum(axis=1, dtype=np.int64)

    def complement(self) -> "BatchSimulator":
        """A simulator over the same schedulers whose verdicts are negated."""
        raise NotImplementedError

    def _run_chunk(self, sigmas: np.ndarray, seeds: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class MdpSimulator(BatchSimulator):
    def __init__(
        self,
        mdp: Mdp,
        prop: Prop,
        scheduler_class: str = HISTORY,
        master_seed: int = 0,
        workers: int = 1,
        backend: str | None = None,
    ) -> None:
        super().__init__(master_seed, workers, backend)
        if scheduler_class not in SCHEDULER_CLASSES:
            raise ValueError(f"unknown scheduler class {scheduler_class!r}")
        self.mdp = mdp
        self.prop = prop
        self.scheduler_class = scheduler_class
        self.model_arrays = compile_model(mdp).as_tuple()
        self.prop_arrays = compile_property(prop, mdp).as_tuple()
        self.horizon = horizon(prop)

    def complement(self) -> "MdpSimulator":
        return MdpSimulator(
            self.mdp, Not(self.prop), self.scheduler_class, self.master_seed, self.workers, self.backend
        )

    def _kernel(self, sigmas, seeds, record: bool):
        n = sigmas.shape[0]
        nv = len(self.mdp.variables)
        verdicts = np.empty(n, dtype=np.int8)
        deadlocks = np.empty(n, dtype=np.bool_)
        status = np.empty(n, dtype=np.int8)
        traces = np.empty((n, self.horizon + 1, nv) if record else (1, 1, 1), dtype=np.int64)
        self.kernels.simulate_lanes(
            self.model_arrays,
            self.prop_arrays,
            sigmas,
            seeds,
            self.scheduler_class == MEMORYLESS,
            record,
            traces,
            verdicts,
            deadlocks,
            status,
        )
        if (status != codes.STATUS_OK).any():
            lane = int(np.flatnonzero(status != codes.STATUS_OK)[0])
            raise ModelRangeError(
                f"an update left a variable's domain (sigma={int(sigmas[lane])}, seed={int(seeds[lane])})"
            )
        stuck = int(deadlocks.sum())
        if stuck:
            with self._lock:
                self.deadlocks += stuck
        return verdicts, traces

    def _run_chunk(self, sigmas, seeds):
        return self._kernel(sigmas, seeds, False)[0]

    def run_lanes(self, sigmas, seeds, record: bool = False):
        """Simulate explicit ``(sigma, prob_seed)`` pairs; returns ``(verdicts, traces)``."""
        return self._kernel(_as_u64(sigmas), _as_u64(seeds), record)
