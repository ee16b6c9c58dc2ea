"""Throughput of the numba and numpy simulation backends on the bundled models.

    python3 benchmarks/bench_kernels.py --lanes 1000000

Both backends produce identical verdicts; this only compares speed.  The first
numba call pays JIT compilation (cached on disk afterwards), so it is warmed
up before timing.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from smartsmc import _accel
from smartsmc.engine import MdpSimulator
from smartsmc.model import load_model
from smartsmc.prop import resolve_property
from smartsmc.synthetic import SyntheticPopulation, SyntheticSimulator

CASES = [("choice", "once", "history"), ("choice", "once", "memoryless"), ("coordination", "meet", "history")]


def bench(sim, lanes: int, repeats: int) -> tuple[float, float]:
    sigmas = np.arange(1, 1001, dtype=np.uint64)
    n_each = max(1, lanes // sigmas.size)
    sim.outcomes(sigmas[:10], 1, 10)  # warm-up / JIT
    best = float("inf")
    rate = 0.0
    for r in range(repeats):
        t0 = time.perf_counter()
        out = sim.outcomes(sigmas, 2 + r, n_each)
        best = min(best, time.perf_counter() - t0)
        rate = float(out.mean())
    return best, rate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lanes", type=int, default=1_000_000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    backends = ["numpy"] + (["numba"] if _accel.NUMBA_OK else [])
    print(f"{'case':<28}{'backend':<8}{'seconds':>10}{'Msim/s':>10}{'rate':>10}")
    for model, prop, cls in CASES:
        mdp = load_model(model)
        phi = resolve_property(prop, mdp)
        rates = {}
        for backend in backends:
            sim = MdpSimulator(mdp, phi, cls, master_seed=7, workers=args.workers, backend=backend)
            secs, rate = bench(sim, args.lanes, args.repeats)
            rates[backend] = rate
            print(f"{model + '/' + cls:<28}{backend:<8}{secs:>10.3f}{args.lanes / secs / 1e6:>10.2f}{rate:>10.5f}")
        assert len(set(rates.values())) == 1, "backends disagree"
    pop = SyntheticPopulation.exponential(0.2, mass=0.0144)
    for backend in backends:
        sim = SyntheticSimulator(pop, master_seed=7, workers=args.workers, backend=backend)
        secs, rate = bench(sim, args.lanes, args.repeats)
        print(f"{'synthetic/exponential':<28}{backend:<8}{secs:>10.3f}{args.lanes / secs / 1e6:>10.2f}{rate:>10.5f}")


if __name__ == "__main__":
    main()
